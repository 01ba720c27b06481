/* C interface to the reluspec library. All functions returning rs_status set
 * a thread-local message retrievable with rs_last_error() on failure. Objects
 * are opaque handles owned by the caller and released with the matching
 * *_free function (NULL is accepted). */
#ifndef RELUSPEC_H
#define RELUSPEC_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RS_API
#elif defined(RELUSPEC_BUILDING_LIBRARY)
#define RS_API __attribute__((visibility("default")))
#else
#define RS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rs_status {
  RS_OK = 0,
  RS_ERR_DIMENSION = 1,
  RS_ERR_NUMERIC = 2,
  RS_ERR_DEGENERATE_WEIGHT = 3,
  RS_ERR_UNSUPPORTED_ORDER = 4,
  RS_ERR_PRECISION = 5,
  RS_ERR_CONFIG = 6,
  RS_ERR_IO = 7,
  RS_ERR_PARSE = 8,
  RS_ERR_MEMORY = 9,
  RS_ERR_INVALID_ARGUMENT = 10,
  RS_ERR_GATE = 11,
  RS_ERR_INTERNAL = 12
} rs_status;

typedef struct rs_pointset rs_pointset;
typedef struct rs_spectrum rs_spectrum;
typedef struct rs_network rs_network;
typedef struct rs_dataset rs_dataset;
typedef struct rs_config rs_config;
typedef struct rs_experiment_result rs_experiment_result;

RS_API const char* rs_version(void);
RS_API const char* rs_status_string(rs_status status);
/* Message of the last failed call on this thread; "" if none. */
RS_API const char* rs_last_error(void);

/* ---- point sets (rows are unit vectors) ---- */
/* rows: n*d row-major. With normalize != 0 each row is scaled to unit norm. */
RS_API rs_status rs_pointset_from_rows(const double* rows, int n, int d, int normalize, rs_pointset** out);
RS_API rs_status rs_pointset_sample_uniform(int d, int n, uint64_t seed, uint64_t stream, rs_pointset** out);
RS_API rs_status rs_pointset_sample_positive_orthant(int d, int n, uint64_t seed, uint64_t stream, rs_pointset** out);
RS_API rs_status rs_pointset_sample_orthant_complement(int d, int n, uint64_t seed, uint64_t stream,
                                                       rs_pointset** out);
RS_API rs_status rs_pointset_read_csv(const char* path, rs_pointset** out);
RS_API rs_status rs_pointset_write_csv(const rs_pointset* points, const char* path);
RS_API int rs_pointset_dim(const rs_pointset* points);
RS_API int rs_pointset_count(const rs_pointset* points);
/* Copies n*d row-major values; capacity is in doubles. */
RS_API rs_status rs_pointset_copy_rows(const rs_pointset* points, double* out, size_t capacity);
RS_API void rs_pointset_free(rs_pointset* points);
RS_API rs_status rs_angular_distance(const double* u, const double* v, int d, double* out);

/* ---- kernels ---- */
RS_API double rs_slice_kernel(double s);
RS_API double rs_relu_kernel(double s);
RS_API rs_status rs_arccos_j(int t, double theta, double* out);
/* raw = J_{t-1}/(2 pi); derivative = t^2 raw. */
RS_API rs_status rs_rectified_poly_kernel(int t, double s, double* raw, double* derivative);
RS_API rs_status rs_legendre_poly(int d, int t, double xi, double* out);
/* Writes N(d, t) as a decimal string. */
RS_API rs_status rs_harmonic_multiplicity(int d, int t, char* buffer, size_t capacity);
/* kernel: "slice", "relu-g", "arccos-J<t>", "rectified-poly<t>", "rectified-poly-g<t>".
 * out receives m*m values. */
RS_API rs_status rs_gram_matrix(const rs_pointset* points, const char* kernel, double* out, size_t capacity);
RS_API rs_status rs_kernel_spectrum(const char* kernel, int d, int max_order, size_t expanded_cap, rs_spectrum** out);
RS_API int rs_spectrum_max_order(const rs_spectrum* spectrum);
/* multiplicity is returned as a double (may round for huge values). */
RS_API rs_status rs_spectrum_order(const rs_spectrum* spectrum, int t, double* gamma, double* multiplicity);
RS_API size_t rs_spectrum_expanded_length(const rs_spectrum* spectrum);
RS_API rs_status rs_spectrum_expanded(const rs_spectrum* spectrum, double* out, size_t capacity);
/* 1-based inclusive index range. */
RS_API rs_status rs_decay_exponent(const rs_spectrum* spectrum, size_t first, size_t last, double* beta);
RS_API void rs_spectrum_free(rs_spectrum* spectrum);

/* ---- discrepancy ---- */
RS_API rs_status rs_expected_k_squared(int d, double* out);
RS_API rs_status rs_l2_discrepancy_closed(const rs_pointset* w, double* out);
RS_API rs_status rs_l2_discrepancy_mc(const rs_pointset* w, uint64_t pairs, uint64_t seed, uint64_t stream,
                                      double* estimate, double* standard_error);
RS_API rs_status rs_linf_discrepancy_estimate(const rs_pointset* w, uint64_t num_slices, uint64_t seed, double* out);
/* Raw weights, n*d row-major. gradient may be NULL. */
RS_API rs_status rs_diversity_regularizer(const double* weights, int n, int d, double* value, double* gradient);
RS_API rs_status rs_gcal_membership(const rs_pointset* w, double c_g, double delta_prime, int* is_member,
                                    double* ratio);

/* ---- networks ---- */
RS_API rs_status rs_network_create(const double* signs, const double* weights, int n, int d, rs_network** out);
RS_API rs_status rs_network_read_checkpoint(const char* path, rs_network** out);
RS_API rs_status rs_network_write_checkpoint(const rs_network* net, const char* path);
RS_API int rs_network_units(const rs_network* net);
RS_API int rs_network_dim(const rs_network* net);
RS_API rs_status rs_network_copy_weights(const rs_network* net, double* out, size_t capacity);
RS_API rs_status rs_network_forward(const rs_network* net, const double* x, int d, double* out);
RS_API void rs_network_free(rs_network* net);

RS_API rs_status rs_dataset_create(const rs_pointset* x, const double* y, double y_bound, rs_dataset** out);
RS_API rs_status rs_dataset_read_csv(const char* path, int renormalize, double y_bound, rs_dataset** out);
RS_API int rs_dataset_size(const rs_dataset* data);
RS_API void rs_dataset_free(rs_dataset* data);

RS_API rs_status rs_network_loss(const rs_network* net, const rs_dataset* data, double* out);
/* gradient receives n*d values; norm may be NULL. */
RS_API rs_status rs_network_gradient(const rs_network* net, const rs_dataset* data, double subgradient_c,
                                     double* gradient, size_t capacity, double* norm);

typedef struct rs_train_config {
  int batch_size;
  double learning_rate;
  double momentum;
  int64_t iterations;
  double reg_coefficient;
  uint64_t seed;
  uint64_t stream;
  double subgradient_c;
  int64_t eval_every;
} rs_train_config;

RS_API void rs_train_config_default(rs_train_config* config);
RS_API rs_status rs_network_train(rs_network* net, const rs_dataset* data, const rs_train_config* config,
                                  double* final_loss);
RS_API rs_status rs_generalization_bound(double y_bound, double weight_budget, double m, double delta, double* out);

/* ---- spectral ---- */
RS_API rs_status rs_min_singular_value(const rs_network* net, const rs_pointset* x, double subgradient_c, double* out);
RS_API rs_status rs_residual_bound_check(const rs_network* net, const rs_dataset* data, double subgradient_c,
                                         double* lhs, double* rhs, int* holds);
RS_API rs_status rs_matching_distribution(int d, int m, uint64_t samples, uint64_t seed, double* lambda_uniform,
                                          double* lambda_matching);

/* ---- configs and experiments ---- */
RS_API rs_status rs_config_create(rs_config** out);
/* Flat key=value file or a run manifest. */
RS_API rs_status rs_config_load(const char* path, rs_config** out);
RS_API rs_status rs_config_set(rs_config* config, const char* key, const char* value);
RS_API void rs_config_free(rs_config* config);

RS_API int rs_experiment_count(void);
RS_API const char* rs_experiment_name(int index);
/* Runs an experiment. When check != 0 and any gate fails the result is still
 * returned and the status is RS_ERR_GATE. */
RS_API rs_status rs_experiment_run(const char* name, const rs_config* config, const char* out_dir, int check,
                                   rs_experiment_result** out);
RS_API const char* rs_experiment_result_summary_json(const rs_experiment_result* result);
RS_API int rs_experiment_result_gate_count(const rs_experiment_result* result);
RS_API rs_status rs_experiment_result_gate(const rs_experiment_result* result, int index, const char** name,
                                           int* passed, const char** detail);
RS_API int rs_experiment_result_passed(const rs_experiment_result* result);
RS_API void rs_experiment_result_free(rs_experiment_result* result);

#ifdef __cplusplus
}
#endif

#endif /* RELUSPEC_H */
