#include "reluspec/reluspec.h"

#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "reluspec/config.hpp"
#include "reluspec/discrepancy.hpp"
#include "reluspec/error.hpp"
#include "reluspec/experiments.hpp"
#include "reluspec/kernels.hpp"
#include "reluspec/network.hpp"
#include "reluspec/spectral.hpp"

using namespace reluspec;

struct rs_pointset {
  PointSet value;
};
struct rs_spectrum {
  KernelSpectrum value;
};
struct rs_network {
  ReluNetwork value;
};
struct rs_dataset {
  Dataset value;
};
struct rs_config {
  Config value;
};
struct rs_experiment_result {
  ExperimentResult value;
  std::string summary_json;
};

namespace {

thread_local std::string g_last_error;

rs_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimension: return RS_ERR_DIMENSION;
    case ErrorCode::kNumeric: return RS_ERR_NUMERIC;
    case ErrorCode::kDegenerateWeight: return RS_ERR_DEGENERATE_WEIGHT;
    case ErrorCode::kUnsupportedOrder: return RS_ERR_UNSUPPORTED_ORDER;
    case ErrorCode::kPrecision: return RS_ERR_PRECISION;
    case ErrorCode::kConfig: return RS_ERR_CONFIG;
    case ErrorCode::kIo: return RS_ERR_IO;
    case ErrorCode::kParse: return RS_ERR_PARSE;
    case ErrorCode::kMemory: return RS_ERR_MEMORY;
    case ErrorCode::kInvalidArgument: return RS_ERR_INVALID_ARGUMENT;
  }
  return RS_ERR_INTERNAL;
}

template <class F>
rs_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return RS_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return RS_ERR_MEMORY;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RS_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return RS_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  require(p != nullptr, ErrorCode::kInvalidArgument, std::string(what) + " must not be NULL");
}

void need_capacity(std::size_t have, std::size_t want) {
  require(have >= want, ErrorCode::kInvalidArgument,
          "output buffer holds " + std::to_string(have) + " values, " + std::to_string(want) + " needed");
}

RowMatrix rows_of(const double* data, int n, int d) {
  need(data, "input array");
  require(n >= 1 && d >= 1, ErrorCode::kDimension, "n and d must be positive");
  return Eigen::Map<const RowMatrix>(data, n, d);
}

template <class T>
rs_status make_pointset(T&& factory, rs_pointset** out) {
  return guarded([&] {
    need(out, "out");
    *out = new rs_pointset{factory()};
  });
}

}  // namespace

extern "C" {

const char* rs_version(void) { return library_version(); }

const char* rs_status_string(rs_status status) {
  switch (status) {
    case RS_OK: return "ok";
    case RS_ERR_DIMENSION: return "dimension";
    case RS_ERR_NUMERIC: return "numeric";
    case RS_ERR_DEGENERATE_WEIGHT: return "degenerate-weight";
    case RS_ERR_UNSUPPORTED_ORDER: return "unsupported-order";
    case RS_ERR_PRECISION: return "precision";
    case RS_ERR_CONFIG: return "config";
    case RS_ERR_IO: return "io";
    case RS_ERR_PARSE: return "parse";
    case RS_ERR_MEMORY: return "memory";
    case RS_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case RS_ERR_GATE: return "gate";
    case RS_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* rs_last_error(void) { return g_last_error.c_str(); }

// ---- point sets

rs_status rs_pointset_from_rows(const double* rows, int n, int d, int normalize_rows, rs_pointset** out) {
  return make_pointset(
      [&] {
        RowMatrix m = rows_of(rows, n, d);
        return normalize_rows ? normalize(m) : PointSet::from_unit_rows(std::move(m));
      },
      out);
}

rs_status rs_pointset_sample_uniform(int d, int n, uint64_t seed, uint64_t stream, rs_pointset** out) {
  return make_pointset([&] { return sample_uniform_sphere(d, n, {seed, stream}); }, out);
}

rs_status rs_pointset_sample_positive_orthant(int d, int n, uint64_t seed, uint64_t stream, rs_pointset** out) {
  return make_pointset([&] { return sample_positive_orthant(d, n, {seed, stream}); }, out);
}

rs_status rs_pointset_sample_orthant_complement(int d, int n, uint64_t seed, uint64_t stream, rs_pointset** out) {
  return make_pointset([&] { return sample_orthant_complement(d, n, {seed, stream}); }, out);
}

rs_status rs_pointset_read_csv(const char* path, rs_pointset** out) {
  return make_pointset(
      [&] {
        need(path, "path");
        return PointSet::from_unit_rows(read_points_csv(std::filesystem::path(path)));
      },
      out);
}

rs_status rs_pointset_write_csv(const rs_pointset* points, const char* path) {
  return guarded([&] {
    need(points, "points");
    need(path, "path");
    write_points_csv(std::filesystem::path(path), points->value.points());
  });
}

int rs_pointset_dim(const rs_pointset* points) { return points ? points->value.dim() : 0; }
int rs_pointset_count(const rs_pointset* points) { return points ? points->value.count() : 0; }

rs_status rs_pointset_copy_rows(const rs_pointset* points, double* out, size_t capacity) {
  return guarded([&] {
    need(points, "points");
    need(out, "out");
    const auto& m = points->value.points();
    need_capacity(capacity, static_cast<std::size_t>(m.size()));
    std::memcpy(out, m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
  });
}

void rs_pointset_free(rs_pointset* points) { delete points; }

rs_status rs_angular_distance(const double* u, const double* v, int d, double* out) {
  return guarded([&] {
    need(u, "u");
    need(v, "v");
    need(out, "out");
    require(d >= 1, ErrorCode::kDimension, "d must be positive");
    *out = angular_distance(Eigen::Map<const Eigen::VectorXd>(u, d), Eigen::Map<const Eigen::VectorXd>(v, d));
  });
}

// ---- kernels

double rs_slice_kernel(double s) { return slice_kernel(s); }
double rs_relu_kernel(double s) { return relu_activation_kernel(s); }

rs_status rs_arccos_j(int t, double theta, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = arccos_j(t, theta);
  });
}

rs_status rs_rectified_poly_kernel(int t, double s, double* raw, double* derivative) {
  return guarded([&] {
    const RectifiedPolyValue v = rectified_poly_kernel(t, s);
    if (raw) *raw = v.raw;
    if (derivative) *derivative = v.derivative;
  });
}

rs_status rs_legendre_poly(int d, int t, double xi, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = legendre_poly(d, t, xi);
  });
}

rs_status rs_harmonic_multiplicity(int d, int t, char* buffer, size_t capacity) {
  return guarded([&] {
    need(buffer, "buffer");
    const std::string s = harmonic_multiplicity(d, t).str();
    need_capacity(capacity, s.size() + 1);
    std::memcpy(buffer, s.c_str(), s.size() + 1);
  });
}

rs_status rs_gram_matrix(const rs_pointset* points, const char* kernel, double* out, size_t capacity) {
  return guarded([&] {
    need(points, "points");
    need(kernel, "kernel");
    need(out, "out");
    const auto m = static_cast<std::size_t>(points->value.count());
    need_capacity(capacity, m * m);
    const Eigen::MatrixXd g = gram_matrix(points->value, DotProductKernel::parse(kernel));
    std::memcpy(out, g.data(), m * m * sizeof(double));
  });
}

rs_status rs_kernel_spectrum(const char* kernel, int d, int max_order, size_t expanded_cap, rs_spectrum** out) {
  return guarded([&] {
    need(kernel, "kernel");
    need(out, "out");
    SpectrumConfig cfg;
    cfg.max_order = max_order;
    if (expanded_cap > 0) cfg.expanded_cap = expanded_cap;
    *out = new rs_spectrum{kernel_spectrum(DotProductKernel::parse(kernel), d, cfg)};
  });
}

int rs_spectrum_max_order(const rs_spectrum* spectrum) {
  return spectrum ? static_cast<int>(spectrum->value.orders.size()) - 1 : -1;
}

rs_status rs_spectrum_order(const rs_spectrum* spectrum, int t, double* gamma, double* multiplicity) {
  return guarded([&] {
    need(spectrum, "spectrum");
    require(t >= 0 && t < static_cast<int>(spectrum->value.orders.size()), ErrorCode::kInvalidArgument,
            "order out of range");
    const SpectrumOrder& o = spectrum->value.orders[static_cast<std::size_t>(t)];
    if (gamma) *gamma = o.gamma;
    if (multiplicity) *multiplicity = o.multiplicity.convert_to<double>();
  });
}

size_t rs_spectrum_expanded_length(const rs_spectrum* spectrum) { return spectrum ? spectrum->value.expanded.size() : 0; }

rs_status rs_spectrum_expanded(const rs_spectrum* spectrum, double* out, size_t capacity) {
  return guarded([&] {
    need(spectrum, "spectrum");
    need(out, "out");
    const auto& e = spectrum->value.expanded;
    need_capacity(capacity, e.size());
    std::memcpy(out, e.data(), e.size() * sizeof(double));
  });
}

rs_status rs_decay_exponent(const rs_spectrum* spectrum, size_t first, size_t last, double* beta) {
  return guarded([&] {
    need(spectrum, "spectrum");
    need(beta, "beta");
    *beta = decay_exponent(spectrum->value, first, last);
  });
}

void rs_spectrum_free(rs_spectrum* spectrum) { delete spectrum; }

// ---- discrepancy

rs_status rs_expected_k_squared(int d, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = expected_k_squared(d);
  });
}

rs_status rs_l2_discrepancy_closed(const rs_pointset* w, double* out) {
  return guarded([&] {
    need(w, "w");
    need(out, "out");
    *out = l2_discrepancy_closed(w->value);
  });
}

rs_status rs_l2_discrepancy_mc(const rs_pointset* w, uint64_t pairs, uint64_t seed, uint64_t stream, double* estimate,
                               double* standard_error) {
  return guarded([&] {
    need(w, "w");
    const MonteCarloEstimate e = l2_discrepancy_mc(w->value, pairs, {seed, stream});
    if (estimate) *estimate = e.estimate;
    if (standard_error) *standard_error = e.standard_error;
  });
}

rs_status rs_linf_discrepancy_estimate(const rs_pointset* w, uint64_t num_slices, uint64_t seed, double* out) {
  return guarded([&] {
    need(w, "w");
    need(out, "out");
    LinfOptions opt;
    opt.num_slices = num_slices;
    *out = linf_discrepancy_estimate(w->value, {seed, 0}, opt);
  });
}

rs_status rs_diversity_regularizer(const double* weights, int n, int d, double* value, double* gradient) {
  return guarded([&] {
    const RowMatrix w = rows_of(weights, n, d);
    RowMatrix g;
    const double r = diversity_regularizer_with_gradient(w, g);
    if (value) *value = r;
    if (gradient) std::memcpy(gradient, g.data(), static_cast<std::size_t>(g.size()) * sizeof(double));
  });
}

rs_status rs_gcal_membership(const rs_pointset* w, double c_g, double delta_prime, int* is_member, double* ratio) {
  return guarded([&] {
    need(w, "w");
    const GcalMembership m = gcal_membership(w->value, c_g, delta_prime);
    if (is_member) *is_member = m.is_member ? 1 : 0;
    if (ratio) *ratio = m.ratio;
  });
}

// ---- networks

rs_status rs_network_create(const double* signs, const double* weights, int n, int d, rs_network** out) {
  return guarded([&] {
    need(signs, "signs");
    need(out, "out");
    RowMatrix w = rows_of(weights, n, d);
    *out = new rs_network{ReluNetwork(Eigen::Map<const Eigen::VectorXd>(signs, n), std::move(w))};
  });
}

rs_status rs_network_read_checkpoint(const char* path, rs_network** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new rs_network{read_checkpoint(std::filesystem::path(path))};
  });
}

rs_status rs_network_write_checkpoint(const rs_network* net, const char* path) {
  return guarded([&] {
    need(net, "net");
    need(path, "path");
    write_checkpoint(std::filesystem::path(path), net->value);
  });
}

int rs_network_units(const rs_network* net) { return net ? net->value.units() : 0; }
int rs_network_dim(const rs_network* net) { return net ? net->value.dim() : 0; }

rs_status rs_network_copy_weights(const rs_network* net, double* out, size_t capacity) {
  return guarded([&] {
    need(net, "net");
    need(out, "out");
    const auto& w = net->value.weights();
    need_capacity(capacity, static_cast<std::size_t>(w.size()));
    std::memcpy(out, w.data(), static_cast<std::size_t>(w.size()) * sizeof(double));
  });
}

rs_status rs_network_forward(const rs_network* net, const double* x, int d, double* out) {
  return guarded([&] {
    need(net, "net");
    need(x, "x");
    need(out, "out");
    require(d >= 1, ErrorCode::kDimension, "d must be positive");
    *out = forward(net->value, Eigen::Map<const Eigen::VectorXd>(x, d));
  });
}

void rs_network_free(rs_network* net) { delete net; }

rs_status rs_dataset_create(const rs_pointset* x, const double* y, double y_bound, rs_dataset** out) {
  return guarded([&] {
    need(x, "x");
    need(y, "y");
    need(out, "out");
    *out = new rs_dataset{Dataset::make(x->value, Eigen::Map<const Eigen::VectorXd>(y, x->value.count()), y_bound)};
  });
}

rs_status rs_dataset_read_csv(const char* path, int renormalize, double y_bound, rs_dataset** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new rs_dataset{read_dataset_csv(std::filesystem::path(path), renormalize != 0, y_bound)};
  });
}

int rs_dataset_size(const rs_dataset* data) { return data ? data->value.size() : 0; }
void rs_dataset_free(rs_dataset* data) { delete data; }

rs_status rs_network_loss(const rs_network* net, const rs_dataset* data, double* out) {
  return guarded([&] {
    need(net, "net");
    need(data, "data");
    need(out, "out");
    require(data->value.x.dim() == net->value.dim(), ErrorCode::kDimension, "data dimension does not match");
    *out = loss(net->value, data->value);
  });
}

rs_status rs_network_gradient(const rs_network* net, const rs_dataset* data, double subgradient_c, double* grad,
                              size_t capacity, double* norm) {
  return guarded([&] {
    need(net, "net");
    need(data, "data");
    const Gradient g = gradient(net->value, data->value, subgradient_c);
    if (grad) {
      need_capacity(capacity, static_cast<std::size_t>(g.grad.size()));
      std::memcpy(grad, g.grad.data(), static_cast<std::size_t>(g.grad.size()) * sizeof(double));
    }
    if (norm) *norm = g.norm;
  });
}

void rs_train_config_default(rs_train_config* config) {
  if (!config) return;
  const TrainConfig d;
  *config = rs_train_config{d.batch_size, d.learning_rate, d.momentum, d.iterations, d.reg_coefficient,
                            d.seed.seed,  d.seed.stream,   d.subgradient_c, d.eval_every};
}

rs_status rs_network_train(rs_network* net, const rs_dataset* data, const rs_train_config* config, double* final_loss) {
  return guarded([&] {
    need(net, "net");
    need(data, "data");
    need(config, "config");
    TrainConfig c;
    c.batch_size = config->batch_size;
    c.learning_rate = config->learning_rate;
    c.momentum = config->momentum;
    c.iterations = config->iterations;
    c.reg_coefficient = config->reg_coefficient;
    c.seed = {config->seed, config->stream};
    c.subgradient_c = config->subgradient_c;
    c.eval_every = config->eval_every;
    c.trace_discrepancy = false;
    const TrainingTrace trace = sgd_train(net->value, data->value, c);
    if (final_loss) *final_loss = trace.rows.back().loss;
  });
}

rs_status rs_generalization_bound(double y_bound, double weight_budget, double m, double delta, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = generalization_bound(y_bound, weight_budget, m, delta);
  });
}

// ---- spectral

rs_status rs_min_singular_value(const rs_network* net, const rs_pointset* x, double subgradient_c, double* out) {
  return guarded([&] {
    need(net, "net");
    need(x, "x");
    need(out, "out");
    *out = min_singular_value(ExtendedFeatureMatrix::build(net->value, x->value, subgradient_c, FeatureMode::kImplicit));
  });
}

rs_status rs_residual_bound_check(const rs_network* net, const rs_dataset* data, double subgradient_c, double* lhs,
                                  double* rhs, int* holds) {
  return guarded([&] {
    need(net, "net");
    need(data, "data");
    const ResidualBound b = residual_bound_check(net->value, data->value, subgradient_c);
    if (lhs) *lhs = b.lhs;
    if (rhs) *rhs = b.rhs;
    if (holds) *holds = b.holds ? 1 : 0;
  });
}

rs_status rs_matching_distribution(int d, int m, uint64_t samples, uint64_t seed, double* lambda_uniform,
                                   double* lambda_matching) {
  return guarded([&] {
    const MatchingResult r = matching_distribution_experiment(d, m, samples, {seed, 0});
    if (lambda_uniform) *lambda_uniform = r.lambda_min_uniform;
    if (lambda_matching) *lambda_matching = r.lambda_min_matching;
  });
}

// ---- configs and experiments

rs_status rs_config_create(rs_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new rs_config{};
  });
}

rs_status rs_config_load(const char* path, rs_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new rs_config{Config::load(std::filesystem::path(path))};
  });
}

rs_status rs_config_set(rs_config* config, const char* key, const char* value) {
  return guarded([&] {
    need(config, "config");
    need(key, "key");
    need(value, "value");
    config->value.set(key, value, std::string("--") + key);
  });
}

void rs_config_free(rs_config* config) { delete config; }

int rs_experiment_count(void) { return static_cast<int>(experiment_names().size()); }

const char* rs_experiment_name(int index) {
  const auto& names = experiment_names();
  if (index < 0 || index >= static_cast<int>(names.size())) return nullptr;
  return names[static_cast<std::size_t>(index)].c_str();
}

rs_status rs_experiment_run(const char* name, const rs_config* config, const char* out_dir, int check,
                            rs_experiment_result** out) {
  bool gates_ok = true;
  const rs_status st = guarded([&] {
    need(name, "name");
    need(out_dir, "out_dir");
    need(out, "out");
    const Config empty;
    auto result = std::make_unique<rs_experiment_result>();
    result->value = run_experiment(name, config ? config->value : empty, std::filesystem::path(out_dir));
    nlohmann::json j;
    j["experiment"] = result->value.experiment;
    j["results"] = result->value.summary;
    nlohmann::json gates = nlohmann::json::array();
    for (const Gate& g : result->value.gates) {
      gates.push_back({{"name", g.name}, {"passed", g.passed}, {"detail", g.detail}});
    }
    j["gates"] = gates;
    j["files"] = result->value.files;
    result->summary_json = j.dump(2);
    gates_ok = result->value.gates_passed();
    *out = result.release();
  });
  if (st != RS_OK) return st;
  if (check && !gates_ok) {
    g_last_error = "one or more acceptance gates failed";
    return RS_ERR_GATE;
  }
  return RS_OK;
}

const char* rs_experiment_result_summary_json(const rs_experiment_result* result) {
  return result ? result->summary_json.c_str() : "";
}

int rs_experiment_result_gate_count(const rs_experiment_result* result) {
  return result ? static_cast<int>(result->value.gates.size()) : 0;
}

rs_status rs_experiment_result_gate(const rs_experiment_result* result, int index, const char** name, int* passed,
                                    const char** detail) {
  return guarded([&] {
    need(result, "result");
    require(index >= 0 && index < static_cast<int>(result->value.gates.size()), ErrorCode::kInvalidArgument,
            "gate index out of range");
    const Gate& g = result->value.gates[static_cast<std::size_t>(index)];
    if (name) *name = g.name.c_str();
    if (passed) *passed = g.passed ? 1 : 0;
    if (detail) *detail = g.detail.c_str();
  });
}

int rs_experiment_result_passed(const rs_experiment_result* result) {
  return result && result->value.gates_passed() ? 1 : 0;
}

void rs_experiment_result_free(rs_experiment_result* result) { delete result; }

}  // extern "C"
