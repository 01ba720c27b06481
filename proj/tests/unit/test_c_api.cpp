#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "reluspec/reluspec.h"

namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path d = fs::temp_directory_path() / "reluspec_capi";
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(CApi, VersionAndStatusStrings) {
  EXPECT_GT(std::strlen(rs_version()), 0u);
  EXPECT_STREQ(rs_status_string(RS_OK), "ok");
  EXPECT_GT(std::strlen(rs_status_string(RS_ERR_GATE)), 0u);
}

TEST(CApi, PointSetLifecycle) {
  rs_pointset* p = nullptr;
  ASSERT_EQ(rs_pointset_sample_uniform(5, 10, 1, 0, &p), RS_OK);
  EXPECT_EQ(rs_pointset_dim(p), 5);
  EXPECT_EQ(rs_pointset_count(p), 10);
  std::vector<double> rows(50);
  ASSERT_EQ(rs_pointset_copy_rows(p, rows.data(), rows.size()), RS_OK);
  for (int i = 0; i < 10; ++i) {
    double n2 = 0;
    for (int j = 0; j < 5; ++j) n2 += rows[i * 5 + j] * rows[i * 5 + j];
    EXPECT_NEAR(n2, 1.0, 1e-14);
  }
  EXPECT_EQ(rs_pointset_copy_rows(p, rows.data(), 49), RS_ERR_INVALID_ARGUMENT);

  const std::string path = (temp_dir() / "p.csv").string();
  ASSERT_EQ(rs_pointset_write_csv(p, path.c_str()), RS_OK);
  rs_pointset* q = nullptr;
  ASSERT_EQ(rs_pointset_read_csv(path.c_str(), &q), RS_OK);
  std::vector<double> back(50);
  ASSERT_EQ(rs_pointset_copy_rows(q, back.data(), back.size()), RS_OK);
  EXPECT_EQ(rows, back);
  rs_pointset_free(p);
  rs_pointset_free(q);
  rs_pointset_free(nullptr);
}

TEST(CApi, ErrorsSetStatusAndMessage) {
  rs_pointset* p = nullptr;
  EXPECT_EQ(rs_pointset_sample_uniform(1, 10, 1, 0, &p), RS_ERR_DIMENSION);
  EXPECT_EQ(p, nullptr);
  EXPECT_GT(std::strlen(rs_last_error()), 0u);
  const double zero[4] = {0, 0, 1, 0};
  EXPECT_EQ(rs_pointset_from_rows(zero, 2, 2, 1, &p), RS_ERR_DEGENERATE_WEIGHT);
  EXPECT_EQ(rs_pointset_from_rows(zero, 2, 2, 0, &p), RS_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(rs_pointset_read_csv("/nonexistent/points.csv", &p), RS_ERR_IO);
  EXPECT_EQ(rs_pointset_sample_uniform(3, 3, 1, 0, nullptr), RS_ERR_INVALID_ARGUMENT);
  double v = 0;
  EXPECT_EQ(rs_arccos_j(9, 0.1, &v), RS_ERR_UNSUPPORTED_ORDER);
  // A successful call clears the message.
  EXPECT_EQ(rs_arccos_j(0, 0.5, &v), RS_OK);
  EXPECT_STREQ(rs_last_error(), "");
}

TEST(CApi, KernelFunctions) {
  EXPECT_DOUBLE_EQ(rs_slice_kernel(0.0), 0.25);
  EXPECT_DOUBLE_EQ(rs_relu_kernel(1.0), 0.5);
  double j = 0;
  ASSERT_EQ(rs_arccos_j(0, 1.0, &j), RS_OK);
  EXPECT_NEAR(j, M_PI - 1.0, 1e-15);
  double raw = 0, der = 0;
  ASSERT_EQ(rs_rectified_poly_kernel(2, 0.3, &raw, &der), RS_OK);
  EXPECT_NEAR(der, 4 * raw, 1e-15);
  double leg = 0;
  ASSERT_EQ(rs_legendre_poly(3, 2, 0.5, &leg), RS_OK);
  EXPECT_NEAR(leg, 0.5 * (3 * 0.25 - 1), 1e-15);
  char buf[64];
  ASSERT_EQ(rs_harmonic_multiplicity(1500, 3, buf, sizeof buf), RS_OK);
  // C(1502, 1499) - C(1500, 1499) = 563625500 - 1500
  EXPECT_STREQ(buf, "563624000");
  EXPECT_EQ(rs_harmonic_multiplicity(1500, 3, buf, 3), RS_ERR_INVALID_ARGUMENT);
}

TEST(CApi, GramAndSpectrum) {
  rs_pointset* p = nullptr;
  ASSERT_EQ(rs_pointset_sample_uniform(4, 6, 2, 0, &p), RS_OK);
  std::vector<double> g(36);
  ASSERT_EQ(rs_gram_matrix(p, "relu-g", g.data(), g.size()), RS_OK);
  for (int i = 0; i < 6; ++i) {
    EXPECT_DOUBLE_EQ(g[i * 6 + i], 0.5);
    for (int k = 0; k < 6; ++k) EXPECT_EQ(g[i * 6 + k], g[k * 6 + i]);
  }
  EXPECT_EQ(rs_gram_matrix(p, "nope", g.data(), g.size()), RS_ERR_CONFIG);
  rs_pointset_free(p);

  rs_spectrum* s = nullptr;
  ASSERT_EQ(rs_kernel_spectrum("relu-g", 15, 6, 1000, &s), RS_OK);
  EXPECT_EQ(rs_spectrum_max_order(s), 6);
  double gamma = 0, mult = 0;
  ASSERT_EQ(rs_spectrum_order(s, 4, &gamma, &mult), RS_OK);
  EXPECT_NEAR(gamma, 9.1255e-6, 1e-9);
  EXPECT_EQ(mult, 2940.0);
  EXPECT_EQ(rs_spectrum_order(s, 7, &gamma, &mult), RS_ERR_INVALID_ARGUMENT);
  const std::size_t len = rs_spectrum_expanded_length(s);
  EXPECT_EQ(len, 1000u);
  std::vector<double> ex(len);
  ASSERT_EQ(rs_spectrum_expanded(s, ex.data(), ex.size()), RS_OK);
  for (std::size_t i = 1; i < len; ++i) EXPECT_GE(ex[i - 1], ex[i]);
  double beta = 0;
  ASSERT_EQ(rs_decay_exponent(s, 10, 1000, &beta), RS_OK);
  EXPECT_GT(beta, 0.0);
  rs_spectrum_free(s);
}

TEST(CApi, DiscrepancyFunctions) {
  rs_pointset* w = nullptr;
  ASSERT_EQ(rs_pointset_sample_uniform(5, 20, 3, 0, &w), RS_OK);
  double ek2 = 0, closed = 0, mc = 0, se = 0, linf = 0;
  ASSERT_EQ(rs_expected_k_squared(5, &ek2), RS_OK);
  ASSERT_EQ(rs_l2_discrepancy_closed(w, &closed), RS_OK);
  ASSERT_EQ(rs_l2_discrepancy_mc(w, 100000, 3, 1, &mc, &se), RS_OK);
  EXPECT_NEAR(closed, mc, 4 * se + 1e-12);
  ASSERT_EQ(rs_linf_discrepancy_estimate(w, 5000, 3, &linf), RS_OK);
  EXPECT_GE(linf, std::sqrt(closed));
  int member = -1;
  double ratio = 0;
  ASSERT_EQ(rs_gcal_membership(w, 10.0, 0.05, &member, &ratio), RS_OK);
  EXPECT_EQ(member, ratio <= 1.0 ? 1 : 0);
  rs_pointset_free(w);

  const double raw[6] = {1, 0, 0, 0, 2, 0};
  double r = 0;
  double grad[6];
  ASSERT_EQ(rs_diversity_regularizer(raw, 2, 3, &r, grad), RS_OK);
  // Orthogonal pair: k = 1/4, so R = 1/16.
  EXPECT_NEAR(r, 1.0 / 16, 1e-15);
  ASSERT_EQ(rs_diversity_regularizer(raw, 2, 3, &r, nullptr), RS_OK);
}

TEST(CApi, NetworkTrainingAndCheckpoint) {
  const int n = 4, d = 3;
  const double signs[n] = {1, -1, 1, -1};
  const double w[n * d] = {1, 0, 0, 0, 1, 0, 0, 0, 1, 0.5, 0.5, 0.5};
  rs_network* net = nullptr;
  ASSERT_EQ(rs_network_create(signs, w, n, d, &net), RS_OK);
  EXPECT_EQ(rs_network_units(net), n);
  EXPECT_EQ(rs_network_dim(net), d);
  const double x[3] = {1, 0, 0};
  double f = 0;
  ASSERT_EQ(rs_network_forward(net, x, 3, &f), RS_OK);
  EXPECT_DOUBLE_EQ(f, 1.0 - 0.5);
  EXPECT_EQ(rs_network_forward(net, x, 2, &f), RS_ERR_DIMENSION);

  rs_pointset* xs = nullptr;
  ASSERT_EQ(rs_pointset_sample_uniform(d, 64, 4, 0, &xs), RS_OK);
  std::vector<double> y(64, 0.1);
  rs_dataset* data = nullptr;
  ASSERT_EQ(rs_dataset_create(xs, y.data(), 1.0, &data), RS_OK);
  EXPECT_EQ(rs_dataset_size(data), 64);
  double before = 0, after = 0, norm = 0;
  ASSERT_EQ(rs_network_loss(net, data, &before), RS_OK);
  std::vector<double> g(n * d);
  ASSERT_EQ(rs_network_gradient(net, data, 0.0, g.data(), g.size(), &norm), RS_OK);
  EXPECT_GT(norm, 0.0);

  rs_train_config cfg;
  rs_train_config_default(&cfg);
  cfg.iterations = 200;
  cfg.batch_size = 64;
  cfg.learning_rate = 0.1;
  ASSERT_EQ(rs_network_train(net, data, &cfg, &after), RS_OK);
  EXPECT_LT(after, before);

  double lhs = 0, rhs = 0;
  int holds = 0;
  ASSERT_EQ(rs_residual_bound_check(net, data, 0.0, &lhs, &rhs, &holds), RS_OK);
  EXPECT_EQ(holds, 1);
  double sm = 0;
  ASSERT_EQ(rs_min_singular_value(net, xs, 0.0, &sm), RS_OK);

  const std::string path = (temp_dir() / "net.ckpt").string();
  ASSERT_EQ(rs_network_write_checkpoint(net, path.c_str()), RS_OK);
  rs_network* back = nullptr;
  ASSERT_EQ(rs_network_read_checkpoint(path.c_str(), &back), RS_OK);
  std::vector<double> w1(n * d), w2(n * d);
  ASSERT_EQ(rs_network_copy_weights(net, w1.data(), w1.size()), RS_OK);
  ASSERT_EQ(rs_network_copy_weights(back, w2.data(), w2.size()), RS_OK);
  EXPECT_EQ(w1, w2);

  {
    std::FILE* fp = std::fopen(path.c_str(), "r+b");
    ASSERT_NE(fp, nullptr);
    std::fputs("garbage", fp);
    std::fclose(fp);
  }
  rs_network* broken = nullptr;
  EXPECT_EQ(rs_network_read_checkpoint(path.c_str(), &broken), RS_ERR_PARSE);
  EXPECT_EQ(broken, nullptr);

  double bound = 0;
  ASSERT_EQ(rs_generalization_bound(1.0, 2.0, 100, 0.05, &bound), RS_OK);
  EXPECT_GT(bound, 0.0);

  rs_network_free(net);
  rs_network_free(back);
  rs_dataset_free(data);
  rs_pointset_free(xs);
}

TEST(CApi, MatchingDistribution) {
  double u = 0, m = 0;
  ASSERT_EQ(rs_matching_distribution(4, 30, 4000, 7, &u, &m), RS_OK);
  EXPECT_GT(u, 0.0);
  EXPECT_GT(m, 0.0);
}

TEST(CApi, ExperimentsRunThroughConfig) {
  ASSERT_GE(rs_experiment_count(), 7);
  bool found = false;
  for (int i = 0; i < rs_experiment_count(); ++i) found |= std::string(rs_experiment_name(i)) == "spectrum";
  EXPECT_TRUE(found);
  EXPECT_EQ(rs_experiment_name(-1), nullptr);

  rs_config* cfg = nullptr;
  ASSERT_EQ(rs_config_create(&cfg), RS_OK);
  ASSERT_EQ(rs_config_set(cfg, "d", "20"), RS_OK);
  ASSERT_EQ(rs_config_set(cfg, "fit_last", "1000"), RS_OK);
  ASSERT_EQ(rs_config_set(cfg, "expanded_cap", "5000"), RS_OK);
  const std::string out = (temp_dir() / "spectrum").string();
  rs_experiment_result* res = nullptr;
  const rs_status st = rs_experiment_run("spectrum", cfg, out.c_str(), 0, &res);
  ASSERT_EQ(st, RS_OK) << rs_last_error();
  ASSERT_NE(res, nullptr);
  EXPECT_NE(std::string(rs_experiment_result_summary_json(res)).find("\"experiment\""), std::string::npos);
  ASSERT_GE(rs_experiment_result_gate_count(res), 1);
  const char* name = nullptr;
  const char* detail = nullptr;
  int passed = -1;
  ASSERT_EQ(rs_experiment_result_gate(res, 0, &name, &passed, &detail), RS_OK);
  EXPECT_STREQ(name, "beta");
  EXPECT_TRUE(fs::exists(fs::path(out) / "manifest.json"));
  EXPECT_TRUE(fs::exists(fs::path(out) / "summary.json"));
  rs_experiment_result_free(res);

  // A gate that cannot pass returns RS_ERR_GATE under check but still yields the result.
  ASSERT_EQ(rs_config_set(cfg, "beta_max", "0.01"), RS_OK);
  res = nullptr;
  EXPECT_EQ(rs_experiment_run("spectrum", cfg, out.c_str(), 1, &res), RS_ERR_GATE);
  ASSERT_NE(res, nullptr);
  EXPECT_EQ(rs_experiment_result_passed(res), 0);
  rs_experiment_result_free(res);

  ASSERT_EQ(rs_config_set(cfg, "bogus_key", "1"), RS_OK);
  res = nullptr;
  EXPECT_EQ(rs_experiment_run("spectrum", cfg, out.c_str(), 0, &res), RS_ERR_CONFIG);
  EXPECT_EQ(rs_experiment_run("no-such-experiment", cfg, out.c_str(), 0, &res), RS_ERR_CONFIG);
  rs_config_free(cfg);
}
