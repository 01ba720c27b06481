#include <gtest/gtest.h>

#include <cmath>

#include "reluspec/error.hpp"
#include "reluspec/kernels.hpp"
#include "reluspec/memory.hpp"
#include "reluspec/spectral.hpp"

using namespace reluspec;

namespace {

ReluNetwork uniform_net(int n, int d, std::uint64_t seed) {
  return ReluNetwork(random_signs(n, {seed, 1}), sample_uniform_sphere(d, n, {seed, 0}).points());
}

Dataset labelled(int d, int m, std::uint64_t seed) {
  const ReluNetwork teacher = uniform_net(5, d, seed + 1000);
  PointSet x = sample_uniform_sphere(d, m, {seed, 2});
  Eigen::VectorXd y = forward_batch(teacher, x.points());
  return Dataset::make(std::move(x), std::move(y), teacher.weight_budget());
}

}  // namespace

TEST(Spectral, DenseAndImplicitAgree) {
  const ReluNetwork net = uniform_net(12, 5, 80);
  const PointSet x = sample_uniform_sphere(5, 30, {80, 3});
  const auto dense = ExtendedFeatureMatrix::build(net, x, 0.0, FeatureMode::kDense);
  const auto implicit = ExtendedFeatureMatrix::build(net, x, 0.0, FeatureMode::kImplicit);
  ASSERT_TRUE(dense.materialized());
  ASSERT_FALSE(implicit.materialized());
  EXPECT_EQ(dense.dense().rows(), 12 * 5);
  EXPECT_EQ(dense.dense().cols(), 30);
  const Eigen::VectorXd r = Eigen::VectorXd::LinSpaced(30, -1, 2);
  EXPECT_LE((dense.apply(r) - implicit.apply(r)).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LE((dense.gram_from_dense() - implicit.gram()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((dense.gram() - dense.gram_from_dense()).cwiseAbs().maxCoeff(), 1e-12);
  try {
    implicit.dense();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMemory);
  }
}

TEST(Spectral, AutoModeRespectsMemoryBudget) {
  const ReluNetwork net = uniform_net(10, 4, 81);
  const PointSet x = sample_uniform_sphere(4, 20, {81, 3});
  set_memory_budget_override(6000);
  const auto small = ExtendedFeatureMatrix::build(net, x);
  set_memory_budget_override(0);
  const auto big = ExtendedFeatureMatrix::build(net, x);
  EXPECT_FALSE(small.materialized());
  EXPECT_TRUE(big.materialized());
  set_memory_budget_override(6000);
  EXPECT_THROW(ExtendedFeatureMatrix::build(net, x, 0.0, FeatureMode::kDense), Error);
  set_memory_budget_override(0);
}

TEST(Spectral, GradientIsFeatureMatrixTimesResidual) {
  const Dataset data = labelled(6, 40, 82);
  const ReluNetwork net = uniform_net(9, 6, 83);
  const auto f = ExtendedFeatureMatrix::build(net, data.x);
  const RowMatrix viaD = f.apply(residual(net, data));
  EXPECT_LE((viaD - gradient(net, data).grad).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Spectral, MinSingularValueTwoWays) {
  const ReluNetwork net = uniform_net(30, 5, 84);
  const PointSet x = sample_uniform_sphere(5, 25, {84, 3});
  const auto f = ExtendedFeatureMatrix::build(net, x, 0.0, FeatureMode::kDense);
  const double a = min_singular_value(f), b = min_singular_value_svd(f);
  EXPECT_GT(a, 0.0);
  EXPECT_NEAR(a, b, 1e-8 * b);
}

TEST(Spectral, ResidualBoundHoldsOnRandomNetworks) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Dataset data = labelled(5, 20, 85 + s);
    const ReluNetwork net = uniform_net(40, 5, 200 + s);
    const ResidualBound b = residual_bound_check(net, data);
    EXPECT_TRUE(b.holds) << "seed " << s << ": " << b.lhs << " > " << b.rhs;
    if (!b.vacuous) {
      EXPECT_NEAR(b.rhs, gradient(net, data).norm / b.s_m, 1e-15 * b.rhs);
    }
  }
}

TEST(Spectral, ResidualBoundIsVacuousWhenFeaturesCollapse) {
  // Every unit is inactive on every input, so D = 0.
  const Dataset data = labelled(4, 6, 86);
  RowMatrix w = RowMatrix::Zero(3, 4);
  w.col(0).setConstant(1.0);
  const PointSet x = normalize(RowMatrix::Constant(6, 4, -1.0));
  const Dataset neg = Dataset::make(x, Eigen::VectorXd::Constant(6, 0.5), 1.0);
  const ReluNetwork net(Eigen::VectorXd::Ones(3), w);
  const ResidualBound b = residual_bound_check(net, neg);
  EXPECT_TRUE(b.vacuous);
  EXPECT_TRUE(std::isinf(b.rhs));
  (void)data;
}

TEST(Spectral, KernelGramIsReluG) {
  const PointSet x = sample_uniform_sphere(7, 15, {87, 0});
  EXPECT_EQ(kernel_gram_G(x), gram_matrix(x, DotProductKernel::relu_g()));
}

TEST(Spectral, EmpiricalGramConvergesToKernelGram) {
  const PointSet x = sample_uniform_sphere(6, 12, {88, 0});
  const Eigen::MatrixXd g = kernel_gram_G(x);
  double prev = 1e9;
  for (int n : {50, 800, 12800}) {
    const Eigen::MatrixXd gn = empirical_gram_Gn(sample_uniform_sphere(6, n, {88, std::uint64_t(n)}).points(), x);
    const double gap = spectral_gap(gn, g);
    EXPECT_LT(gap, prev) << n;
    prev = gap;
    // Weyl: eigenvalues move by at most the operator-norm gap.
    EXPECT_LE(std::abs(smallest_eigenvalue(gn) - smallest_eigenvalue(g)), gap + 1e-12);
  }
  EXPECT_LT(prev, 0.05);
}

TEST(Spectral, EmpiricalGramMatchesFeatureGramOverN) {
  const ReluNetwork net = uniform_net(25, 5, 89);
  const PointSet x = sample_uniform_sphere(5, 10, {89, 3});
  const Eigen::MatrixXd gn = empirical_gram_Gn(net.weights(), x);
  const Eigen::MatrixXd viaD = ExtendedFeatureMatrix::build(net, x).gram();
  EXPECT_LE((gn - viaD).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Spectral, EigenvaluesDescendingAreSorted) {
  const Eigen::MatrixXd g = kernel_gram_G(sample_uniform_sphere(4, 30, {90, 0}));
  const Eigen::VectorXd ev = eigenvalues_descending(g);
  for (int i = 1; i < ev.size(); ++i) EXPECT_GE(ev[i - 1], ev[i]);
  EXPECT_DOUBLE_EQ(ev[ev.size() - 1], smallest_eigenvalue(g));
}

TEST(Spectral, RhoTermsFormulaAndScaling) {
  const double l2 = 0.01, linf = 0.2, delta = 0.05;
  const int d = 50;
  const RhoTerms r = rho_terms(l2, linf, 100, d, delta);
  const double a = std::log(50.0) / std::sqrt(50.0), lg = std::log(20.0);
  EXPECT_NEAR(r.terms[0], a * std::sqrt(l2 * linf) * 100 * std::pow(0.04 * lg, 0.25), 1e-14);
  EXPECT_NEAR(r.terms[1], a * 100 * linf * std::sqrt(4.0 / 300 * lg), 1e-14);
  EXPECT_NEAR(r.terms[2], a * 100 * l2, 1e-14);
  EXPECT_EQ(r.terms[3], linf);
  EXPECT_NEAR(r.total, r.terms[0] + r.terms[1] + r.terms[2] + r.terms[3], 1e-15);
  const RhoTerms r16 = rho_terms(l2, linf, 1600, d, delta);
  EXPECT_NEAR(r16.terms[0] / r.terms[0], 8.0, 1e-12);
  EXPECT_NEAR(r16.terms[1] / r.terms[1], 4.0, 1e-12);
  EXPECT_NEAR(r16.terms[2] / r.terms[2], 16.0, 1e-12);
  EXPECT_EQ(r16.terms[3], r.terms[3]);
}

TEST(Spectral, ReluGammaAtRank) {
  // In d = 15 the first 1 + 15 + 119 + 665 + 2940 sorted eigenvalues cover
  // orders 0..4, so rank 1000 falls in the order-4 block.
  const KernelSpectrum spec = kernel_spectrum(DotProductKernel::relu_g(), 15, {.max_order = 8});
  EXPECT_NEAR(relu_gamma_m(15, 1000), spec.orders[4].gamma, 1e-12 * spec.orders[4].gamma);
  EXPECT_NEAR(spec.orders[4].gamma, 9.1255e-6, 1e-9);
  double prev = relu_gamma_m(15, 1);
  for (int m : {2, 10, 100, 1000, 5000}) {
    const double g = relu_gamma_m(15, m);
    EXPECT_GT(g, 0.0);
    EXPECT_LE(g, prev);
    prev = g;
  }
}

TEST(Spectral, Lemma3DiagnosticIsConsistent) {
  const Lemma3Diagnostic diag = lemma3_diagnostic(8, 40, 10, {91, 0});
  ASSERT_EQ(diag.ratios.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i)
    EXPECT_NEAR(diag.ratios[i], diag.min_eigenvalues[i] / (40 * diag.gamma_m), 1e-12 * std::abs(diag.ratios[i]));
  for (int q = 1; q < 5; ++q) EXPECT_LE(diag.quantiles[q - 1], diag.quantiles[q]);
  EXPECT_GE(diag.fraction_above_half, 0.0);
  EXPECT_LE(diag.fraction_above_half, 1.0);
}

TEST(Spectral, MatchingExperimentProducesPositiveEigenvalues) {
  const MatchingResult a = matching_distribution_experiment(4, 60, 8000, {92, 0});
  const MatchingResult b = matching_distribution_experiment(4, 60, 8000, {92, 0});
  EXPECT_GT(a.lambda_min_uniform, 0.0);
  EXPECT_GT(a.lambda_min_matching, 0.0);
  EXPECT_EQ(a.lambda_min_uniform, b.lambda_min_uniform);
  EXPECT_EQ(a.lambda_min_matching, b.lambda_min_matching);
  EXPECT_EQ(a.samples, 8000u);
}

TEST(Spectral, ReportIsConsistentWithParts) {
  const ReluNetwork net = uniform_net(60, 6, 93);
  const PointSet x = sample_uniform_sphere(6, 20, {93, 3});
  const double gm = relu_gamma_m(6, 20);
  const SpectralReport rep = spectral_report(net, x, gm, 0.05, {93, 4});
  EXPECT_NEAR(rep.s_m * rep.s_m / 60.0, rep.lambda_m_Gn, 1e-10 * std::max(1.0, rep.lambda_m_Gn));
  EXPECT_EQ(rep.gamma_m, gm);
  EXPECT_TRUE(rep.weyl_holds);
  EXPECT_LE(std::abs(rep.lambda_m_Gn - rep.lambda_m_G), rep.gap_norm + 1e-12);
}
