#include "reluspec/spectral.hpp"

#include <algorithm>
#include <cmath>

#include "reluspec/discrepancy.hpp"
#include "reluspec/kernels.hpp"
#include "reluspec/memory.hpp"

namespace reluspec {

ExtendedFeatureMatrix ExtendedFeatureMatrix::build(const ReluNetwork& net, const PointSet& x, double c,
                                                   FeatureMode mode) {
  require(x.dim() == net.dim(), ErrorCode::kDimension, "input dimension does not match the network");
  ExtendedFeatureMatrix f;
  f.d_ = net.dim();
  f.n_ = net.units();
  f.m_ = x.count();
  const auto m = static_cast<std::size_t>(f.m_);
  check_memory(static_cast<std::size_t>(f.n_) * m * sizeof(double) + m * m * sizeof(double),
               "activation pattern and Gram matrix");
  f.signs_ = net.signs();
  f.x_ = x.points();
  const Eigen::MatrixXd z = net.weights() * f.x_.transpose();  // n x m
  f.pattern_ = z.unaryExpr([c](double u) { return relu_subgradient(u, c); });

  const std::size_t dense_bytes = static_cast<std::size_t>(f.d_) * f.n_ * m * sizeof(double);
  bool dense = false;
  switch (mode) {
    case FeatureMode::kDense:
      check_memory(dense_bytes, "extended feature matrix");
      dense = true;
      break;
    case FeatureMode::kAuto:
      dense = dense_bytes <= memory_budget_bytes();
      break;
    case FeatureMode::kImplicit:
      break;
  }
  if (dense) {
    f.dense_.setZero(static_cast<Eigen::Index>(f.d_) * f.n_, f.m_);
    for (int l = 0; l < f.m_; ++l) {
      for (int k = 0; k < f.n_; ++k) {
        const double a = f.signs_[k] * f.pattern_(k, l);
        if (a != 0.0) f.dense_.col(l).segment(static_cast<Eigen::Index>(k) * f.d_, f.d_) = a * f.x_.row(l).transpose();
      }
    }
  }
  return f;
}

const Eigen::MatrixXd& ExtendedFeatureMatrix::dense() const {
  require(materialized(), ErrorCode::kMemory, "extended feature matrix was built in implicit mode");
  return dense_;
}

RowMatrix ExtendedFeatureMatrix::apply(const Eigen::VectorXd& r) const {
  require(r.size() == m_, ErrorCode::kDimension, "residual length must equal m");
  if (materialized()) {
    const Eigen::VectorXd flat = dense_ * r;
    return Eigen::Map<const RowMatrix>(flat.data(), n_, d_);
  }
  // Block k is v_k sum_l sigma'_{kl} r_l x_l.
  RowMatrix out = (pattern_ * r.asDiagonal()) * x_;
  return signs_.asDiagonal() * out;
}

Eigen::MatrixXd ExtendedFeatureMatrix::gram() const {
  Eigen::MatrixXd counts(m_, m_);
  counts.setZero();
  counts.selfadjointView<Eigen::Lower>().rankUpdate(pattern_.transpose(), 1.0 / n_);
  Eigen::MatrixXd inner(m_, m_);
  inner.setZero();
  inner.selfadjointView<Eigen::Lower>().rankUpdate(Eigen::MatrixXd(x_));
  Eigen::MatrixXd g = counts.cwiseProduct(inner);
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

Eigen::MatrixXd ExtendedFeatureMatrix::gram_from_dense() const {
  const Eigen::MatrixXd& dm = dense();
  Eigen::MatrixXd g(m_, m_);
  g.setZero();
  g.selfadjointView<Eigen::Lower>().rankUpdate(dm.transpose(), 1.0 / n_);
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

Eigen::VectorXd residual(const ReluNetwork& net, const Dataset& data) {
  return (forward_batch(net, data.x.points()) - data.y) / static_cast<double>(data.size());
}

double smallest_eigenvalue(const Eigen::MatrixXd& sym) {
  require(sym.rows() == sym.cols() && sym.rows() > 0, ErrorCode::kDimension, "matrix must be square and nonempty");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  require(es.info() == Eigen::Success, ErrorCode::kNumeric, "symmetric eigensolver failed");
  return es.eigenvalues()[0];
}

Eigen::VectorXd eigenvalues_descending(const Eigen::MatrixXd& sym) {
  require(sym.rows() == sym.cols() && sym.rows() > 0, ErrorCode::kDimension, "matrix must be square and nonempty");
  check_memory(static_cast<std::size_t>(sym.size()) * sizeof(double), "eigensolver workspace");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  require(es.info() == Eigen::Success, ErrorCode::kNumeric, "symmetric eigensolver failed");
  return es.eigenvalues().reverse();
}

double min_singular_value(const ExtendedFeatureMatrix& features) {
  const double lambda = smallest_eigenvalue(features.gram());
  return std::sqrt(std::max(0.0, features.units() * lambda));
}

double min_singular_value_svd(const ExtendedFeatureMatrix& features) {
  const Eigen::MatrixXd& dm = features.dense();
  require(dm.rows() >= dm.cols(), ErrorCode::kDimension, "SVD path needs dn >= m");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(dm);
  return svd.singularValues()[dm.cols() - 1];
}

ResidualBound residual_bound_check(const ReluNetwork& net, const Dataset& data, double c) {
  ResidualBound b;
  b.lhs = residual(net, data).norm();
  const double grad_norm = gradient(net, data, c).norm;
  b.s_m = min_singular_value(ExtendedFeatureMatrix::build(net, data.x, c, FeatureMode::kImplicit));
  if (b.s_m <= 1e-12) {
    b.vacuous = true;
    b.rhs = std::numeric_limits<double>::infinity();
    b.holds = true;
    return b;
  }
  b.rhs = grad_norm / b.s_m;
  b.holds = b.lhs <= b.rhs * (1.0 + 1e-9) + 1e-300;
  return b;
}

Eigen::MatrixXd kernel_gram_G(const PointSet& x) { return gram_matrix(x, DotProductKernel::relu_g()); }

Eigen::MatrixXd empirical_gram_Gn(const RowMatrix& weights, const PointSet& x, double c) {
  // v drops out of G_n, so any signs will do.
  const ReluNetwork net(Eigen::VectorXd::Ones(weights.rows()), weights);
  return ExtendedFeatureMatrix::build(net, x, c, FeatureMode::kImplicit).gram();
}

double spectral_gap(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::kDimension, "matrices must have the same shape");
  const Eigen::VectorXd ev = eigenvalues_descending(a - b);
  return std::max(std::abs(ev[0]), std::abs(ev[ev.size() - 1]));
}

RhoTerms rho_terms(double l2, double linf, int m, int d, double delta) {
  require(m >= 1 && d >= 2, ErrorCode::kDimension, "m >= 1 and d >= 2 required");
  require(delta > 0.0 && delta < 1.0, ErrorCode::kInvalidArgument, "delta must lie in (0, 1)");
  const double a = std::log(double(d)) / std::sqrt(double(d));
  const double md = m, lg = std::log(1.0 / delta);
  RhoTerms r;
  r.terms[0] = a * std::sqrt(linf * l2) * md * std::pow(4.0 / md * lg, 0.25);
  r.terms[1] = a * md * linf * std::sqrt(4.0 / (3.0 * md) * lg);
  r.terms[2] = a * md * l2;
  r.terms[3] = linf;
  r.total = r.terms[0] + r.terms[1] + r.terms[2] + r.terms[3];
  return r;
}

RhoTerms rho_diagnostic(const PointSet& w, int m, double delta, RngSeed seed) {
  const double l2 = std::sqrt(l2_discrepancy_closed(w));
  const double linf = linf_discrepancy_estimate(w, seed);
  return rho_terms(l2, linf, m, w.dim(), delta);
}

double relu_gamma_m(int d, int m) {
  require(d >= 3 && m >= 1, ErrorCode::kDimension, "gamma_m needs d >= 3 and m >= 1");
  SpectrumConfig cfg;
  cfg.expanded_cap = static_cast<std::size_t>(m) + 1;
  for (cfg.max_order = 8;; cfg.max_order *= 2) {
    const KernelSpectrum s = kernel_spectrum(DotProductKernel::relu_g(), d, cfg);
    if (s.expanded.size() >= static_cast<std::size_t>(m) && s.expanded[static_cast<std::size_t>(m) - 1] > 0.0) {
      return s.expanded[static_cast<std::size_t>(m) - 1];
    }
    require(cfg.max_order < 512, ErrorCode::kPrecision, "could not resolve gamma_m within 512 harmonic orders");
  }
}

Lemma3Diagnostic lemma3_diagnostic(int d, int m, int trials, RngSeed seed) {
  require(trials >= 1, ErrorCode::kInvalidArgument, "trials must be >= 1");
  Lemma3Diagnostic out;
  out.gamma_m = relu_gamma_m(d, m);
  for (int t = 0; t < trials; ++t) {
    const PointSet x = sample_uniform_sphere(d, m, seed.with_stream(seed.stream + static_cast<std::uint64_t>(t)));
    const double lambda = smallest_eigenvalue(kernel_gram_G(x));
    out.min_eigenvalues.push_back(lambda);
    out.ratios.push_back(lambda / (m * out.gamma_m));
  }
  std::vector<double> sorted = out.ratios;
  std::sort(sorted.begin(), sorted.end());
  const double probs[5] = {0.0, 0.05, 0.5, 0.95, 1.0};
  for (int i = 0; i < 5; ++i) {
    const auto idx = static_cast<std::size_t>(std::lround(probs[i] * double(sorted.size() - 1)));
    out.quantiles[static_cast<std::size_t>(i)] = sorted[idx];
  }
  out.fraction_above_half =
      double(std::count_if(sorted.begin(), sorted.end(), [](double r) { return r >= 0.5; })) / double(sorted.size());
  return out;
}

namespace {

// Adds sum over the rows w of 1[w . x_i > 0] 1[w . x_j > 0] into the lower
// triangle of `counts`.
void accumulate_patterns(const RowMatrix& w, const Eigen::MatrixXf& xt, Eigen::MatrixXf& counts) {
  if (w.rows() == 0) return;
  const Eigen::MatrixXf z = w.cast<float>() * xt;  // B x m
  const Eigen::MatrixXf s = (z.array() > 0.0f).cast<float>();
  counts.selfadjointView<Eigen::Lower>().rankUpdate(s.transpose());
}

double min_eig_from_counts(Eigen::MatrixXf& counts, double total, const Eigen::MatrixXd& inner) {
  Eigen::MatrixXd g = counts.cast<double>() / total;
  g = g.cwiseProduct(inner);
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return smallest_eigenvalue(g);
}

}  // namespace

MatchingResult matching_distribution_experiment(int d, int m, std::uint64_t samples, RngSeed seed) {
  require(d >= 2 && m >= 1 && samples >= 1, ErrorCode::kDimension, "need d >= 2, m >= 1 and samples >= 1");
  const auto mm = static_cast<std::size_t>(m);
  check_memory(mm * mm * (2 * sizeof(float) + 2 * sizeof(double)), "matching-distribution Gram accumulators");
  constexpr std::uint64_t kChunk = 4096;

  const PointSet x = sample_positive_orthant(d, m, seed.with_stream(0));
  const Eigen::MatrixXf xt = x.points().transpose().cast<float>();
  Eigen::MatrixXd inner = x.points() * x.points().transpose();

  Eigen::MatrixXf uniform_counts = Eigen::MatrixXf::Zero(m, m);
  Eigen::MatrixXf matching_counts = Eigen::MatrixXf::Zero(m, m);
  std::uint64_t chunk = 0;
  for (std::uint64_t done = 0; done < samples; done += kChunk, ++chunk) {
    const int b = static_cast<int>(std::min(kChunk, samples - done));
    const RngSeed key = seed.with_stream(1 + chunk);
    accumulate_patterns(sample_uniform_sphere(d, b, key).points(), xt, uniform_counts);
    accumulate_patterns(sample_orthant_complement(d, b, key).points(), xt, matching_counts);
  }

  MatchingResult r;
  r.d = d;
  r.m = m;
  r.samples = samples;
  r.lambda_min_uniform = min_eig_from_counts(uniform_counts, double(samples), inner);
  r.lambda_min_matching = min_eig_from_counts(matching_counts, double(samples), inner);
  return r;
}

SpectralReport spectral_report(const ReluNetwork& net, const PointSet& x, double gamma_m, double delta, RngSeed seed,
                               double c) {
  SpectralReport r;
  const ExtendedFeatureMatrix features = ExtendedFeatureMatrix::build(net, x, c, FeatureMode::kImplicit);
  const Eigen::MatrixXd gn = features.gram();
  const Eigen::MatrixXd g = kernel_gram_G(x);
  r.lambda_m_Gn = smallest_eigenvalue(gn);
  r.s_m = std::sqrt(std::max(0.0, net.units() * r.lambda_m_Gn));
  r.lambda_m_G = smallest_eigenvalue(g);
  r.gap_norm = spectral_gap(g, gn);
  r.gamma_m = gamma_m;
  r.weyl_holds = std::abs(r.lambda_m_G - r.lambda_m_Gn) <= r.gap_norm + 1e-9;
  r.rho = rho_diagnostic(normalize(net.weights()), x.count(), delta, seed);
  return r;
}

}  // namespace reluspec
