#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "reluspec/network.hpp"
#include "reluspec/sphere.hpp"

namespace reluspec {

enum class FeatureMode { kAuto, kDense, kImplicit };

/// The dn x m matrix D whose column l stacks v_k sigma'(w_k . x_l) x_l over
/// units k. In implicit mode only the activation pattern is kept and D is
/// never formed; G_n and D r are computed from the pattern directly.
class ExtendedFeatureMatrix {
 public:
  /// kAuto materializes D when d*n*m doubles fit the memory budget.
  static ExtendedFeatureMatrix build(const ReluNetwork& net, const PointSet& x, double subgradient_c = 0.0,
                                     FeatureMode mode = FeatureMode::kAuto);

  int dim() const { return d_; }
  int units() const { return n_; }
  int samples() const { return m_; }
  bool materialized() const { return dense_.size() > 0; }

  /// Dense D; raises kMemory in implicit mode.
  const Eigen::MatrixXd& dense() const;

  /// D r as an n x d matrix (row k is block k); valid in both modes.
  RowMatrix apply(const Eigen::VectorXd& r) const;

  /// G_n = D^T D / n from the activation pattern: (S^T S / n) o (X X^T).
  Eigen::MatrixXd gram() const;

  /// D^T D / n from the dense matrix; raises kMemory in implicit mode.
  Eigen::MatrixXd gram_from_dense() const;

 private:
  int d_ = 0, n_ = 0, m_ = 0;
  Eigen::MatrixXd dense_;
  Eigen::MatrixXd pattern_;  // n x m, sigma'(w_k . x_l)
  Eigen::VectorXd signs_;
  RowMatrix x_;
};

/// r = (f(x_l) - y_l) / m.
Eigen::VectorXd residual(const ReluNetwork& net, const Dataset& data);

/// Smallest eigenvalue of a symmetric matrix.
double smallest_eigenvalue(const Eigen::MatrixXd& sym);

/// Eigenvalues of a symmetric matrix in decreasing order.
Eigen::VectorXd eigenvalues_descending(const Eigen::MatrixXd& sym);

/// s_m(D) = sqrt(n lambda_m(G_n)), with lambda_m clipped at 0.
double min_singular_value(const ExtendedFeatureMatrix& features);

/// The m-th singular value of the dense D from an SVD; used to cross-check
/// the Gram path.
double min_singular_value_svd(const ExtendedFeatureMatrix& features);

struct ResidualBound {
  double lhs = 0.0;  // ||r||
  double rhs = 0.0;  // ||dL/dW|| / s_m(D)
  double s_m = 0.0;
  bool vacuous = false;  // s_m <= 1e-12
  bool holds = false;
};

/// ||r|| <= ||dL/dW|| / s_m(D), with 1e-9 relative slack.
ResidualBound residual_bound_check(const ReluNetwork& net, const Dataset& data, double subgradient_c = 0.0);

/// G(i, j) = g(x_i, x_j) for the ReLU activation kernel.
Eigen::MatrixXd kernel_gram_G(const PointSet& x);

/// G_n(i, j) = (1/n) sum_k sigma'(w_k . x_i) sigma'(w_k . x_j) <x_i, x_j>.
Eigen::MatrixXd empirical_gram_Gn(const RowMatrix& weights, const PointSet& x, double subgradient_c = 0.0);

/// Spectral norm of the symmetric difference a - b.
double spectral_gap(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct RhoTerms {
  /// (log d/sqrt d) sqrt(Linf L2) m (4/m log(1/delta))^{1/4}
  /// (log d/sqrt d) m Linf sqrt(4/(3m) log(1/delta))
  /// (log d/sqrt d) m L2
  /// Linf
  std::array<double, 4> terms{};
  double total = 0.0;
};

/// The four summands of rho(W) with L2 = sqrt of the closed-form L2^2.
RhoTerms rho_terms(double l2, double linf, int m, int d, double delta);
RhoTerms rho_diagnostic(const PointSet& w, int m, double delta, RngSeed seed);

/// gamma_m, the m-th largest eigenvalue (1-based) of the ReLU activation
/// kernel at dimension d, raising the maximum order until m positive entries
/// are available.
double relu_gamma_m(int d, int m);

struct Lemma3Diagnostic {
  double gamma_m = 0.0;
  std::vector<double> ratios;           // lambda_m(G) / (m gamma_m), one per trial
  std::vector<double> min_eigenvalues;  // lambda_m(G), one per trial
  std::array<double, 5> quantiles{};    // ratio at 0, 0.05, 0.5, 0.95, 1
  double fraction_above_half = 0.0;
};

Lemma3Diagnostic lemma3_diagnostic(int d, int m, int trials, RngSeed seed);

struct MatchingResult {
  int d = 0;
  int m = 0;
  std::uint64_t samples = 0;
  double lambda_min_uniform = 0.0;
  double lambda_min_matching = 0.0;
};

/// Inputs uniform on the positive orthant; the Gram entries average
/// sigma'(w . x_i) sigma'(w . x_j) <x_i, x_j> over `samples` weights drawn
/// uniformly on the sphere and uniformly on its orthant complement. Both
/// samplers share their underlying draws chunk by chunk.
MatchingResult matching_distribution_experiment(int d, int m, std::uint64_t samples, RngSeed seed);

struct SpectralReport {
  double s_m = 0.0;
  double lambda_m_Gn = 0.0;
  double lambda_m_G = 0.0;
  double gap_norm = 0.0;
  double gamma_m = 0.0;
  RhoTerms rho;
  bool weyl_holds = false;
};

/// Full spectral diagnostics of a network on inputs x. `gamma_m` comes from
/// the kernel spectrum at the same d; pass NaN to skip.
SpectralReport spectral_report(const ReluNetwork& net, const PointSet& x, double gamma_m, double delta,
                               RngSeed seed, double subgradient_c = 0.0);

}  // namespace reluspec
