#pragma once

#include <cstdint>

#include "reluspec/kernels.hpp"
#include "reluspec/rng.hpp"
#include "reluspec/sphere.hpp"

namespace reluspec {

/// S_xy = {w : w.x >= 0, w.y >= 0}.
struct Slice {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
};

/// Normalized area of S_xy, (1 - angular_distance(x, y)) / 2.
double slice_area(const Slice& s);

/// |W n S| / n - A(S). The boundary w.x = 0 counts as inside.
double slice_discrepancy(const PointSet& w, const Slice& s);

/// E[k(u, v)^2] for u, v uniform on S^{d-1}, k the slice kernel. Cached per d.
double expected_k_squared(int d);

/// Mean of k(w_i, w_j)^2 over all ordered pairs including i == j.
double mean_pair_k_squared(const PointSet& w);

/// Closed form (1/n^2) sum_{i,j} k(w_i, w_j)^2 - E[k^2], clipped at 0 from
/// below. `expectation_term` must come from expected_k_squared(w.dim()).
double l2_discrepancy_closed(const PointSet& w, double expectation_term);
double l2_discrepancy_closed(const PointSet& w);

/// The same quantity written as
/// (1/4n^2) sum (1/2 - d_ij)^2 - (1/4) E[(1/2 - d)^2] + (1/4n^2) sum (1/2 - d_ij)
/// with d the angular distance; algebraically identical to the form above
/// because E[1/2 - d] = 0.
double l2_discrepancy_angular_form(const PointSet& w);

struct MonteCarloEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
};

/// Mean of dsp(W, S_xy)^2 over `num_pairs` independent uniform (x, y).
MonteCarloEstimate l2_discrepancy_mc(const PointSet& w, std::uint64_t num_pairs, RngSeed seed);

struct LinfOptions {
  std::uint64_t num_slices = 100'000;
  /// Points of W whose pairwise slices S_{w_i w_j} (i == j included) are probed.
  int pair_subsample = 64;
};

/// Lower bound on sup_S |dsp(W, S)| from random slices plus slices spanned by
/// pairs of weights. Always within [0, 2].
double linf_discrepancy_estimate(const PointSet& w, RngSeed seed, const LinfOptions& options = {});

/// R(W) = (1 / n(n-1)) sum_{i != j} k(w_i, w_j)^2 over normalized rows.
double diversity_regularizer(const RowMatrix& raw);

/// Clamp for s in the arccos derivative: s in [-1 + eps, 1 - eps].
inline constexpr double kArccosClamp = 1e-7;

/// Analytic gradient of R with respect to the raw weights; each row is
/// orthogonal to the corresponding weight because R is scale invariant.
RowMatrix diversity_regularizer_gradient(const RowMatrix& raw);

/// R(W) and its gradient in one pass.
double diversity_regularizer_with_gradient(const RowMatrix& raw, RowMatrix& grad);

/// c_g (sqrt(log d / (n d) log(1/delta')) + log(1/delta') / n).
double gcal_threshold(int n, int d, double c_g, double delta_prime);

struct GcalMembership {
  bool is_member = false;
  double ratio = 0.0;
  double l2_squared = 0.0;
  double threshold = 0.0;
};

GcalMembership gcal_membership(const PointSet& w, double c_g, double delta_prime);

/// Calibrates c_g as the `quantile` of L2^2 / gcal_threshold(n, d, 1, delta')
/// over `draws` uniform weight sets of size n in dimension d.
double calibrate_cg(int n, int d, int draws, double quantile, double delta_prime, RngSeed seed);

struct DiscrepancyReport {
  int n = 0;
  int d = 0;
  double l2_squared_closed = 0.0;
  MonteCarloEstimate l2_squared_mc;
  double linf_estimate = 0.0;
  double regularizer = 0.0;
};

struct DiscrepancyReportOptions {
  std::uint64_t mc_pairs = 100'000;
  LinfOptions linf{};
};

DiscrepancyReport discrepancy_report(const RowMatrix& raw, RngSeed seed,
                                     const DiscrepancyReportOptions& options = {});

}  // namespace reluspec
