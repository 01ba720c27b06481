#pragma once

#include <functional>
#include <span>
#include <vector>

namespace reluspec {

struct QuadratureConfig {
  double rtol = 1e-8;
  int initial_nodes = 64;
  int max_nodes = 16384;
  /// The weight sin^{d-2}(theta) is dropped where it falls below
  /// exp(-window_log) times its peak.
  double window_log = 60.0;
};

struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [-1, 1]; rules are cached.
const GaussLegendreRule& gauss_legendre(int n);

/// log of |S^{d-2}| / |S^{d-1}| = Gamma(d/2) / (sqrt(pi) Gamma((d-1)/2)).
double log_sphere_area_ratio(int d);

/// Integrand filling out[k] with f_k(xi) at one inner-product value xi.
using MultiIntegrand = std::function<void(double xi, std::span<double> out)>;

struct QuadratureResult {
  std::vector<double> values;
  std::vector<double> error_estimates;
  /// Per-component scale E|f_k|, used as the noise floor for values that
  /// cancel to zero.
  std::vector<double> magnitudes;
  int nodes = 0;
};

/// E[f_k(<u,v>)] for u, v independent uniform on S^{d-1}, for all k at once.
///
/// Integrates over theta = arccos(xi) with density
/// c_d sin^{d-2}(theta), which is smooth at the endpoints for every d >= 2.
/// The node count doubles until every component agrees with the previous
/// level to `rtol` (or to rtol * 1e-5 of its magnitude for components that
/// vanish). Raises kPrecision when `max_nodes` is exhausted.
QuadratureResult sphere_inner_product_expectations(int d, int components, const MultiIntegrand& f,
                                                   const QuadratureConfig& config = {});

double sphere_inner_product_expectation(int d, const std::function<double(double)>& f,
                                        const QuadratureConfig& config = {});

}  // namespace reluspec
