#include "reluspec/quadrature.hpp"

#include <boost/math/special_functions/legendre.hpp>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#include "reluspec/error.hpp"

namespace reluspec {

const GaussLegendreRule& gauss_legendre(int n) {
  static std::mutex mutex;
  static std::map<int, GaussLegendreRule> cache;
  require(n >= 1, ErrorCode::kInvalidArgument, "gauss_legendre: n must be positive");
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  // boost returns the non-negative zeros in increasing order.
  const std::vector<double> zeros = boost::math::legendre_p_zeros<double>(n);
  GaussLegendreRule rule;
  auto push = [&](double x) {
    const double dp = boost::math::legendre_p_prime(n, x);
    rule.nodes.push_back(x);
    rule.weights.push_back(2.0 / ((1.0 - x * x) * dp * dp));
  };
  for (auto z = zeros.rbegin(); z != zeros.rend(); ++z)
    if (*z != 0.0) push(-*z);
  for (double z : zeros) push(z);
  return cache.emplace(n, std::move(rule)).first->second;
}

double log_sphere_area_ratio(int d) {
  require(d >= 2, ErrorCode::kDimension, "sphere area ratio needs d >= 2");
  return std::lgamma(0.5 * d) - 0.5 * std::log(M_PI) - std::lgamma(0.5 * (d - 1));
}

namespace {

struct Level {
  std::vector<double> values;
  std::vector<double> magnitudes;
};

Level integrate_level(int d, int components, const MultiIntegrand& f, int n, double half_width) {
  const GaussLegendreRule& rule = gauss_legendre(n);
  const double log_cd = log_sphere_area_ratio(d);
  Level level{std::vector<double>(components, 0.0), std::vector<double>(components, 0.0)};
  std::vector<double> buf(components);
  for (int i = 0; i < n; ++i) {
    const double theta = 0.5 * M_PI + half_width * rule.nodes[i];
    const double sin_theta = std::sin(theta);
    if (sin_theta <= 0.0 && d > 2) continue;
    const double log_w = log_cd + (d - 2) * std::log(sin_theta);
    const double w = rule.weights[i] * half_width * std::exp(log_w);
    f(std::cos(theta), buf);
    for (int k = 0; k < components; ++k) {
      level.values[k] += w * buf[k];
      level.magnitudes[k] += w * std::abs(buf[k]);
    }
  }
  return level;
}

}  // namespace

QuadratureResult sphere_inner_product_expectations(int d, int components, const MultiIntegrand& f,
                                                   const QuadratureConfig& config) {
  require(d >= 2, ErrorCode::kDimension, "inner-product quadrature needs d >= 2");
  double half_width = 0.5 * M_PI;
  if (d > 2) half_width = std::min(half_width, std::sqrt(2.0 * config.window_log / (d - 2)));

  int n = config.initial_nodes;
  Level prev = integrate_level(d, components, f, n, half_width);
  while (true) {
    const int next_n = 2 * n;
    if (next_n > config.max_nodes) break;
    Level cur = integrate_level(d, components, f, next_n, half_width);
    bool converged = true;
    std::vector<double> err(components);
    for (int k = 0; k < components; ++k) {
      err[k] = std::abs(cur.values[k] - prev.values[k]);
      const double tol = std::max(config.rtol * std::abs(cur.values[k]),
                                  config.rtol * 1e-5 * cur.magnitudes[k]);
      if (err[k] > tol) converged = false;
    }
    if (converged) {
      return QuadratureResult{std::move(cur.values), std::move(err), std::move(cur.magnitudes), next_n};
    }
    prev = std::move(cur);
    n = next_n;
  }
  std::ostringstream msg;
  msg << "quadrature did not converge for d=" << d << " within " << config.max_nodes
      << " nodes (rtol " << config.rtol << ")";
  fail(ErrorCode::kPrecision, msg.str());
}

double sphere_inner_product_expectation(int d, const std::function<double(double)>& f,
                                        const QuadratureConfig& config) {
  auto r = sphere_inner_product_expectations(
      d, 1, [&](double xi, std::span<double> out) { out[0] = f(xi); }, config);
  return r.values[0];
}

}  // namespace reluspec
