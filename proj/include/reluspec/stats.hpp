#pragma once

#include <span>
#include <vector>

namespace reluspec {

/// Linear-interpolation quantile (type 7) of unsorted data, p in [0, 1].
double quantile(std::span<const double> values, double p);
double median(std::span<const double> values);

struct Correlation {
  double rho = 0.0;
  /// Two-sided p-value from the t approximation with n - 2 degrees of freedom.
  double p_value = 1.0;
};

/// Spearman rank correlation; ties receive average ranks.
Correlation spearman(std::span<const double> x, std::span<const double> y);

/// Least-squares slope of log(y) on log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace reluspec
