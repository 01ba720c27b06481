#pragma once

#include <algorithm>
#include <boost/multiprecision/cpp_int.hpp>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reluspec/quadrature.hpp"
#include "reluspec/sphere.hpp"

namespace reluspec {

using BigInt = boost::multiprecision::cpp_int;

// Closed-form profiles, evaluated at s = <x, y> (clamped to [-1, 1]).

/// (pi - arccos s) / (2 pi): the normalized area of the slice S_xy.
double slice_kernel(double s);
double slice_kernel(VecRef u, VecRef v);

/// ReLU activation kernel g = (1/2 - arccos(s) / (2 pi)) * s.
double relu_activation_kernel(double s);
double relu_activation_kernel(VecRef x, VecRef y);

inline constexpr int kMaxArccosOrder = 7;

/// Arc-cosine function J_t(theta) for t in 0..7, theta in [0, pi].
double arccos_j(int t, double theta);

/// Derivative kernel of sigma(u) = max(u, 0)^t.
///
/// `raw` is J_{t-1}(theta) / (2 pi), the value E[1(g.x>0) 1(g.y>0)
/// (g.x)^{t-1} (g.y)^{t-1}] for Gaussian g ~ N(0, I). `derivative` includes
/// the t^2 from sigma'(u) = t max(u,0)^{t-1}. For t = 1 both equal the slice
/// kernel. Weights uniform on the sphere instead of Gaussian scale both by
/// 1 / sphere_weight_moment(d, t - 1).
struct RectifiedPolyValue {
  double raw = 0.0;
  double derivative = 0.0;
};
RectifiedPolyValue rectified_poly_kernel(int t, double s);

/// E||g||^{2p} for g ~ N(0, I_d): d (d+2) ... (d+2p-2).
double sphere_weight_moment(int d, int p);

enum class KernelKind { kSlice, kReluG, kArccosJ, kRectifiedPoly, kRectifiedPolyG, kCustom };

/// A kernel K(x, y) = profile(<x, y>) on the sphere.
///
/// Names accepted by `parse`: "slice", "relu-g", "arccos-J<t>" (J_t / pi),
/// "rectified-poly<t>" (raw derivative kernel k_t) and "rectified-poly-g<t>"
/// (k_t(x,y) <x,y>, the activation kernel of max(u,0)^t without the t^2).
class DotProductKernel {
 public:
  static DotProductKernel slice();
  static DotProductKernel relu_g();
  static DotProductKernel arccos(int t);
  static DotProductKernel rectified_poly(int t);
  static DotProductKernel rectified_poly_g(int t);
  static DotProductKernel custom(std::string name, std::function<double(double)> profile);
  static DotProductKernel parse(std::string_view name);

  double operator()(double s) const { return profile_(std::clamp(s, -1.0, 1.0)); }
  KernelKind kind() const { return kind_; }
  int order() const { return order_; }
  const std::string& name() const { return name_; }

 private:
  DotProductKernel(KernelKind kind, int order, std::string name, std::function<double(double)> f)
      : kind_(kind), order_(order), name_(std::move(name)), profile_(std::move(f)) {}
  KernelKind kind_;
  int order_;
  std::string name_;
  std::function<double(double)> profile_;
};

/// m x m matrix K(x_i, x_j); symmetric by construction.
Eigen::MatrixXd gram_matrix(const PointSet& points, const DotProductKernel& kernel);

/// N(d, t) = ((2t + d - 2) / t) C(t + d - 3, t - 1); N(d, 0) = 1.
BigInt harmonic_multiplicity(int d, int t);

/// d-dimensional Legendre polynomial P_{t,d}, normalized to P_{t,d}(1) = 1.
double legendre_poly(int d, int t, double xi);

/// Fills out[0..T] with P_{0,d}(xi) .. P_{T,d}(xi).
void legendre_polys(int d, double xi, std::span<double> out);

struct SpectrumOrder {
  int t = 0;
  double gamma = 0.0;
  /// Quadrature value before clipping tiny negatives to zero.
  double gamma_raw = 0.0;
  double quadrature_error = 0.0;
  BigInt multiplicity;
  /// Index of the last copy of this eigenvalue in the sorted expansion
  /// (1-based, uncapped).
  BigInt cumulative_index;
};

struct KernelSpectrum {
  int dim = 0;
  /// Indexed by t.
  std::vector<SpectrumOrder> orders;
  /// Order numbers t sorted by decreasing gamma.
  std::vector<int> sorted_orders;
  /// gamma_1 >= gamma_2 >= ..., each gamma_t repeated N(d, t) times, capped.
  std::vector<double> expanded;
  bool truncated = false;
};

struct SpectrumConfig {
  int max_order = 10;
  QuadratureConfig quadrature{};
  std::size_t expanded_cap = 1'000'000;
};

/// gamma_t = E[K(xi) P_{t,d}(xi)] under the inner-product law on S^{d-1}, so
/// that K(xi) = sum_t N(d,t) gamma_t P_{t,d}(xi). Negative values within the
/// quadrature noise are clipped to 0; larger negatives raise kInvalidArgument
/// (the kernel is not positive definite).
KernelSpectrum kernel_spectrum(const DotProductKernel& kernel, int d, const SpectrumConfig& config = {});

/// Negated least-squares slope of log(gamma_m) against log(m), one point per
/// integer index m in [first, last] (1-based, inclusive).
double decay_exponent(std::span<const double> expanded, std::size_t first, std::size_t last);
double decay_exponent(const KernelSpectrum& spectrum, std::size_t first, std::size_t last);

}  // namespace reluspec
