#include "reluspec/kernels.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "reluspec/error.hpp"
#include "reluspec/memory.hpp"

namespace reluspec {

namespace {

double clamped_acos(double s) { return std::acos(std::clamp(s, -1.0, 1.0)); }

}  // namespace

double slice_kernel(double s) { return (M_PI - clamped_acos(s)) / (2.0 * M_PI); }

double slice_kernel(VecRef u, VecRef v) {
  require(u.size() == v.size(), ErrorCode::kDimension, "slice_kernel: dimension mismatch");
  return slice_kernel(u.dot(v));
}

double relu_activation_kernel(double s) {
  s = std::clamp(s, -1.0, 1.0);
  return (0.5 - clamped_acos(s) / (2.0 * M_PI)) * s;
}

double relu_activation_kernel(VecRef x, VecRef y) {
  require(x.size() == y.size(), ErrorCode::kDimension, "relu_activation_kernel: dimension mismatch");
  return relu_activation_kernel(x.dot(y));
}

double arccos_j(int t, double theta) {
  if (t < 0 || t > kMaxArccosOrder)
    fail(ErrorCode::kUnsupportedOrder, "arccos_j: order " + std::to_string(t) + " outside 0..7");
  require(std::isfinite(theta), ErrorCode::kNumeric, "arccos_j: non-finite angle");
  require(theta >= -1e-12 && theta <= M_PI + 1e-12, ErrorCode::kInvalidArgument,
          "arccos_j: angle outside [0, pi]");
  theta = std::clamp(theta, 0.0, M_PI);
  const double s = std::sin(theta);
  const double c = std::cos(theta);
  const double a = M_PI - theta;
  switch (t) {
    case 0:
      return a;
    case 1:
      return s + a * c;
    case 2:
      return 3.0 * s * c + a * (1.0 + 2.0 * c * c);
    case 3:
      return (27.0 * s + 11.0 * (3.0 * s * c * c - s * s * s) +
              a * (54.0 * c + 6.0 * (c * c * c - 3.0 * s * s * c))) /
             4.0;
    case 4:
      return (a * (216.0 + 192.0 * std::cos(2 * theta) + 12.0 * std::cos(4 * theta)) +
              160.0 * std::sin(2 * theta) + 25.0 * std::sin(4 * theta)) /
             4.0;
    case 5:
      return (a * (6000.0 * c + 1500.0 * std::cos(3 * theta) + 60.0 * std::cos(5 * theta)) +
              2000.0 * s + 1625.0 * std::sin(3 * theta) + 137.0 * std::sin(5 * theta)) /
             8.0;
    case 6:
      return 9.0 / 8.0 *
             (a * (4000.0 + 4500.0 * std::cos(2 * theta) + 720.0 * std::cos(4 * theta) +
                   20.0 * std::cos(6 * theta)) +
              2625.0 * std::sin(2 * theta) + 924.0 * std::sin(4 * theta) + 49.0 * std::sin(6 * theta));
    default:
      return 9.0 / 16.0 *
             (a * (171500.0 * c + 61740.0 * std::cos(3 * theta) + 6860.0 * std::cos(5 * theta) +
                   140.0 * std::cos(7 * theta)) +
              42875.0 * s + 48363.0 * std::sin(3 * theta) + 9947.0 * std::sin(5 * theta) +
              363.0 * std::sin(7 * theta));
  }
}

RectifiedPolyValue rectified_poly_kernel(int t, double s) {
  if (t < 1 || t - 1 > kMaxArccosOrder)
    fail(ErrorCode::kUnsupportedOrder, "rectified_poly_kernel: order " + std::to_string(t) + " outside 1..8");
  const double raw = arccos_j(t - 1, clamped_acos(s)) / (2.0 * M_PI);
  return {raw, static_cast<double>(t) * t * raw};
}

double sphere_weight_moment(int d, int p) {
  double m = 1.0;
  for (int i = 0; i < p; ++i) m *= d + 2.0 * i;
  return m;
}

DotProductKernel DotProductKernel::slice() {
  return {KernelKind::kSlice, 1, "slice", [](double s) { return slice_kernel(s); }};
}

DotProductKernel DotProductKernel::relu_g() {
  return {KernelKind::kReluG, 1, "relu-g", [](double s) { return relu_activation_kernel(s); }};
}

DotProductKernel DotProductKernel::arccos(int t) {
  arccos_j(t, 0.0);  // validates the order
  return {KernelKind::kArccosJ, t, "arccos-J" + std::to_string(t),
          [t](double s) { return arccos_j(t, clamped_acos(s)) / M_PI; }};
}

DotProductKernel DotProductKernel::rectified_poly(int t) {
  rectified_poly_kernel(t, 0.0);
  return {KernelKind::kRectifiedPoly, t, "rectified-poly" + std::to_string(t),
          [t](double s) { return rectified_poly_kernel(t, s).raw; }};
}

DotProductKernel DotProductKernel::rectified_poly_g(int t) {
  rectified_poly_kernel(t, 0.0);
  return {KernelKind::kRectifiedPolyG, t, "rectified-poly-g" + std::to_string(t),
          [t](double s) { return rectified_poly_kernel(t, s).raw * s; }};
}

DotProductKernel DotProductKernel::custom(std::string name, std::function<double(double)> profile) {
  return {KernelKind::kCustom, 0, std::move(name), std::move(profile)};
}

DotProductKernel DotProductKernel::parse(std::string_view name) {
  if (name == "slice") return slice();
  if (name == "relu-g") return relu_g();
  auto order_after = [&](std::string_view prefix) -> int {
    std::string_view rest = name.substr(prefix.size());
    int t = -1;
    auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), t);
    if (ec != std::errc{} || ptr != rest.data() + rest.size() || rest.empty())
      fail(ErrorCode::kConfig, "bad kernel order in '" + std::string(name) + "'");
    return t;
  };
  if (name.starts_with("arccos-J")) return arccos(order_after("arccos-J"));
  if (name.starts_with("rectified-poly-g")) return rectified_poly_g(order_after("rectified-poly-g"));
  if (name.starts_with("rectified-poly")) return rectified_poly(order_after("rectified-poly"));
  fail(ErrorCode::kConfig, "unknown kernel '" + std::string(name) +
                               "' (expected slice, relu-g, arccos-J<t>, rectified-poly<t>, rectified-poly-g<t>)");
}

Eigen::MatrixXd gram_matrix(const PointSet& points, const DotProductKernel& kernel) {
  const std::size_t m = static_cast<std::size_t>(points.count());
  check_memory(m * m * sizeof(double), "gram_matrix");
  Eigen::MatrixXd inner = points.points() * points.points().transpose();
  // Rows are unit vectors, so the diagonal is K(1) exactly; the computed
  // <x, x> = 1 - O(eps) would be amplified by arccos near 1.
  const double diag = kernel(1.0);
  for (Eigen::Index j = 0; j < inner.cols(); ++j) {
    inner(j, j) = diag;
    for (Eigen::Index i = j + 1; i < inner.rows(); ++i) {
      const double v = kernel(inner(i, j));
      inner(i, j) = v;
      inner(j, i) = v;
    }
  }
  return inner;
}

namespace {

BigInt binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  BigInt r = 1;
  for (int i = 1; i <= k; ++i) {
    r *= n - k + i;
    r /= i;
  }
  return r;
}

}  // namespace

BigInt harmonic_multiplicity(int d, int t) {
  require(d >= 2, ErrorCode::kDimension, "harmonic_multiplicity: d must be >= 2");
  require(t >= 0, ErrorCode::kInvalidArgument, "harmonic_multiplicity: t must be >= 0");
  if (t == 0) return 1;
  BigInt numerator = BigInt(2 * t + d - 2) * binomial(t + d - 3, t - 1);
  return numerator / t;
}

void legendre_polys(int d, double xi, std::span<double> out) {
  require(d >= 3, ErrorCode::kDimension, "Legendre harmonics need d >= 3");
  if (out.empty()) return;
  out[0] = 1.0;
  if (out.size() > 1) out[1] = xi;
  // P_{t+1} = ((2t + d - 2) xi P_t - t P_{t-1}) / (t + d - 2)
  for (std::size_t t = 1; t + 1 < out.size(); ++t) {
    const double td = static_cast<double>(t);
    out[t + 1] = ((2.0 * td + d - 2.0) * xi * out[t] - td * out[t - 1]) / (td + d - 2.0);
  }
}

double legendre_poly(int d, int t, double xi) {
  require(t >= 0, ErrorCode::kInvalidArgument, "legendre_poly: t must be >= 0");
  std::vector<double> p(static_cast<std::size_t>(t) + 1);
  legendre_polys(d, xi, p);
  return p.back();
}

KernelSpectrum kernel_spectrum(const DotProductKernel& kernel, int d, const SpectrumConfig& config) {
  require(d >= 3, ErrorCode::kDimension, "kernel_spectrum needs d >= 3");
  require(config.max_order >= 0, ErrorCode::kInvalidArgument, "kernel_spectrum: negative max order");
  const int orders = config.max_order + 1;
  std::vector<double> poly(orders);
  QuadratureResult q = sphere_inner_product_expectations(
      d, orders,
      [&](double xi, std::span<double> out) {
        legendre_polys(d, xi, poly);
        const double k = kernel(xi);
        for (int t = 0; t < orders; ++t) out[t] = k * poly[t];
      },
      config.quadrature);

  KernelSpectrum spec;
  spec.dim = d;
  spec.orders.resize(orders);
  for (int t = 0; t < orders; ++t) {
    SpectrumOrder& o = spec.orders[t];
    o.t = t;
    o.gamma_raw = q.values[t];
    o.quadrature_error = q.error_estimates[t];
    o.multiplicity = harmonic_multiplicity(d, t);
    const double noise = std::max(10.0 * q.error_estimates[t], 1e-12 * q.magnitudes[t]);
    if (o.gamma_raw < 0.0) {
      if (-o.gamma_raw > noise) {
        fail(ErrorCode::kInvalidArgument, "kernel '" + kernel.name() + "' has negative eigenvalue " +
                                              std::to_string(o.gamma_raw) + " at order " + std::to_string(t));
      }
      o.gamma = 0.0;
    } else {
      o.gamma = o.gamma_raw;
    }
  }

  spec.sorted_orders.resize(orders);
  std::iota(spec.sorted_orders.begin(), spec.sorted_orders.end(), 0);
  std::stable_sort(spec.sorted_orders.begin(), spec.sorted_orders.end(),
                   [&](int a, int b) { return spec.orders[a].gamma > spec.orders[b].gamma; });

  BigInt cumulative = 0;
  const BigInt cap = config.expanded_cap;
  for (int t : spec.sorted_orders) {
    SpectrumOrder& o = spec.orders[t];
    const BigInt before = cumulative;
    cumulative += o.multiplicity;
    o.cumulative_index = cumulative;
    if (before < cap) {
      const BigInt take = std::min<BigInt>(o.multiplicity, cap - before);
      spec.expanded.insert(spec.expanded.end(), take.convert_to<std::size_t>(), o.gamma);
    }
  }
  spec.truncated = cumulative > cap;
  return spec;
}

double decay_exponent(std::span<const double> expanded, std::size_t first, std::size_t last) {
  require(first >= 1 && first <= last, ErrorCode::kInvalidArgument, "decay_exponent: empty index range");
  require(last <= expanded.size(), ErrorCode::kInvalidArgument,
          "decay_exponent: range end " + std::to_string(last) + " beyond expanded length " +
              std::to_string(expanded.size()));
  require(last > first, ErrorCode::kInvalidArgument, "decay_exponent: need at least two indices");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double count = static_cast<double>(last - first + 1);
  for (std::size_t m = first; m <= last; ++m) {
    const double g = expanded[m - 1];
    require(g > 0.0, ErrorCode::kInvalidArgument,
            "decay_exponent: gamma_" + std::to_string(m) + " is not positive");
    const double x = std::log(static_cast<double>(m));
    const double y = std::log(g);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double cov = sxy - sx * sy / count;
  const double var = sxx - sx * sx / count;
  return -cov / var;
}

double decay_exponent(const KernelSpectrum& spectrum, std::size_t first, std::size_t last) {
  return decay_exponent(std::span<const double>(spectrum.expanded), first, last);
}

}  // namespace reluspec
