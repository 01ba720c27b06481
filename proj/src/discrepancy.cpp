#include "reluspec/discrepancy.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

#include "reluspec/error.hpp"

namespace reluspec {

namespace {

constexpr Eigen::Index kBlock = 512;

void check_slice(const Slice& s, int d) {
  require(s.x.size() == d && s.y.size() == d, ErrorCode::kDimension, "slice dimension does not match W");
}

// Fills a (rows x d) block with standard normals. Only directions matter for
// slice membership, so callers skip the normalization.
void fill_gaussian(Engine& eng, std::normal_distribution<double>& gauss, RowMatrix& block) {
  for (Eigen::Index i = 0; i < block.rows(); ++i)
    for (Eigen::Index j = 0; j < block.cols(); ++j) block(i, j) = gauss(eng);
}

}  // namespace

double slice_area(const Slice& s) {
  require(s.x.size() == s.y.size(), ErrorCode::kDimension, "slice_area: dimension mismatch");
  return 0.5 * (1.0 - angular_distance(s.x, s.y));
}

double slice_discrepancy(const PointSet& w, const Slice& s) {
  check_slice(s, w.dim());
  const Eigen::VectorXd px = w.points() * s.x;
  const Eigen::VectorXd py = w.points() * s.y;
  const auto inside = ((px.array() >= 0.0) && (py.array() >= 0.0)).count();
  return static_cast<double>(inside) / w.count() - slice_area(s);
}

double expected_k_squared(int d) {
  static std::mutex mutex;
  static std::map<int, double> cache;
  require(d >= 2, ErrorCode::kDimension, "expected_k_squared needs d >= 2");
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(d); it != cache.end()) return it->second;
  }
  const double v = sphere_inner_product_expectation(d, [](double s) {
    const double k = slice_kernel(s);
    return k * k;
  });
  std::lock_guard lock(mutex);
  cache.emplace(d, v);
  return v;
}

double mean_pair_k_squared(const PointSet& w) {
  const RowMatrix& u = w.points();
  const Eigen::Index n = u.rows();
  // Diagonal terms are exactly k(w, w)^2 = 1/4.
  long double off = 0.0L;
  for (Eigen::Index b = 0; b < n; b += kBlock) {
    const Eigen::Index rows = std::min(kBlock, n - b);
    const Eigen::MatrixXd inner = u.middleRows(b, rows) * u.bottomRows(n - b).transpose();
    for (Eigen::Index i = 0; i < rows; ++i) {
      double row_sum = 0.0;
      for (Eigen::Index j = i + 1; j < inner.cols(); ++j) {
        const double k = slice_kernel(inner(i, j));
        row_sum += k * k;
      }
      off += row_sum;
    }
  }
  const long double total = 2.0L * off + 0.25L * n;
  return static_cast<double>(total / (static_cast<long double>(n) * n));
}

double l2_discrepancy_closed(const PointSet& w, double expectation_term) {
  return std::max(0.0, mean_pair_k_squared(w) - expectation_term);
}

double l2_discrepancy_closed(const PointSet& w) {
  return l2_discrepancy_closed(w, expected_k_squared(w.dim()));
}

double l2_discrepancy_angular_form(const PointSet& w) {
  const RowMatrix& u = w.points();
  const Eigen::Index n = u.rows();
  const Eigen::MatrixXd inner = u * u.transpose();
  long double sq = 0.0L, lin = 0.0L;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double h = (i == j) ? 0.5 : 0.5 - std::acos(std::clamp(inner(i, j), -1.0, 1.0)) / M_PI;
      sq += h * h;
      lin += h;
    }
  }
  const int d = w.dim();
  const double mu = sphere_inner_product_expectation(d, [](double s) {
    const double h = 0.5 - std::acos(std::clamp(s, -1.0, 1.0)) / M_PI;
    return h * h;
  });
  const long double nn = static_cast<long double>(n) * n;
  return static_cast<double>(sq / (4.0L * nn) - 0.25L * mu + lin / (4.0L * nn));
}

MonteCarloEstimate l2_discrepancy_mc(const PointSet& w, std::uint64_t num_pairs, RngSeed seed) {
  require(num_pairs > 0, ErrorCode::kInvalidArgument, "l2_discrepancy_mc: num_pairs must be positive");
  const int d = w.dim();
  const double inv_n = 1.0 / w.count();
  Engine eng = make_engine(seed);
  std::normal_distribution<double> gauss;
  long double sum = 0.0L, sum_sq = 0.0L;
  RowMatrix xs, ys;
  for (std::uint64_t done = 0; done < num_pairs;) {
    const Eigen::Index rows = static_cast<Eigen::Index>(std::min<std::uint64_t>(2048, num_pairs - done));
    xs.resize(rows, d);
    ys.resize(rows, d);
    fill_gaussian(eng, gauss, xs);
    fill_gaussian(eng, gauss, ys);
    const Eigen::MatrixXd px = xs * w.points().transpose();
    const Eigen::MatrixXd py = ys * w.points().transpose();
    for (Eigen::Index b = 0; b < rows; ++b) {
      const auto inside = ((px.row(b).array() >= 0.0) && (py.row(b).array() >= 0.0)).count();
      const double s = xs.row(b).dot(ys.row(b)) / (xs.row(b).norm() * ys.row(b).norm());
      const double dsp = static_cast<double>(inside) * inv_n - slice_kernel(s);
      const double z = dsp * dsp;
      sum += z;
      sum_sq += static_cast<long double>(z) * z;
    }
    done += static_cast<std::uint64_t>(rows);
  }
  const long double count = static_cast<long double>(num_pairs);
  const long double mean = sum / count;
  MonteCarloEstimate est;
  est.estimate = static_cast<double>(mean);
  if (num_pairs > 1) {
    const long double var = std::max(0.0L, (sum_sq - count * mean * mean) / (count - 1.0L));
    est.standard_error = static_cast<double>(std::sqrt(var / count));
  }
  return est;
}

double linf_discrepancy_estimate(const PointSet& w, RngSeed seed, const LinfOptions& options) {
  const int d = w.dim();
  const int n = w.count();
  double best = 0.0;

  Engine eng = make_engine(seed);
  std::normal_distribution<double> gauss;
  RowMatrix xs, ys;
  for (std::uint64_t done = 0; done < options.num_slices;) {
    const Eigen::Index rows =
        static_cast<Eigen::Index>(std::min<std::uint64_t>(2048, options.num_slices - done));
    xs.resize(rows, d);
    ys.resize(rows, d);
    fill_gaussian(eng, gauss, xs);
    fill_gaussian(eng, gauss, ys);
    const Eigen::MatrixXd px = xs * w.points().transpose();
    const Eigen::MatrixXd py = ys * w.points().transpose();
    for (Eigen::Index b = 0; b < rows; ++b) {
      const auto inside = ((px.row(b).array() >= 0.0) && (py.row(b).array() >= 0.0)).count();
      const double s = xs.row(b).dot(ys.row(b)) / (xs.row(b).norm() * ys.row(b).norm());
      best = std::max(best, std::abs(static_cast<double>(inside) / n - slice_kernel(s)));
    }
    done += static_cast<std::uint64_t>(rows);
  }

  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Engine pick = make_engine(seed.with_stream(seed.stream ^ 0x9e3779b97f4a7c15ULL));
  std::shuffle(idx.begin(), idx.end(), pick);
  idx.resize(static_cast<std::size_t>(std::min(n, std::max(options.pair_subsample, 0))));
  const Eigen::MatrixXd proj = w.points() * w.points().transpose();
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a; b < idx.size(); ++b) {
      const int i = idx[a], j = idx[b];
      const auto inside = ((proj.col(i).array() >= 0.0) && (proj.col(j).array() >= 0.0)).count();
      const double area = (i == j) ? 0.5 : slice_kernel(proj(i, j));
      best = std::max(best, std::abs(static_cast<double>(inside) / n - area));
    }
  }
  return std::min(best, 2.0);
}

double diversity_regularizer_with_gradient(const RowMatrix& raw, RowMatrix& grad) {
  const Eigen::Index n = raw.rows();
  require(n >= 2, ErrorCode::kInvalidArgument, "diversity regularizer needs at least two weights");
  const Eigen::VectorXd norms = row_norms(raw);
  const PointSet u = normalize(raw);
  const Eigen::MatrixXd inner = u.points() * u.points().transpose();
  Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(n, n);
  const double scale = 1.0 / (static_cast<double>(n) * (n - 1));
  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    double col_total = 0.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double s = inner(i, j);
      const double k = slice_kernel(s);
      const double sc = std::clamp(s, -1.0 + kArccosClamp, 1.0 - kArccosClamp);
      const double dk = 1.0 / (2.0 * M_PI * std::sqrt(1.0 - sc * sc));
      col_total += k * k;
      // d(k_ij^2 + k_ji^2) / d s_ij, times the averaging scale.
      const double c = 4.0 * scale * k * dk;
      coef(i, j) = c;
      coef(j, i) = c;
    }
    total += col_total;
  }
  const RowMatrix du = coef * u.points();
  grad.resize(raw.rows(), raw.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ui = u.points().row(i);
    grad.row(i) = (du.row(i) - du.row(i).dot(ui) * ui) / norms(i);
  }
  return 2.0 * total * scale;
}

double diversity_regularizer(const RowMatrix& raw) {
  const Eigen::Index n = raw.rows();
  require(n >= 2, ErrorCode::kInvalidArgument, "diversity regularizer needs at least two weights");
  const PointSet u = normalize(raw);
  const Eigen::MatrixXd inner = u.points() * u.points().transpose();
  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double k = slice_kernel(inner(i, j));
      total += k * k;
    }
  return 2.0 * total / (static_cast<double>(n) * (n - 1));
}

RowMatrix diversity_regularizer_gradient(const RowMatrix& raw) {
  RowMatrix grad;
  diversity_regularizer_with_gradient(raw, grad);
  return grad;
}

double gcal_threshold(int n, int d, double c_g, double delta_prime) {
  require(c_g > 0.0, ErrorCode::kInvalidArgument, "c_g must be positive");
  require(delta_prime > 0.0 && delta_prime < 1.0, ErrorCode::kInvalidArgument, "delta' must lie in (0, 1)");
  require(n >= 1 && d >= 2, ErrorCode::kDimension, "gcal_threshold: invalid n or d");
  const double log_inv = std::log(1.0 / delta_prime);
  return c_g * (std::sqrt(std::log(static_cast<double>(d)) / (static_cast<double>(n) * d) * log_inv) +
                log_inv / n);
}

GcalMembership gcal_membership(const PointSet& w, double c_g, double delta_prime) {
  GcalMembership m;
  m.threshold = gcal_threshold(w.count(), w.dim(), c_g, delta_prime);
  m.l2_squared = l2_discrepancy_closed(w);
  m.ratio = m.l2_squared / m.threshold;
  m.is_member = m.ratio <= 1.0;
  return m;
}

double calibrate_cg(int n, int d, int draws, double quantile, double delta_prime, RngSeed seed) {
  require(draws >= 1, ErrorCode::kInvalidArgument, "calibrate_cg: draws must be positive");
  require(quantile > 0.0 && quantile <= 1.0, ErrorCode::kInvalidArgument, "calibrate_cg: quantile in (0, 1]");
  const double base = gcal_threshold(n, d, 1.0, delta_prime);
  const double ek2 = expected_k_squared(d);
  std::vector<double> ratios(static_cast<std::size_t>(draws));
  for (int i = 0; i < draws; ++i) {
    const PointSet w = sample_uniform_sphere(d, n, seed.with_stream(seed.stream + static_cast<std::uint64_t>(i)));
    ratios[static_cast<std::size_t>(i)] = l2_discrepancy_closed(w, ek2) / base;
  }
  std::sort(ratios.begin(), ratios.end());
  const auto rank = static_cast<std::size_t>(std::ceil(quantile * draws));
  return ratios[std::max<std::size_t>(rank, 1) - 1];
}

DiscrepancyReport discrepancy_report(const RowMatrix& raw, RngSeed seed, const DiscrepancyReportOptions& options) {
  const PointSet w = normalize(raw);
  DiscrepancyReport r;
  r.n = w.count();
  r.d = w.dim();
  r.l2_squared_closed = l2_discrepancy_closed(w);
  r.l2_squared_mc = l2_discrepancy_mc(w, options.mc_pairs, seed.with_stream(seed.stream * 4 + 1));
  r.linf_estimate = linf_discrepancy_estimate(w, seed.with_stream(seed.stream * 4 + 2), options.linf);
  r.regularizer = r.n >= 2 ? diversity_regularizer(raw) : std::nan("");
  return r;
}

}  // namespace reluspec
