#include "reluspec/sphere.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "reluspec/error.hpp"

namespace reluspec {

namespace {

void check_dims(int d, int n) {
  require(d >= 2, ErrorCode::kDimension, "dimension must be >= 2, got " + std::to_string(d));
  require(n >= 1, ErrorCode::kDimension, "point count must be >= 1, got " + std::to_string(n));
}

// Gaussian-normalize draw into `out`; redraws the (probability zero) origin.
template <typename Row>
void draw_unit(Engine& eng, std::normal_distribution<double>& gauss, Row&& out) {
  double norm2 = 0.0;
  do {
    for (Eigen::Index j = 0; j < out.size(); ++j) out(j) = gauss(eng);
    norm2 = out.squaredNorm();
  } while (norm2 == 0.0);
  out /= std::sqrt(norm2);
}

}  // namespace

PointSet PointSet::from_unit_rows(RowMatrix rows) {
  check_dims(static_cast<int>(rows.cols()), static_cast<int>(rows.rows()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const double norm = rows.row(i).norm();
    require(std::isfinite(norm), ErrorCode::kNumeric, "non-finite point at row " + std::to_string(i));
    require(std::abs(norm - 1.0) <= kUnitTolerance, ErrorCode::kInvalidArgument,
            "row " + std::to_string(i) + " is not unit norm (norm " + std::to_string(norm) + ")");
  }
  return PointSet(std::move(rows));
}

PointSet sample_uniform_sphere(int d, int n, RngSeed seed) {
  check_dims(d, n);
  Engine eng = make_engine(seed);
  std::normal_distribution<double> gauss;
  RowMatrix pts(n, d);
  for (int i = 0; i < n; ++i) draw_unit(eng, gauss, pts.row(i));
  return normalize(pts);
}

PointSet sample_positive_orthant(int d, int n, RngSeed seed) {
  PointSet base = sample_uniform_sphere(d, n, seed);
  return normalize(base.points().cwiseAbs());
}

bool in_orthant_or_negative(VecRef u) {
  return (u.array() >= 0.0).all() || (u.array() <= 0.0).all();
}

double orthant_complement_acceptance(int d) { return 1.0 - std::ldexp(1.0, 1 - d); }

PointSet sample_orthant_complement(int d, int n, RngSeed seed) {
  check_dims(d, n);
  Engine eng = make_engine(seed);
  std::normal_distribution<double> gauss;
  RowMatrix pts(n, d);
  Eigen::VectorXd candidate(d);
  for (int i = 0; i < n; ++i) {
    do {
      draw_unit(eng, gauss, candidate);
    } while (in_orthant_or_negative(candidate));
    pts.row(i) = candidate.transpose();
  }
  return normalize(pts);
}

double angular_distance(VecRef u, VecRef v) {
  require(u.size() == v.size(), ErrorCode::kDimension, "angular_distance: dimension mismatch");
  const double s = u.dot(v);
  require(std::isfinite(s), ErrorCode::kNumeric, "angular_distance: non-finite input");
  return std::acos(std::clamp(s, -1.0, 1.0)) / M_PI;
}

Eigen::VectorXd row_norms(const RowMatrix& raw) { return raw.rowwise().norm(); }

PointSet normalize(const RowMatrix& raw) {
  check_dims(static_cast<int>(raw.cols()), static_cast<int>(raw.rows()));
  RowMatrix out(raw.rows(), raw.cols());
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const double norm = raw.row(i).norm();
    require(std::isfinite(norm), ErrorCode::kNumeric, "non-finite weight at row " + std::to_string(i));
    require(norm > 0.0, ErrorCode::kDegenerateWeight,
            "zero-norm row " + std::to_string(i) + " has no direction");
    out.row(i) = raw.row(i) / norm;
  }
  return PointSet(std::move(out));
}

void write_points_csv(std::ostream& out, const RowMatrix& points) {
  out << "# dim=" << points.cols() << " count=" << points.rows() << '\n';
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
      if (j) out << ',';
      out << points(i, j);
    }
    out << '\n';
  }
}

void write_points_csv(const std::filesystem::path& path, const RowMatrix& points) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  write_points_csv(out, points);
}

RowMatrix read_points_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kParse, "point CSV: missing header");
  long dim = 0, count = 0;
  if (std::sscanf(line.c_str(), "# dim=%ld count=%ld", &dim, &count) != 2)
    fail(ErrorCode::kParse, "point CSV: malformed header '" + line + "'");
  require(dim >= 1 && count >= 1, ErrorCode::kParse, "point CSV: invalid dim/count in header");
  RowMatrix pts(count, dim);
  for (long i = 0; i < count; ++i) {
    require(static_cast<bool>(std::getline(in, line)), ErrorCode::kParse,
            "point CSV: expected " + std::to_string(count) + " rows, got " + std::to_string(i));
    std::stringstream ss(line);
    std::string cell;
    long j = 0;
    while (std::getline(ss, cell, ',')) {
      require(j < dim, ErrorCode::kParse, "point CSV: too many columns in row " + std::to_string(i));
      try {
        std::size_t used = 0;
        pts(i, j) = std::stod(cell, &used);
      } catch (const std::exception&) {
        fail(ErrorCode::kParse, "point CSV: bad number '" + cell + "' in row " + std::to_string(i));
      }
      ++j;
    }
    require(j == dim, ErrorCode::kParse, "point CSV: row " + std::to_string(i) + " has " +
                                             std::to_string(j) + " columns, expected " + std::to_string(dim));
  }
  return pts;
}

RowMatrix read_points_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  return read_points_csv(in);
}

}  // namespace reluspec
