#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <iosfwd>

#include "reluspec/rng.hpp"

namespace reluspec {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VecRef = Eigen::Ref<const Eigen::VectorXd>;

/// n unit vectors in R^d stored as the rows of an n x d matrix.
///
/// Construction validates that every row has norm 1 within `kUnitTolerance`;
/// arbitrary-norm weight matrices stay as plain `RowMatrix` and are brought
/// into this form with `normalize`.
class PointSet {
 public:
  static constexpr double kUnitTolerance = 1e-9;

  static PointSet from_unit_rows(RowMatrix rows);

  int dim() const { return static_cast<int>(points_.cols()); }
  int count() const { return static_cast<int>(points_.rows()); }
  const RowMatrix& points() const { return points_; }
  auto row(int i) const { return points_.row(i).transpose(); }

 private:
  explicit PointSet(RowMatrix rows) : points_(std::move(rows)) {}
  friend PointSet normalize(const RowMatrix& raw);
  RowMatrix points_;
};

PointSet sample_uniform_sphere(int d, int n, RngSeed seed);

/// Uniform on E = {u : u_i >= 0 for all i}, via coordinate-wise |.| of a
/// uniform draw.
PointSet sample_positive_orthant(int d, int n, RngSeed seed);

/// Uniform on S^{d-1} minus (E u -E) by rejection. A draw with every
/// coordinate >= 0 (or every coordinate <= 0) is rejected, so zeros count as
/// inside E. The accepted points are the subsequence of the draws that
/// `sample_uniform_sphere` makes under the same seed.
PointSet sample_orthant_complement(int d, int n, RngSeed seed);

/// Acceptance probability of the orthant-complement sampler: 1 - 2^{1-d}.
double orthant_complement_acceptance(int d);

bool in_orthant_or_negative(VecRef u);

/// arccos(<u,v>)/pi with the inner product clamped to [-1, 1].
double angular_distance(VecRef u, VecRef v);

/// Divides each row by its norm; a zero row raises kDegenerateWeight.
PointSet normalize(const RowMatrix& raw);

/// Row norms of an arbitrary weight matrix.
Eigen::VectorXd row_norms(const RowMatrix& raw);

// CSV: header "# dim=d count=n", then one point per row, 17 significant digits.
void write_points_csv(std::ostream& out, const RowMatrix& points);
void write_points_csv(const std::filesystem::path& path, const RowMatrix& points);
RowMatrix read_points_csv(std::istream& in);
RowMatrix read_points_csv(const std::filesystem::path& path);

}  // namespace reluspec
