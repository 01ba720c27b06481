#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "reluspec/error.hpp"
#include "reluspec/rng.hpp"
#include "reluspec/sphere.hpp"

namespace reluspec {

/// f(x; v, W) = sum_k v_k max(0, w_k . x) with fixed signs v_k in {-1, +1}.
class ReluNetwork {
 public:
  ReluNetwork(Eigen::VectorXd signs, RowMatrix weights);

  int dim() const { return static_cast<int>(weights_.cols()); }
  int units() const { return static_cast<int>(weights_.rows()); }
  const Eigen::VectorXd& signs() const { return signs_; }
  const RowMatrix& weights() const { return weights_; }
  RowMatrix& mutable_weights() { return weights_; }

  /// sum_k ||w_k||, compared against the budget C_W.
  double weight_budget() const;

 private:
  Eigen::VectorXd signs_;
  RowMatrix weights_;
};

/// Training examples with unit-norm inputs and |y| <= y_bound.
struct Dataset {
  PointSet x;
  Eigen::VectorXd y;
  double y_bound = 0.0;

  static Dataset make(PointSet x, Eigen::VectorXd y, double y_bound);
  int size() const { return x.count(); }
};

/// sigma'(u): 1 for u > 0, c for u == 0, 0 for u < 0.
inline double relu_subgradient(double u, double c) { return u > 0.0 ? 1.0 : (u == 0.0 ? c : 0.0); }

double forward(const ReluNetwork& net, VecRef x);
Eigen::VectorXd forward_batch(const ReluNetwork& net, const RowMatrix& x);

/// (1 / 2m) sum_l (y_l - f(x_l))^2.
double loss(const ReluNetwork& net, const Dataset& data);

/// Per-example mean squared error (1/m) sum (y - f)^2.
double mean_squared_error(const ReluNetwork& net, const Dataset& data);

struct Gradient {
  RowMatrix grad;  // n x d, row k is dL/dw_k
  double norm = 0.0;
};

Gradient gradient(const ReluNetwork& net, const Dataset& data, double subgradient_c = 0.0);

struct TrainConfig {
  int batch_size = 100;
  double learning_rate = 0.1;
  double momentum = 0.0;
  std::int64_t iterations = 5000;
  double reg_coefficient = 0.0;
  RngSeed seed{};
  double subgradient_c = 0.0;
  std::int64_t eval_every = 500;
  /// When set, W is rescaled after each step so sum_k ||w_k|| <= budget.
  std::optional<double> weight_budget;
  /// Computes (L2)^2 of the normalized weights for each trace row.
  bool trace_discrepancy = true;
};

struct TraceRow {
  std::int64_t iteration = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double l2_squared = 0.0;
  double regularizer = 0.0;
};

struct TrainingTrace {
  std::vector<TraceRow> rows;
};

/// Raised when the loss or the update becomes non-finite; carries the trace
/// recorded so far.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, TrainingTrace trace)
      : Error(ErrorCode::kNumeric, what), trace_(std::move(trace)) {}
  const TrainingTrace& trace() const { return trace_; }

 private:
  TrainingTrace trace_;
};

/// Value and gradient of a penalty on W; returns the value and writes the
/// gradient into `grad`.
using RegularizerHook = std::function<double(const RowMatrix& weights, RowMatrix& grad)>;

/// The diversity regularizer R(W), ignoring zero rows (they never activate).
RegularizerHook diversity_hook();

/// Minibatch SGD with momentum on the least-squares loss plus
/// reg_coefficient * hook(W):
///   velocity = momentum * velocity - lr * (g + lambda dR/dW);  W += velocity.
/// Minibatches are drawn without replacement and reshuffled every epoch.
/// The signs v stay fixed.
TrainingTrace sgd_train(ReluNetwork& net, const Dataset& data, const TrainConfig& config,
                        const RegularizerHook& hook = diversity_hook());

struct TeacherStudentConfig {
  int d = 50;
  int n_teacher = 50;
  int n_student = 100;
  int m_train = 1000;
  int m_test = 1000;
  int m_validation = 0;
  /// Student rows are uniform directions times this scale; <= 0 means 1/sqrt(n_student).
  double student_init_scale = 0.0;
  RngSeed teacher_seed{1, 0};
  RngSeed student_seed{2, 0};
  RngSeed data_seed{3, 0};
};

struct TeacherStudent {
  ReluNetwork teacher;
  ReluNetwork student;
  Dataset train;
  Dataset test;
  std::optional<Dataset> validation;
};

TeacherStudent make_teacher_student(const TeacherStudentConfig& config);

/// Random +-1 signs.
Eigen::VectorXd random_signs(int n, RngSeed seed);

/// 2 (Y + C_W) C_W / sqrt(m) + (Y^2 + C_W^2) sqrt(log(1/delta) / (2m)).
double generalization_bound(double y_bound, double weight_budget, double m, double delta);

// Checkpoint: one JSON line {"format","version","d","n","v"} followed by the
// n*d weights as little-endian float64, row-major.
void write_checkpoint(std::ostream& out, const ReluNetwork& net);
void write_checkpoint(const std::filesystem::path& path, const ReluNetwork& net);
ReluNetwork read_checkpoint(std::istream& in);
ReluNetwork read_checkpoint(const std::filesystem::path& path);

// Dataset CSV: header x1,...,xd,y then one example per row.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);
/// Reads a dataset; inputs must be unit norm unless `renormalize` is set.
/// A zero y_bound means "use max |y|".
Dataset read_dataset_csv(const std::filesystem::path& path, bool renormalize = false, double y_bound = 0.0);

}  // namespace reluspec
