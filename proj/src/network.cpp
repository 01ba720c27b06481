#include "reluspec/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "reluspec/discrepancy.hpp"

namespace reluspec {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

ReluNetwork::ReluNetwork(Eigen::VectorXd signs, RowMatrix weights)
    : signs_(std::move(signs)), weights_(std::move(weights)) {
  require(weights_.rows() >= 1 && weights_.cols() >= 1, ErrorCode::kDimension, "network needs n >= 1 and d >= 1");
  require(signs_.size() == weights_.rows(), ErrorCode::kDimension, "sign vector length must equal the number of units");
  for (Eigen::Index k = 0; k < signs_.size(); ++k) {
    require(signs_[k] == 1.0 || signs_[k] == -1.0, ErrorCode::kInvalidArgument, "output signs must be exactly +1 or -1");
  }
  require(weights_.allFinite(), ErrorCode::kNumeric, "non-finite weight");
}

double ReluNetwork::weight_budget() const { return weights_.rowwise().norm().sum(); }

Dataset Dataset::make(PointSet x, Eigen::VectorXd y, double y_bound) {
  require(y.size() == x.count(), ErrorCode::kDimension, "label count must equal the number of inputs");
  require(std::isfinite(y_bound) && y_bound >= 0.0, ErrorCode::kInvalidArgument, "label bound must be finite and >= 0");
  for (Eigen::Index l = 0; l < y.size(); ++l) {
    require(std::isfinite(y[l]), ErrorCode::kNumeric, "non-finite label");
    if (std::abs(y[l]) > y_bound * (1.0 + 1e-12) + 1e-300) {
      std::ostringstream msg;
      msg << "label " << l << " has |y| = " << std::abs(y[l]) << " above the bound " << y_bound;
      fail(ErrorCode::kInvalidArgument, msg.str());
    }
  }
  return Dataset{std::move(x), std::move(y), y_bound};
}

double forward(const ReluNetwork& net, VecRef x) {
  require(x.size() == net.dim(), ErrorCode::kDimension, "input dimension does not match the network");
  const Eigen::VectorXd z = net.weights() * x;
  return net.signs().dot(z.cwiseMax(0.0));
}

Eigen::VectorXd forward_batch(const ReluNetwork& net, const RowMatrix& x) {
  require(x.cols() == net.dim(), ErrorCode::kDimension, "input dimension does not match the network");
  const Eigen::MatrixXd z = x * net.weights().transpose();
  return z.cwiseMax(0.0) * net.signs();
}

double loss(const ReluNetwork& net, const Dataset& data) {
  const Eigen::VectorXd r = forward_batch(net, data.x.points()) - data.y;
  return 0.5 * r.squaredNorm() / static_cast<double>(data.size());
}

double mean_squared_error(const ReluNetwork& net, const Dataset& data) { return 2.0 * loss(net, data); }

namespace {

// Gradient of (1/2B) sum (f - y)^2 over the rows of x; returns the loss.
double batch_gradient(const ReluNetwork& net, const RowMatrix& x, const Eigen::VectorXd& y, double c,
                      RowMatrix& grad) {
  const Eigen::Index batch = x.rows();
  Eigen::MatrixXd z = x * net.weights().transpose();  // B x n
  const Eigen::VectorXd f = z.cwiseMax(0.0) * net.signs();
  const Eigen::VectorXd res = (f - y) / static_cast<double>(batch);
  const Eigen::VectorXd& v = net.signs();
  for (Eigen::Index k = 0; k < z.cols(); ++k) {
    for (Eigen::Index l = 0; l < batch; ++l) {
      z(l, k) = res[l] * v[k] * relu_subgradient(z(l, k), c);
    }
  }
  grad.noalias() = z.transpose() * x;
  return 0.5 * (f - y).squaredNorm() / static_cast<double>(batch);
}

}  // namespace

Gradient gradient(const ReluNetwork& net, const Dataset& data, double subgradient_c) {
  require(data.x.dim() == net.dim(), ErrorCode::kDimension, "data dimension does not match the network");
  Gradient g;
  g.grad.resize(net.units(), net.dim());
  batch_gradient(net, data.x.points(), data.y, subgradient_c, g.grad);
  g.norm = g.grad.norm();
  return g;
}

RegularizerHook diversity_hook() {
  return [](const RowMatrix& w, RowMatrix& grad) -> double {
    grad.setZero(w.rows(), w.cols());
    const Eigen::VectorXd norms = row_norms(w);
    std::vector<Eigen::Index> live;
    for (Eigen::Index k = 0; k < w.rows(); ++k) {
      if (norms[k] > 0.0) live.push_back(k);
    }
    if (live.size() < 2) return 0.0;
    if (live.size() == static_cast<std::size_t>(w.rows())) return diversity_regularizer_with_gradient(w, grad);
    RowMatrix sub(static_cast<Eigen::Index>(live.size()), w.cols());
    for (std::size_t i = 0; i < live.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = w.row(live[i]);
    RowMatrix sub_grad;
    const double value = diversity_regularizer_with_gradient(sub, sub_grad);
    for (std::size_t i = 0; i < live.size(); ++i) grad.row(live[i]) = sub_grad.row(static_cast<Eigen::Index>(i));
    return value;
  };
}

namespace {

void validate(const TrainConfig& c, const Dataset& data) {
  require(c.batch_size >= 1 && c.batch_size <= data.size(), ErrorCode::kConfig, "batch_size must lie in [1, m]");
  require(c.learning_rate >= 0.0 && std::isfinite(c.learning_rate), ErrorCode::kConfig,
          "learning_rate must be finite and >= 0");
  require(c.momentum >= 0.0 && c.momentum < 1.0, ErrorCode::kConfig, "momentum must lie in [0, 1)");
  require(c.iterations >= 0, ErrorCode::kConfig, "iterations must be >= 0");
  require(c.reg_coefficient >= 0.0, ErrorCode::kConfig, "reg_coefficient must be >= 0");
  require(c.subgradient_c >= 0.0 && c.subgradient_c <= 1.0, ErrorCode::kConfig, "subgradient_c must lie in [0, 1]");
  require(c.eval_every >= 1, ErrorCode::kConfig, "eval_every must be >= 1");
  require(!c.weight_budget || *c.weight_budget > 0.0, ErrorCode::kConfig, "weight budget must be > 0");
}

double l2_of_live_rows(const RowMatrix& w) {
  const Eigen::VectorXd norms = row_norms(w);
  std::vector<Eigen::Index> live;
  for (Eigen::Index k = 0; k < w.rows(); ++k) {
    if (norms[k] > 0.0) live.push_back(k);
  }
  if (live.empty()) return std::nan("");
  RowMatrix sub(static_cast<Eigen::Index>(live.size()), w.cols());
  for (std::size_t i = 0; i < live.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = w.row(live[i]);
  return l2_discrepancy_closed(normalize(sub));
}

}  // namespace

TrainingTrace sgd_train(ReluNetwork& net, const Dataset& data, const TrainConfig& config, const RegularizerHook& hook) {
  validate(config, data);
  require(data.x.dim() == net.dim(), ErrorCode::kDimension, "data dimension does not match the network");

  const int m = data.size();
  const int d = net.dim();
  const int bsz = config.batch_size;
  const bool use_reg = config.reg_coefficient > 0.0 && hook;
  const bool want_r = static_cast<bool>(hook) && net.units() >= 2;
  RowMatrix& w = net.mutable_weights();

  Engine rng = make_engine(config.seed);
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  RowMatrix xb(bsz, d);
  Eigen::VectorXd yb(bsz);
  RowMatrix g(net.units(), d);
  RowMatrix reg_grad(net.units(), d);
  RowMatrix velocity = RowMatrix::Zero(net.units(), d);
  TrainingTrace trace;

  auto record = [&](std::int64_t it, double grad_norm) {
    TraceRow row;
    row.iteration = it;
    row.loss = loss(net, data);
    row.grad_norm = grad_norm;
    row.l2_squared = std::nan("");
    row.regularizer = std::nan("");
    const bool finite = std::isfinite(row.loss) && w.allFinite();
    if (finite && config.trace_discrepancy) row.l2_squared = l2_of_live_rows(w);
    RowMatrix scratch;
    if (finite && want_r) row.regularizer = hook(w, scratch);
    trace.rows.push_back(row);
    if (!finite) {
      std::ostringstream msg;
      msg << "training diverged at iteration " << it << " (loss " << row.loss << ")";
      throw TrainingDiverged(msg.str(), trace);
    }
  };

  record(0, gradient(net, data, config.subgradient_c).norm);

  for (std::int64_t it = 1; it <= config.iterations; ++it) {
    for (int b = 0; b < bsz; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const int idx = order[cursor++];
      xb.row(b) = data.x.points().row(idx);
      yb[b] = data.y[idx];
    }
    const double batch_loss = batch_gradient(net, xb, yb, config.subgradient_c, g);
    if (use_reg) {
      hook(w, reg_grad);
      g += config.reg_coefficient * reg_grad;
    }
    if (!std::isfinite(batch_loss) || !g.allFinite()) {
      std::ostringstream msg;
      msg << "non-finite minibatch loss or gradient at iteration " << it;
      throw TrainingDiverged(msg.str(), trace);
    }
    if (config.learning_rate > 0.0) {
      velocity = config.momentum * velocity - config.learning_rate * g;
      w += velocity;
      if (config.weight_budget) {
        const double total = w.rowwise().norm().sum();
        if (total > *config.weight_budget) w *= *config.weight_budget / total;
      }
    }
    if (it % config.eval_every == 0 || it == config.iterations) {
      record(it, gradient(net, data, config.subgradient_c).norm);
    }
  }
  return trace;
}

Eigen::VectorXd random_signs(int n, RngSeed seed) {
  require(n >= 1, ErrorCode::kDimension, "n must be >= 1");
  Engine rng = make_engine(seed);
  std::bernoulli_distribution coin(0.5);
  Eigen::VectorXd v(n);
  for (int k = 0; k < n; ++k) v[k] = coin(rng) ? 1.0 : -1.0;
  return v;
}

namespace {

Dataset label(const ReluNetwork& teacher, PointSet x) {
  Eigen::VectorXd y = forward_batch(teacher, x.points());
  return Dataset::make(std::move(x), std::move(y), teacher.weight_budget());
}

}  // namespace

TeacherStudent make_teacher_student(const TeacherStudentConfig& c) {
  require(c.d >= 2 && c.n_teacher >= 1 && c.n_student >= 1 && c.m_train >= 1 && c.m_test >= 1 && c.m_validation >= 0,
          ErrorCode::kDimension, "teacher-student sizes must be positive");
  ReluNetwork teacher(random_signs(c.n_teacher, c.teacher_seed.with_stream(c.teacher_seed.stream * 2 + 1)),
                      sample_uniform_sphere(c.d, c.n_teacher, c.teacher_seed).points());
  const double scale = c.student_init_scale > 0.0 ? c.student_init_scale : 1.0 / std::sqrt(double(c.n_student));
  ReluNetwork student(random_signs(c.n_student, c.student_seed.with_stream(c.student_seed.stream * 2 + 1)),
                      sample_uniform_sphere(c.d, c.n_student, c.student_seed).points() * scale);
  const RngSeed ds = c.data_seed;
  Dataset train = label(teacher, sample_uniform_sphere(c.d, c.m_train, ds.with_stream(ds.stream * 3)));
  Dataset test = label(teacher, sample_uniform_sphere(c.d, c.m_test, ds.with_stream(ds.stream * 3 + 1)));
  std::optional<Dataset> val;
  if (c.m_validation > 0) val = label(teacher, sample_uniform_sphere(c.d, c.m_validation, ds.with_stream(ds.stream * 3 + 2)));
  return TeacherStudent{std::move(teacher), std::move(student), std::move(train), std::move(test), std::move(val)};
}

double generalization_bound(double y_bound, double weight_budget, double m, double delta) {
  require(y_bound > 0.0 && weight_budget > 0.0 && m > 0.0, ErrorCode::kInvalidArgument,
          "Y, C_W and m must be positive");
  require(delta > 0.0 && delta < 1.0, ErrorCode::kInvalidArgument, "delta must lie in (0, 1)");
  const double y = y_bound, cw = weight_budget;
  return 2.0 * (y + cw) * cw / std::sqrt(m) + (y * y + cw * cw) * std::sqrt(std::log(1.0 / delta) / (2.0 * m));
}

namespace {
constexpr const char* kCheckpointFormat = "reluspec-checkpoint";
constexpr int kCheckpointVersion = 1;
}  // namespace

void write_checkpoint(std::ostream& out, const ReluNetwork& net) {
  nlohmann::json header;
  header["format"] = kCheckpointFormat;
  header["version"] = kCheckpointVersion;
  header["d"] = net.dim();
  header["n"] = net.units();
  std::vector<int> v(static_cast<std::size_t>(net.units()));
  for (int k = 0; k < net.units(); ++k) v[static_cast<std::size_t>(k)] = net.signs()[k] > 0 ? 1 : -1;
  header["v"] = v;
  header["weights_bytes"] = static_cast<std::uint64_t>(net.units()) * net.dim() * sizeof(double);
  out << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(net.weights().data()),
            static_cast<std::streamsize>(net.weights().size() * sizeof(double)));
  require(static_cast<bool>(out), ErrorCode::kIo, "failed to write checkpoint");
}

void write_checkpoint(const std::filesystem::path& path, const ReluNetwork& net) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  write_checkpoint(out, net);
}

ReluNetwork read_checkpoint(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kParse, "checkpoint: missing header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("checkpoint: header is not valid JSON: ") + e.what());
  }
  try {
    require(header.value("format", std::string()) == kCheckpointFormat, ErrorCode::kParse,
            "checkpoint: unknown format tag");
    require(header.at("version").get<int>() == kCheckpointVersion, ErrorCode::kParse,
            "checkpoint: unsupported version");
    const int d = header.at("d").get<int>();
    const int n = header.at("n").get<int>();
    require(d >= 1 && n >= 1, ErrorCode::kParse, "checkpoint: d and n must be positive");
    const auto v = header.at("v").get<std::vector<int>>();
    require(v.size() == static_cast<std::size_t>(n), ErrorCode::kParse, "checkpoint: sign vector length != n");
    const auto bytes = header.at("weights_bytes").get<std::uint64_t>();
    require(bytes == static_cast<std::uint64_t>(n) * d * sizeof(double), ErrorCode::kParse,
            "checkpoint: weights_bytes inconsistent with n and d");
    Eigen::VectorXd signs(n);
    for (int k = 0; k < n; ++k) {
      require(v[static_cast<std::size_t>(k)] == 1 || v[static_cast<std::size_t>(k)] == -1, ErrorCode::kParse,
              "checkpoint: signs must be +1 or -1");
      signs[k] = v[static_cast<std::size_t>(k)];
    }
    RowMatrix w(n, d);
    in.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(bytes));
    require(static_cast<std::uint64_t>(in.gcount()) == bytes, ErrorCode::kParse, "checkpoint: truncated weight block");
    require(in.peek() == std::char_traits<char>::eof(), ErrorCode::kParse, "checkpoint: trailing bytes");
    require(w.allFinite(), ErrorCode::kParse, "checkpoint: non-finite weight");
    return ReluNetwork(std::move(signs), std::move(w));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("checkpoint: malformed header field: ") + e.what());
  }
}

ReluNetwork read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  return read_checkpoint(in);
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  const int d = data.x.dim();
  for (int j = 0; j < d; ++j) out << 'x' << (j + 1) << ',';
  out << "y\n";
  out.precision(17);
  for (int l = 0; l < data.size(); ++l) {
    for (int j = 0; j < d; ++j) out << data.x.points()(l, j) << ',';
    out << data.y[l] << '\n';
  }
  require(static_cast<bool>(out), ErrorCode::kIo, "failed to write " + path.string());
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line, std::size_t col) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end == s.c_str() || *end != '\0' || !std::isfinite(v)) {
    std::ostringstream msg;
    msg << "dataset line " << line << ", column " << col << ": not a finite number: '" << s << "'";
    fail(ErrorCode::kParse, msg.str());
  }
  return v;
}

}  // namespace

Dataset read_dataset_csv(const std::filesystem::path& path, bool renormalize, double y_bound) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kParse, "dataset: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv(line);
  require(header.size() >= 3 && header.back() == "y", ErrorCode::kParse,
          "dataset: header must be x1,...,xd,y with d >= 2");
  const std::size_t d = header.size() - 1;
  std::vector<double> xs, ys;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != d + 1) {
      std::ostringstream msg;
      msg << "dataset line " << lineno << ": expected " << d + 1 << " fields, got " << fields.size();
      fail(ErrorCode::kParse, msg.str());
    }
    for (std::size_t j = 0; j < d; ++j) xs.push_back(parse_double(fields[j], lineno, j + 1));
    ys.push_back(parse_double(fields[d], lineno, d + 1));
  }
  require(!ys.empty(), ErrorCode::kParse, "dataset: no examples");
  const auto m = static_cast<Eigen::Index>(ys.size());
  RowMatrix x = Eigen::Map<RowMatrix>(xs.data(), m, static_cast<Eigen::Index>(d));
  Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(ys.data(), m);
  PointSet points = renormalize ? normalize(x) : PointSet::from_unit_rows(std::move(x));
  const double bound = y_bound > 0.0 ? y_bound : y.cwiseAbs().maxCoeff();
  return Dataset::make(std::move(points), std::move(y), bound);
}

}  // namespace reluspec
