#include "reluspec/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <Eigen/Core>
#include <boost/version.hpp>

#include "reluspec/discrepancy.hpp"
#include "reluspec/error.hpp"
#include "reluspec/kernels.hpp"
#include "reluspec/memory.hpp"
#include "reluspec/network.hpp"
#include "reluspec/plot.hpp"
#include "reluspec/spectral.hpp"
#include "reluspec/stats.hpp"

#ifndef RELUSPEC_VERSION
#define RELUSPEC_VERSION "0.1.0"
#endif

namespace reluspec {

namespace fs = std::filesystem;
using nlohmann::json;

const char* library_version() { return RELUSPEC_VERSION; }

bool ExperimentResult::gates_passed() const {
  return std::all_of(gates.begin(), gates.end(), [](const Gate& g) { return g.passed; });
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"spectrum",     "gram-concentration", "discrepancy-sweep",
                                              "regularize-compare", "train-table2", "table1", "report"};
  return names;
}

namespace {

// Shortest round-trip representation keeps CSVs byte-stable and exact.
std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Csv {
 public:
  Csv(const fs::path& path, const std::vector<std::string>& header) : out_(path, std::ios::binary), path_(path) {
    require(static_cast<bool>(out_), ErrorCode::kIo, "cannot open " + path.string() + " for writing");
    row(header);
  }
  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << fields[i];
    out_ << '\n';
  }
  ~Csv() { out_.flush(); }

 private:
  std::ofstream out_;
  fs::path path_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs body(i) for i in [0, count) on up to `jobs` threads. Results must be
// written to per-index slots so the outcome does not depend on scheduling.
void parallel_for(int count, int jobs, const std::function<void(int)>& body) {
  jobs = std::clamp(jobs, 1, std::max(1, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// Per-experiment view of the config: typed getters that also record the
// effective value of every parameter for the summary.
struct Params {
  const Config& cfg;
  bool full = false;
  json effective = json::object();

  Params(const Config& c, const std::set<std::string>& known) : cfg(c) {
    std::set<std::string> all = known;
    all.insert({"experiment", "mode", "seed", "jobs", "mem_budget_bytes"});
    cfg.check_known(all);
    const std::string mode = cfg.get_string("mode", "scaled");
    require(mode == "scaled" || mode == "full", ErrorCode::kConfig,
            (cfg.has("mode") ? cfg.entries().at("mode").origin : std::string("mode")) +
                ": field 'mode' expects scaled or full, got '" + mode + "'");
    full = mode == "full";
    effective["mode"] = mode;
  }

  long long i(const std::string& key, long long scaled, long long full_value) {
    const long long v = cfg.get_int(key, full ? full_value : scaled);
    effective[key] = v;
    return v;
  }
  long long i(const std::string& key, long long dflt) { return i(key, dflt, dflt); }
  long long positive(const std::string& key, long long scaled, long long full_value) {
    const long long v = i(key, scaled, full_value);
    if (v < 1) fail(ErrorCode::kConfig, origin(key) + ": field '" + key + "' must be >= 1");
    return v;
  }
  long long positive(const std::string& key, long long dflt) { return positive(key, dflt, dflt); }
  double d(const std::string& key, double dflt) {
    const double v = cfg.get_double(key, dflt);
    effective[key] = v;
    return v;
  }
  std::string s(const std::string& key, const std::string& dflt) {
    const std::string v = cfg.get_string(key, dflt);
    effective[key] = v;
    return v;
  }
  std::vector<long long> il(const std::string& key, const std::vector<long long>& scaled,
                            const std::vector<long long>& full_value) {
    const auto v = cfg.get_int_list(key, full ? full_value : scaled);
    effective[key] = v;
    return v;
  }
  std::vector<long long> il(const std::string& key, const std::vector<long long>& dflt) { return il(key, dflt, dflt); }
  std::vector<double> dl(const std::string& key, const std::vector<double>& dflt) {
    const auto v = cfg.get_double_list(key, dflt);
    effective[key] = v;
    return v;
  }
  std::string origin(const std::string& key) const {
    return cfg.has(key) ? cfg.entries().at(key).origin : std::string("default");
  }
  RngSeed seed() {
    const long long v = cfg.get_int("seed", 20240601);
    effective["seed"] = v;
    return RngSeed{static_cast<std::uint64_t>(v), 0};
  }
  int jobs() { return static_cast<int>(std::max<long long>(1, cfg.get_int("jobs", 1))); }
};

struct Context {
  fs::path dir;
  ExperimentResult result;

  fs::path file(const std::string& name) {
    result.files.push_back(name);
    return dir / name;
  }
  void gate(const std::string& name, bool passed, const std::string& detail) {
    result.gates.push_back(Gate{name, passed, detail});
  }
};

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// ---------------------------------------------------------------- spectrum

void run_spectrum(const Config& cfg, Context& ctx) {
  Params p(cfg, {"kernel", "d", "max_order", "fit_first", "fit_last", "expanded_cap", "compare_kernel", "beta_max"});
  const std::string kernel_name = p.s("kernel", "relu-g");
  const int d = static_cast<int>(p.i("d", 1500));
  SpectrumConfig sc;
  sc.max_order = static_cast<int>(p.positive("max_order", 10));
  sc.expanded_cap = static_cast<std::size_t>(p.positive("expanded_cap", 1'000'000));
  const auto first = static_cast<std::size_t>(p.positive("fit_first", 10));
  const auto last = static_cast<std::size_t>(p.positive("fit_last", 100'000));
  const double beta_max = p.d("beta_max", 1.05);
  const std::string compare = p.s("compare_kernel", "");
  require(first < last, ErrorCode::kConfig, "fit_first must be below fit_last");

  const DotProductKernel kernel = DotProductKernel::parse(kernel_name);
  const KernelSpectrum spec = kernel_spectrum(kernel, d, sc);
  require(spec.expanded.size() >= last, ErrorCode::kConfig,
          "expanded spectrum has only " + std::to_string(spec.expanded.size()) +
              " entries; raise max_order or expanded_cap, or lower fit_last");

  {
    Csv csv(ctx.file("spectrum_orders.csv"), {"t", "gamma_t", "multiplicity", "cumulative_index"});
    for (const auto& o : spec.orders) {
      csv.row({std::to_string(o.t), num(o.gamma), o.multiplicity.str(), o.cumulative_index.str()});
    }
  }
  const std::size_t rows = std::min(spec.expanded.size(), std::max(last, std::size_t{1000}));
  std::vector<double> xs, ys;
  {
    Csv csv(ctx.file("spectrum_expanded.csv"), {"m", "gamma_m"});
    for (std::size_t i = 0; i < rows; ++i) {
      csv.row({std::to_string(i + 1), num(spec.expanded[i])});
      xs.push_back(double(i + 1));
      ys.push_back(spec.expanded[i]);
    }
  }
  const double beta = decay_exponent(spec, first, last);

  PlotSpec plot{"Sorted eigenvalues of the " + kernel_name + " kernel, d=" + std::to_string(d), "index m", "gamma_m",
                true, true, {}, {}};
  plot.series.push_back({kernel_name, xs, ys, PlotSeries::Style::kLine});
  // Reference 1/m line through gamma at fit_first.
  const double anchor = spec.expanded[first - 1] * double(first);
  plot.series.push_back({"c/m", {double(first), double(last)}, {anchor / double(first), anchor / double(last)},
                         PlotSeries::Style::kLine});

  json& s = ctx.result.summary;
  s["beta"] = beta;
  s["fit_range"] = {first, last};
  s["expanded_length"] = spec.expanded.size();
  s["truncated"] = spec.truncated;

  if (!compare.empty()) {
    const KernelSpectrum other = kernel_spectrum(DotProductKernel::parse(compare), d, sc);
    Csv csv(ctx.file("spectrum_compare.csv"), {"m", "gamma_" + kernel_name, "gamma_" + compare, "ratio"});
    std::vector<double> ratios;
    std::vector<double> ox, oy;
    const std::size_t n = std::min({rows, other.expanded.size()});
    for (std::size_t i = 0; i < n; ++i) {
      const double r = other.expanded[i] / spec.expanded[i];
      csv.row({std::to_string(i + 1), num(spec.expanded[i]), num(other.expanded[i]), num(r)});
      ox.push_back(double(i + 1));
      oy.push_back(other.expanded[i]);
    }
    plot.series.push_back({compare, ox, oy, PlotSeries::Style::kLine});
    bool increasing = true;
    std::vector<double> decade_ratios;
    for (std::size_t m = first; m <= std::min(n, last); m *= 10) {
      decade_ratios.push_back(other.expanded[m - 1] / spec.expanded[m - 1]);
    }
    for (std::size_t i = 1; i < decade_ratios.size(); ++i) increasing &= decade_ratios[i] >= decade_ratios[i - 1];
    s["compare_kernel"] = compare;
    s["compare_beta"] = decay_exponent(other, first, std::min(last, other.expanded.size()));
    s["decade_ratios"] = decade_ratios;
    ctx.gate("compare_ratio_increasing", increasing,
             compare + "/" + kernel_name + " eigenvalue ratio at m = fit_first * 10^k is nondecreasing");
  }
  write_svg(ctx.file("spectrum.svg"), plot);
  ctx.gate("beta", beta <= beta_max, "beta = " + fmt_g(beta) + " <= " + fmt_g(beta_max));
  ctx.result.summary["params"] = p.effective;
}

// ------------------------------------------------------ gram-concentration

void run_gram_concentration(const Config& cfg, Context& ctx) {
  Params p(cfg, {"d", "m", "ranks", "factor", "max_order"});
  const int d = static_cast<int>(p.i("d", 15));
  const int m = static_cast<int>(p.positive("m", 3000));
  const auto ranks = p.il("ranks", {10, 100, 1000});
  const double factor = p.d("factor", 2.0);
  SpectrumConfig sc;
  sc.max_order = static_cast<int>(p.positive("max_order", 30));
  sc.expanded_cap = static_cast<std::size_t>(m);
  const RngSeed seed = p.seed();

  const PointSet x = sample_uniform_sphere(d, m, seed.with_stream(1));
  const Eigen::VectorXd eig = eigenvalues_descending(kernel_gram_G(x)) / double(m);
  const KernelSpectrum spec = kernel_spectrum(DotProductKernel::relu_g(), d, sc);

  std::vector<double> xs, g1, g2;
  {
    Csv csv(ctx.file("gram_spectrum.csv"), {"rank", "gram_eig_over_m", "kernel_gamma"});
    for (int i = 0; i < m; ++i) {
      const double k = std::size_t(i) < spec.expanded.size() ? spec.expanded[std::size_t(i)] : std::nan("");
      csv.row({std::to_string(i + 1), num(eig[i]), num(k)});
      xs.push_back(i + 1);
      g1.push_back(eig[i]);
      g2.push_back(k);
    }
  }
  PlotSpec plot{"Gram eigenvalues / m vs kernel spectrum, d=" + std::to_string(d) + ", m=" + std::to_string(m), "rank",
                "eigenvalue", true, true, {}, {}};
  plot.series.push_back({"Gram / m", xs, g1, PlotSeries::Style::kLine});
  plot.series.push_back({"kernel gamma", xs, g2, PlotSeries::Style::kLine});
  write_svg(ctx.file("gram_spectrum.svg"), plot);

  json rows = json::array();
  for (long long r : ranks) {
    if (r < 1 || r > m || std::size_t(r) > spec.expanded.size()) continue;
    const double a = eig[r - 1], b = spec.expanded[std::size_t(r) - 1];
    const double ratio = a / b;
    rows.push_back({{"rank", r}, {"gram_eig_over_m", a}, {"kernel_gamma", b}, {"ratio", ratio},
                    {"relative_deviation", std::abs(a - b) / b}});
    ctx.gate("rank_" + std::to_string(r), b > 0 && ratio <= factor && ratio >= 1.0 / factor,
             "Gram eigenvalue/m " + fmt_g(a) + " vs kernel " + fmt_g(b) + ", ratio " + fmt_g(ratio) +
                 " (need within factor " + fmt_g(factor) + ")");
  }
  ctx.result.summary["ranks"] = rows;
  ctx.result.summary["params"] = p.effective;
}

// ------------------------------------------------------- discrepancy-sweep

void run_discrepancy_sweep(const Config& cfg, Context& ctx) {
  Params p(cfg, {"d", "n_teacher", "n_list", "seeds", "iterations", "batch_size", "learning_rate", "momentum",
                 "m_factor", "mc_pairs", "linf_slices", "slope_min", "slope_max"});
  const int d = static_cast<int>(p.i("d", 50));
  const int n_teacher = static_cast<int>(p.positive("n_teacher", 50));
  const auto n_list = p.il("n_list", {25, 50, 100, 200});
  const int seeds = static_cast<int>(p.positive("seeds", 3));
  const long long iterations = p.i("iterations", 5000);
  const int batch = static_cast<int>(p.positive("batch_size", 100));
  const double lr = p.d("learning_rate", 0.1);
  const double momentum = p.d("momentum", 0.0);
  const int m_factor = static_cast<int>(p.positive("m_factor", 20));
  const auto mc_pairs = static_cast<std::uint64_t>(p.positive("mc_pairs", 100'000));
  const auto linf_slices = static_cast<std::uint64_t>(p.positive("linf_slices", 20'000));
  const double slope_min = p.d("slope_min", -1.1), slope_max = p.d("slope_max", -0.4);
  const RngSeed seed = p.seed();
  for (long long n : n_list) require(n >= 2, ErrorCode::kConfig, "n_list entries must be >= 2");

  struct Row {
    int n, s;
    DiscrepancyReport trained, uniform;
    double final_loss, initial_loss;
  };
  const int total = static_cast<int>(n_list.size()) * seeds;
  std::vector<Row> rows(static_cast<std::size_t>(total));
  DiscrepancyReportOptions ro;
  ro.mc_pairs = mc_pairs;
  ro.linf.num_slices = linf_slices;

  parallel_for(total, p.jobs(), [&](int idx) {
    const int n = static_cast<int>(n_list[std::size_t(idx / seeds)]);
    const int s = idx % seeds;
    const std::uint64_t base = seed.seed + 1000003ull * std::uint64_t(s);
    TeacherStudentConfig tc;
    tc.d = d;
    tc.n_teacher = n_teacher;
    tc.n_student = n;
    tc.m_train = m_factor * n;
    tc.m_test = 1;
    tc.teacher_seed = {base, 1};
    tc.student_seed = {base, 1000 + std::uint64_t(n)};
    tc.data_seed = {base, 2000 + std::uint64_t(n)};
    TeacherStudent ts = make_teacher_student(tc);
    TrainConfig train;
    train.iterations = iterations;
    train.batch_size = std::min(batch, tc.m_train);
    train.learning_rate = lr;
    train.momentum = momentum;
    train.seed = {base, 3000 + std::uint64_t(n)};
    train.eval_every = std::max<long long>(1, iterations);
    train.trace_discrepancy = false;
    const TrainingTrace trace = sgd_train(ts.student, ts.train, train);
    Row r{n, s, discrepancy_report(ts.student.weights(), RngSeed{base, 4000 + std::uint64_t(n)}, ro),
          discrepancy_report(sample_uniform_sphere(d, n, {base, 5000 + std::uint64_t(n)}).points(),
                             RngSeed{base, 6000 + std::uint64_t(n)}, ro),
          trace.rows.back().loss, trace.rows.front().loss};
    rows[std::size_t(idx)] = r;
  });

  const std::vector<std::string> header{"n", "d", "seed", "l2sq_closed", "l2sq_mc", "mc_se", "linf_est", "R"};
  auto emit = [&](const std::string& name, bool uniform) {
    Csv csv(ctx.file(name), header);
    for (const Row& r : rows) {
      const DiscrepancyReport& rep = uniform ? r.uniform : r.trained;
      csv.row({std::to_string(r.n), std::to_string(d), std::to_string(r.s), num(rep.l2_squared_closed),
               num(rep.l2_squared_mc.estimate), num(rep.l2_squared_mc.standard_error), num(rep.linf_estimate),
               num(rep.regularizer)});
    }
  };
  emit("discrepancy_sweep.csv", false);
  emit("uniform_reference.csv", true);

  std::vector<double> ns, med_trained, med_uniform;
  json per_n = json::array();
  for (long long n : n_list) {
    std::vector<double> a, b, loss_ratio;
    for (const Row& r : rows) {
      if (r.n != n) continue;
      a.push_back(r.trained.l2_squared_closed);
      b.push_back(r.uniform.l2_squared_closed);
      loss_ratio.push_back(r.initial_loss / r.final_loss);
    }
    ns.push_back(double(n));
    med_trained.push_back(median(a));
    med_uniform.push_back(median(b));
    per_n.push_back({{"n", n}, {"median_l2sq_trained", med_trained.back()}, {"median_l2sq_uniform", med_uniform.back()},
                     {"median_loss_reduction", median(loss_ratio)}});
  }
  const double slope = loglog_slope(ns, med_trained);
  const double uniform_slope = loglog_slope(ns, med_uniform);
  {
    Csv csv(ctx.file("discrepancy_medians.csv"), {"n", "median_l2sq_trained", "median_l2sq_uniform"});
    for (std::size_t i = 0; i < ns.size(); ++i) csv.row({num(ns[i]), num(med_trained[i]), num(med_uniform[i])});
  }
  PlotSpec plot{"(L2)^2 after SGD vs n, d=" + std::to_string(d), "n", "(L2)^2", true, true, {}, {}};
  plot.series.push_back({"trained", ns, med_trained, PlotSeries::Style::kLine});
  plot.series.push_back({"uniform", ns, med_uniform, PlotSeries::Style::kLine});
  write_svg(ctx.file("discrepancy_sweep.svg"), plot);

  ctx.result.summary["slope"] = slope;
  ctx.result.summary["uniform_slope"] = uniform_slope;
  ctx.result.summary["per_n"] = per_n;
  ctx.result.summary["params"] = p.effective;
  ctx.gate("slope", slope >= slope_min && slope <= slope_max,
           "slope " + fmt_g(slope) + " in [" + fmt_g(slope_min) + ", " + fmt_g(slope_max) + "]");
}

// ------------------------------------------------------ regularize-compare

struct DescentResult {
  RowMatrix w;
  double r_before, r_after;
  int steps;
};

// Gradient descent on R over unit rows with Armijo backtracking.
DescentResult minimize_regularizer(RowMatrix w, int steps) {
  DescentResult out{w, 0, 0, 0};
  RowMatrix grad;
  double r = diversity_regularizer_with_gradient(w, grad);
  out.r_before = r;
  double eta = 1.0;
  for (int it = 0; it < steps; ++it) {
    const double g2 = grad.squaredNorm();
    if (g2 == 0.0) break;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      const RowMatrix trial = normalize(w - eta * grad).points();
      RowMatrix trial_grad;
      const double rt = diversity_regularizer_with_gradient(trial, trial_grad);
      if (rt <= r - 1e-4 * eta * g2) {
        w = trial;
        grad = std::move(trial_grad);
        r = rt;
        accepted = true;
        eta *= 2.0;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) break;
    out.steps = it + 1;
  }
  out.w = std::move(w);
  out.r_after = r;
  return out;
}

void run_regularize_compare(const Config& cfg, Context& ctx) {
  Params p(cfg, {"n", "d", "m", "seeds", "descent_steps", "min_improved", "p_max"});
  const int n = static_cast<int>(p.positive("n", 100));
  const int d = static_cast<int>(p.i("d", 100));
  const int m = static_cast<int>(p.positive("m", 3000));
  const int seeds = static_cast<int>(p.positive("seeds", 20));
  const int steps = static_cast<int>(p.positive("descent_steps", 100));
  const int min_improved = static_cast<int>(p.i("min_improved", (16 * seeds + 19) / 20));
  const double p_max = p.d("p_max", 0.05);
  const RngSeed seed = p.seed();
  require(n >= 2, ErrorCode::kConfig, "n must be >= 2");

  const PointSet x = sample_uniform_sphere(d, m, seed.with_stream(1));
  struct Pair {
    double r0, r1, s0, s1;
    int steps;
  };
  std::vector<Pair> pairs(static_cast<std::size_t>(seeds));
  parallel_for(seeds, p.jobs(), [&](int s) {
    const RowMatrix w0 = sample_uniform_sphere(d, n, seed.with_stream(100 + std::uint64_t(s))).points();
    const DescentResult dr = minimize_regularizer(w0, steps);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const double s0 = min_singular_value(ExtendedFeatureMatrix::build(ReluNetwork(ones, w0), x, 0.0,
                                                                      FeatureMode::kImplicit));
    const double s1 = min_singular_value(ExtendedFeatureMatrix::build(ReluNetwork(ones, dr.w), x, 0.0,
                                                                      FeatureMode::kImplicit));
    pairs[std::size_t(s)] = Pair{dr.r_before, dr.r_after, s0, s1, dr.steps};
  });

  std::vector<double> rs, ss;
  int improved = 0, decreased = 0;
  PlotSpec plot{"R(W) vs s_m(D) before and after minimizing R", "R(W)", "s_m(D)", false, false, {}, {}};
  PlotSeries before{"random W", {}, {}, PlotSeries::Style::kPoints};
  PlotSeries after{"after minimizing R", {}, {}, PlotSeries::Style::kPoints};
  {
    Csv csv(ctx.file("regularize_compare.csv"), {"seed", "stage", "R", "s_m", "descent_steps"});
    for (int s = 0; s < seeds; ++s) {
      const Pair& q = pairs[std::size_t(s)];
      csv.row({std::to_string(s), "before", num(q.r0), num(q.s0), "0"});
      csv.row({std::to_string(s), "after", num(q.r1), num(q.s1), std::to_string(q.steps)});
      rs.insert(rs.end(), {q.r0, q.r1});
      ss.insert(ss.end(), {q.s0, q.s1});
      improved += q.s1 > q.s0;
      decreased += q.r1 < q.r0;
      before.x.push_back(q.r0);
      before.y.push_back(q.s0);
      after.x.push_back(q.r1);
      after.y.push_back(q.s1);
      plot.arrows.push_back({q.r0, q.s0, q.r1, q.s1});
    }
  }
  plot.series = {before, after};
  write_svg(ctx.file("regularize_compare.svg"), plot);
  const Correlation c = spearman(rs, ss);
  json& sm = ctx.result.summary;
  sm["spearman_rho"] = c.rho;
  sm["spearman_p"] = c.p_value;
  sm["pairs_improved"] = improved;
  sm["regularizer_decreased"] = decreased;
  sm["seeds"] = seeds;
  sm["params"] = p.effective;
  ctx.gate("spearman", c.rho < 0 && c.p_value < p_max,
           "rho = " + fmt_g(c.rho) + ", p = " + fmt_g(c.p_value) + " (need rho < 0, p < " + fmt_g(p_max) + ")");
  ctx.gate("pairs_improved", improved >= min_improved,
           std::to_string(improved) + "/" + std::to_string(seeds) + " pairs improve s_m (need " +
               std::to_string(min_improved) + ")");
  ctx.gate("regularizer_decreased", decreased == seeds,
           std::to_string(decreased) + "/" + std::to_string(seeds) + " descents reduce R");
}

// ------------------------------------------------------------ train-table2

void run_train_table2(const Config& cfg, Context& ctx) {
  Params p(cfg, {"d", "n_teacher", "n_list", "seeds", "iterations", "batch_size", "learning_rate", "momentum",
                 "lambdas", "m_train", "m_validation", "m_test"});
  const int d = static_cast<int>(p.i("d", 100));
  const int n_teacher = static_cast<int>(p.positive("n_teacher", 100));
  const auto n_list = p.il("n_list", {100, 150}, {100, 150, 200, 300});
  const int seeds = static_cast<int>(p.positive("seeds", 5));
  const long long iterations = p.i("iterations", 30'000, 300'000);
  const int batch = static_cast<int>(p.positive("batch_size", 100));
  const double lr = p.d("learning_rate", 0.1);
  const double momentum = p.d("momentum", 0.9);
  const auto lambdas = p.dl("lambdas", {1.0, 0.1, 0.01, 0.001});
  const int m_train = static_cast<int>(p.positive("m_train", 10000));
  const int m_val = static_cast<int>(p.positive("m_validation", 10000));
  const int m_test = static_cast<int>(p.positive("m_test", 10000));
  const RngSeed seed = p.seed();
  for (double l : lambdas) require(l > 0, ErrorCode::kConfig, "lambdas must be positive");

  // One task per (n, seed, lambda index); index 0 is the unregularized run.
  const int per_seed = 1 + static_cast<int>(lambdas.size());
  const int total = static_cast<int>(n_list.size()) * seeds * per_seed;
  struct Run {
    double train = 0, val = 0, test = 0;
  };
  std::vector<Run> runs(static_cast<std::size_t>(total));
  parallel_for(total, p.jobs(), [&](int idx) {
    const int li = idx % per_seed;
    const int s = (idx / per_seed) % seeds;
    const int n = static_cast<int>(n_list[std::size_t(idx / (per_seed * seeds))]);
    const std::uint64_t base = seed.seed + 1000003ull * std::uint64_t(s);
    TeacherStudentConfig tc;
    tc.d = d;
    tc.n_teacher = n_teacher;
    tc.n_student = n;
    tc.m_train = m_train;
    tc.m_validation = m_val;
    tc.m_test = m_test;
    tc.teacher_seed = {base, 1};
    tc.student_seed = {base, 1000 + std::uint64_t(n)};
    tc.data_seed = {base, 2};
    TeacherStudent ts = make_teacher_student(tc);
    TrainConfig train;
    train.iterations = iterations;
    train.batch_size = std::min(batch, m_train);
    train.learning_rate = lr;
    train.momentum = momentum;
    train.reg_coefficient = li == 0 ? 0.0 : lambdas[std::size_t(li - 1)];
    train.seed = {base, 3000 + std::uint64_t(n)};
    train.eval_every = std::max<long long>(1, iterations);
    train.trace_discrepancy = false;
    sgd_train(ts.student, ts.train, train);
    runs[std::size_t(idx)] = Run{mean_squared_error(ts.student, ts.train), mean_squared_error(ts.student, *ts.validation),
                                 mean_squared_error(ts.student, ts.test)};
  });

  {
    Csv csv(ctx.file("table2_runs.csv"),
            {"n", "seed", "lambda", "train_mse", "validation_mse", "test_mse", "selected"});
    for (int idx = 0; idx < total; ++idx) {
      const int li = idx % per_seed;
      const int s = (idx / per_seed) % seeds;
      const long long n = n_list[std::size_t(idx / (per_seed * seeds))];
      const Run& r = runs[std::size_t(idx)];
      // Selected: the regularized run with the smallest validation MSE.
      bool selected = false;
      if (li > 0) {
        const int first = idx - li + 1;
        int best = first;
        for (int j = first; j < first + per_seed - 1; ++j) {
          if (runs[std::size_t(j)].val < runs[std::size_t(best)].val) best = j;
        }
        selected = best == idx;
      }
      csv.row({std::to_string(n), std::to_string(s), num(li == 0 ? 0.0 : lambdas[std::size_t(li - 1)]), num(r.train),
               num(r.val), num(r.test), selected ? "1" : "0"});
    }
  }

  json table = json::array();
  std::ostringstream text;
  text << "n     setting  train_mse median (IQR)       test_mse median (IQR)\n";
  Csv csv(ctx.file("table2.csv"), {"n", "setting", "train_median", "train_iqr", "test_median", "test_iqr"});
  bool finite = true;
  for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
    std::vector<double> tr0, te0, tr1, te1;
    for (int s = 0; s < seeds; ++s) {
      const int first = int(ni) * seeds * per_seed + s * per_seed;
      const Run& plain = runs[std::size_t(first)];
      int best = first + 1;
      for (int j = first + 1; j < first + per_seed; ++j) {
        if (runs[std::size_t(j)].val < runs[std::size_t(best)].val) best = j;
      }
      tr0.push_back(plain.train);
      te0.push_back(plain.test);
      tr1.push_back(runs[std::size_t(best)].train);
      te1.push_back(runs[std::size_t(best)].test);
    }
    for (const auto* v : {&tr0, &te0, &tr1, &te1}) {
      for (double x : *v) finite &= std::isfinite(x) && x >= 0;
    }
    auto iqr = [](const std::vector<double>& v) { return quantile(v, 0.75) - quantile(v, 0.25); };
    const long long n = n_list[ni];
    for (int reg = 0; reg < 2; ++reg) {
      const auto& tr = reg ? tr1 : tr0;
      const auto& te = reg ? te1 : te0;
      const char* name = reg ? "reg" : "no-reg";
      csv.row({std::to_string(n), name, num(median(tr)), num(iqr(tr)), num(median(te)), num(iqr(te))});
      char line[160];
      std::snprintf(line, sizeof line, "%-5lld %-8s %.4e (%.2e)         %.4e (%.2e)\n", n, name, median(tr), iqr(tr),
                    median(te), iqr(te));
      text << line;
    }
    table.push_back({{"n", n},
                     {"no_reg_test_median", median(te0)},
                     {"reg_test_median", median(te1)},
                     {"no_reg_train_median", median(tr0)},
                     {"reg_train_median", median(tr1)}});
    ctx.gate("n_" + std::to_string(n), median(te1) <= median(te0),
             "median test MSE reg " + fmt_g(median(te1)) + " <= no-reg " + fmt_g(median(te0)));
  }
  write_text(ctx.file("table2.txt"), text.str());
  ctx.gate("finite", finite, "all MSE values finite and >= 0");
  ctx.result.summary["table"] = table;
  ctx.result.summary["params"] = p.effective;
}

// ------------------------------------------------------------------ table1

struct Table1Reference {
  int d;
  double uniform, matching;
};
constexpr Table1Reference kTable1Reference[] = {
    {4, 3.96e-4, 5.43e-4}, {5, 0.0015, 0.0017}, {6, 0.0032, 0.0032}, {7, 0.0072, 0.0072}};

void run_table1(const Config& cfg, Context& ctx) {
  Params p(cfg, {"d_list", "m", "samples", "seeds", "tolerance", "equal_tolerance"});
  const auto d_list = p.il("d_list", {4, 5, 6, 7});
  const int m = static_cast<int>(p.positive("m", 1000, 3000));
  const auto samples = static_cast<std::uint64_t>(p.positive("samples", 20'000, 100'000));
  const int seeds = static_cast<int>(p.positive("seeds", 5));
  const double tolerance = p.d("tolerance", 0.25);
  const double equal_tol = p.d("equal_tolerance", 0.1);
  const RngSeed seed = p.seed();

  const int total = static_cast<int>(d_list.size()) * seeds;
  std::vector<MatchingResult> res(static_cast<std::size_t>(total));
  parallel_for(total, p.jobs(), [&](int idx) {
    const int d = static_cast<int>(d_list[std::size_t(idx / seeds)]);
    const int s = idx % seeds;
    res[std::size_t(idx)] =
        matching_distribution_experiment(d, m, samples, RngSeed{seed.seed + 1000003ull * std::uint64_t(s), std::uint64_t(d) << 32});
  });
  {
    Csv csv(ctx.file("table1_runs.csv"), {"d", "seed", "m", "samples", "uniform", "matching"});
    for (int idx = 0; idx < total; ++idx) {
      const auto& r = res[std::size_t(idx)];
      csv.row({std::to_string(r.d), std::to_string(idx % seeds), std::to_string(r.m), std::to_string(r.samples),
               num(r.lambda_min_uniform), num(r.lambda_min_matching)});
    }
  }
  Csv csv(ctx.file("table1.csv"), {"d", "uniform", "matching", "seeds", "m", "samples"});
  json rows = json::array();
  for (std::size_t di = 0; di < d_list.size(); ++di) {
    std::vector<double> u, mt;
    for (int s = 0; s < seeds; ++s) {
      u.push_back(res[di * std::size_t(seeds) + std::size_t(s)].lambda_min_uniform);
      mt.push_back(res[di * std::size_t(seeds) + std::size_t(s)].lambda_min_matching);
    }
    const int d = static_cast<int>(d_list[di]);
    const double mu = median(u), mm = median(mt);
    csv.row({std::to_string(d), num(mu), num(mm), std::to_string(seeds), std::to_string(m), std::to_string(samples)});
    rows.push_back({{"d", d}, {"uniform", mu}, {"matching", mm}});
    if (d == 4 || d == 5) {
      ctx.gate("ordering_d" + std::to_string(d), mm >= mu, "matching " + fmt_g(mm) + " >= uniform " + fmt_g(mu));
    }
    if (p.full) {
      for (const auto& ref : kTable1Reference) {
        if (ref.d != d) continue;
        const double eu = std::abs(mu / ref.uniform - 1), em = std::abs(mm / ref.matching - 1);
        ctx.gate("reference_d" + std::to_string(d), eu <= tolerance && em <= tolerance,
                 "uniform " + fmt_g(mu) + " vs " + fmt_g(ref.uniform) + ", matching " + fmt_g(mm) + " vs " +
                     fmt_g(ref.matching) + " (tolerance " + fmt_g(tolerance) + ")");
      }
    } else if (d == 7) {
      const double rel = std::abs(mm - mu) / mu;
      ctx.gate("equal_d7", rel < equal_tol, "|matching - uniform| / uniform = " + fmt_g(rel) + " < " + fmt_g(equal_tol));
    }
  }
  ctx.result.summary["rows"] = rows;
  ctx.result.summary["params"] = p.effective;
}

// ------------------------------------------------------------------ report

void run_report(const Config& cfg, Context& ctx, const fs::path& weights, const fs::path& data_path) {
  Params p(cfg, {"weights", "data", "renormalize", "y_bound", "c_g", "delta_prime", "delta", "calibration_draws",
                 "calibration_quantile", "mc_pairs", "subgradient_c"});
  const bool renormalize = cfg.get_bool("renormalize", false);
  const double y_bound = p.d("y_bound", 0.0);
  const double delta_prime = p.d("delta_prime", 0.05);
  const double delta = p.d("delta", 0.05);
  const int draws = static_cast<int>(p.positive("calibration_draws", 200));
  const double q = p.d("calibration_quantile", 0.99);
  const auto mc_pairs = static_cast<std::uint64_t>(p.positive("mc_pairs", 100'000));
  const double c = p.d("subgradient_c", 0.0);
  const RngSeed seed = p.seed();

  const ReluNetwork net = read_checkpoint(weights);
  const Dataset data = read_dataset_csv(data_path, renormalize, y_bound);
  require(data.x.dim() == net.dim(), ErrorCode::kDimension, "data dimension does not match the checkpoint");

  json out;
  out["n"] = net.units();
  out["d"] = net.dim();
  out["m"] = data.size();
  out["loss"] = loss(net, data);
  out["weight_budget"] = net.weight_budget();
  out["y_bound"] = data.y_bound;

  DiscrepancyReportOptions ro;
  ro.mc_pairs = mc_pairs;
  const DiscrepancyReport dr = discrepancy_report(net.weights(), seed.with_stream(1), ro);
  out["discrepancy"] = {{"n", dr.n},
                        {"d", dr.d},
                        {"l2_squared_closed", dr.l2_squared_closed},
                        {"l2_squared_mc", {{"estimate", dr.l2_squared_mc.estimate},
                                           {"standard_error", dr.l2_squared_mc.standard_error}}},
                        {"linf_estimate", dr.linf_estimate},
                        {"regularizer", std::isnan(dr.regularizer) ? json(nullptr) : json(dr.regularizer)}};

  double c_g = p.d("c_g", 0.0);
  bool calibrated = false;
  if (c_g <= 0.0) {
    c_g = calibrate_cg(net.units(), net.dim(), draws, q, delta_prime, seed.with_stream(2));
    calibrated = true;
  }
  const GcalMembership gm = gcal_membership(normalize(net.weights()), c_g, delta_prime);
  out["gcal"] = {{"c_g", c_g},          {"calibrated", calibrated}, {"delta_prime", delta_prime},
                 {"is_member", gm.is_member}, {"ratio", gm.ratio},     {"threshold", gm.threshold}};

  const ResidualBound rb = residual_bound_check(net, data, c);
  out["residual_bound"] = {{"lhs", rb.lhs}, {"rhs", rb.vacuous ? json(nullptr) : json(rb.rhs)}, {"s_m", rb.s_m},
                           {"vacuous", rb.vacuous}, {"holds", rb.holds}};

  const double gamma_m = net.dim() >= 3 ? relu_gamma_m(net.dim(), data.size()) : std::nan("");
  const SpectralReport sr = spectral_report(net, data.x, gamma_m, delta, seed.with_stream(3), c);
  out["spectral"] = {{"s_m", sr.s_m},
                     {"lambda_m_Gn", sr.lambda_m_Gn},
                     {"lambda_m_G", sr.lambda_m_G},
                     {"gap_norm", sr.gap_norm},
                     {"gamma_m", std::isnan(sr.gamma_m) ? json(nullptr) : json(sr.gamma_m)},
                     {"rho_terms", sr.rho.terms},
                     {"rho_total", sr.rho.total},
                     {"weyl_holds", sr.weyl_holds}};
  out["generalization_bound"] = {
      {"Y", data.y_bound}, {"C_W", net.weight_budget()}, {"m", data.size()}, {"delta", delta},
      {"bound", data.y_bound > 0 ? json(generalization_bound(data.y_bound, net.weight_budget(), data.size(), delta))
                                 : json(nullptr)}};
  write_text(ctx.file("report.json"), out.dump(2) + "\n");
  ctx.gate("residual_bound", rb.holds, rb.vacuous ? "s_m ~ 0, bound vacuous" : "||r|| <= ||grad|| / s_m");
  ctx.gate("weyl", sr.weyl_holds, "|lambda_m(G) - lambda_m(G_n)| <= ||G - G_n||");
  ctx.result.summary = out;
  ctx.result.summary["params"] = p.effective;
}

}  // namespace

ExperimentResult run_experiment(const std::string& name, const Config& config, const fs::path& out_dir) {
  const auto& names = experiment_names();
  require(std::find(names.begin(), names.end(), name) != names.end(), ErrorCode::kConfig,
          "unknown experiment '" + name + "'");
  if (config.has("experiment")) {
    require(config.get_string("experiment", name) == name, ErrorCode::kConfig,
            config.entries().at("experiment").origin + ": config is for experiment '" +
                config.get_string("experiment", "") + "', not '" + name + "'");
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  require(!ec, ErrorCode::kIo, "cannot create output directory " + out_dir.string() + ": " + ec.message());

  Context ctx{out_dir, {}};
  ctx.result.experiment = name;

  struct BudgetScope {
    explicit BudgetScope(long long bytes) {
      if (bytes > 0) set_memory_budget_override(static_cast<std::size_t>(bytes));
      active = bytes > 0;
    }
    ~BudgetScope() {
      if (active) set_memory_budget_override(0);
    }
    bool active = false;
  } budget(config.get_int("mem_budget_bytes", 0));

  // Manifest first: the config as given plus hashes of every input file.
  json manifest;
  manifest["tool"] = "reluspec";
  manifest["version"] = library_version();
  manifest["experiment"] = name;
  Config recorded = config;
  recorded.set("experiment", name);
  json cfg_json = json::object();
  for (const auto& [k, e] : recorded.entries()) cfg_json[k] = e.value;
  manifest["config"] = cfg_json;
  manifest["config_sha1"] = git_blob_sha1(recorded.canonical());
  json inputs = json::object();
  fs::path weights, data;
  if (name == "report") {
    require(config.has("weights") && config.has("data"), ErrorCode::kConfig, "report needs 'weights' and 'data'");
    weights = config.get_string("weights", "");
    data = config.get_string("data", "");
    inputs["weights"] = {{"path", weights.string()}, {"sha1", git_blob_sha1(read_file(weights))}};
    inputs["data"] = {{"path", data.string()}, {"sha1", git_blob_sha1(read_file(data))}};
  }
  manifest["inputs"] = inputs;
  manifest["dependencies"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                            "." + std::to_string(EIGEN_MINOR_VERSION)},
                              {"boost", BOOST_LIB_VERSION}};
  write_text(ctx.file("manifest.json"), manifest.dump(2) + "\n");

  if (name == "spectrum") run_spectrum(config, ctx);
  else if (name == "gram-concentration") run_gram_concentration(config, ctx);
  else if (name == "discrepancy-sweep") run_discrepancy_sweep(config, ctx);
  else if (name == "regularize-compare") run_regularize_compare(config, ctx);
  else if (name == "train-table2") run_train_table2(config, ctx);
  else if (name == "table1") run_table1(config, ctx);
  else run_report(config, ctx, weights, data);

  json gates = json::array();
  for (const Gate& g : ctx.result.gates) gates.push_back({{"name", g.name}, {"passed", g.passed}, {"detail", g.detail}});
  json summary;
  summary["experiment"] = name;
  summary["results"] = ctx.result.summary;
  summary["gates"] = gates;
  summary["files"] = ctx.result.files;
  ctx.result.files.push_back("summary.json");
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  return ctx.result;
}

}  // namespace reluspec
