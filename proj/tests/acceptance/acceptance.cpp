// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
//
//   acceptance --out DIR [--full] [--only 1,5,13]
//
// --full (or RELUSPEC_ACCEPTANCE_FULL=1) adds the full-scale uniform-vs-matching gate.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "reluspec/config.hpp"
#include "reluspec/discrepancy.hpp"
#include "reluspec/experiments.hpp"
#include "reluspec/kernels.hpp"
#include "reluspec/network.hpp"
#include "reluspec/spectral.hpp"
#include "reluspec/stats.hpp"

using namespace reluspec;
namespace fs = std::filesystem;

namespace {

// ---- pinned tolerances ----
constexpr double kTrivialTol = 1e-12;
constexpr int kL2Configs = 50;
constexpr int kL2MinAgree = 47;
constexpr std::uint64_t kL2McPairs = 1'000'000;
constexpr double kL2SeMultiple = 3.0;
constexpr double kNetGradRelTol = 1e-6;
constexpr double kRegGradRelTol = 1e-5;
constexpr double kKinkMargin = 1e-4;
constexpr double kDrRelTol = 1e-10;
constexpr double kSmRelTol = 1e-8;
constexpr int kResidualConfigs = 100;
constexpr double kMercerTol = 1e-4;
constexpr int kMercerD = 10, kMercerT = 60;
constexpr double kProjectionSeMultiple = 3.0;
constexpr std::uint64_t kProjectionPairs = 2'000'000;
constexpr double kBetaMax = 1.05;
constexpr double kGramFactor = 2.0;
constexpr double kSlopeMin = -1.1, kSlopeMax = -0.4;
constexpr int kMinImproved = 16;
constexpr double kSpearmanP = 0.05;
constexpr double kTable1Tolerance = 0.25;
constexpr double kTable1EqualTolerance = 0.1;
constexpr double kLemma4MinRatio = 3.0;

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  double budget_seconds;  // <= 0: no budget
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string g4(double v) { return fmt("%.4g", v); }

struct Runner {
  fs::path out;
  bool full = false;
  // Experiment output directories produced by criteria 6-11, for the rerun check.
  std::vector<std::pair<std::string, fs::path>> runs;

  ExperimentResult experiment(const std::string& name, const std::map<std::string, std::string>& kv,
                              const std::string& tag) {
    Config cfg;
    for (const auto& [k, v] : kv) cfg.set(k, v, "acceptance");
    const fs::path dir = out / tag;
    fs::remove_all(dir);
    ExperimentResult r = run_experiment(name, cfg, dir);
    runs.emplace_back(name, dir);
    return r;
  }
};

Outcome gates_outcome(const ExperimentResult& r) {
  Outcome o{r.gates_passed(), ""};
  for (const auto& g : r.gates) {
    if (!o.detail.empty()) o.detail += "; ";
    o.detail += (g.passed ? "" : "FAILED ") + g.name + ": " + g.detail;
  }
  return o;
}

RowMatrix gaussian(int n, int d, Engine& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  RowMatrix w(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) w(i, j) = g(rng);
  return w;
}

Dataset teacher_data(int d, int m, Engine& rng) {
  const ReluNetwork teacher(random_signs(4, {rng(), 0}), gaussian(4, d, rng, 1.0 / std::sqrt(double(d))));
  PointSet x = sample_uniform_sphere(d, m, {rng(), 0});
  Eigen::VectorXd y = forward_batch(teacher, x.points());
  return Dataset::make(std::move(x), std::move(y), teacher.weight_budget());
}

// ---- 1 ----
Outcome closed_form_kernels() {
  double worst = 0;
  auto check = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };
  check(slice_kernel(1.0), 0.5);
  check(slice_kernel(0.0), 0.25);
  check(slice_kernel(-1.0), 0.0);
  check(relu_activation_kernel(1.0), 0.5);
  check(relu_activation_kernel(0.0), 0.0);
  check(relu_activation_kernel(-1.0), 0.0);
  const double trivial = worst;
  Engine rng = make_engine({101, 0});
  std::uniform_real_distribution<double> theta(0.0, std::numbers::pi);
  for (int i = 0; i < 1000; ++i) {
    const double s = std::cos(theta(rng));
    const auto k = rectified_poly_kernel(1, s);
    check(k.raw, slice_kernel(s));
    check(k.derivative, slice_kernel(s));
  }
  return {worst <= kTrivialTol,
          "max error at trivial values " + g4(trivial) + ", rectified-poly t=1 vs slice " + g4(worst) + " (tol " +
              g4(kTrivialTol) + ")"};
}

// ---- 2 ----
Outcome l2_closed_vs_mc() {
  Engine rng = make_engine({102, 0});
  std::uniform_int_distribution<int> pick_n(1, 60), pick_d(2, 20);
  int agree = 0;
  double worst_z = 0, form_gap = 0;
  for (int c = 0; c < kL2Configs; ++c) {
    const int n = pick_n(rng), d = pick_d(rng);
    const PointSet w = sample_uniform_sphere(d, n, {102, std::uint64_t(c) + 1});
    const double closed = l2_discrepancy_closed(w);
    form_gap = std::max(form_gap, std::abs(closed - l2_discrepancy_angular_form(w)));
    const MonteCarloEstimate mc = l2_discrepancy_mc(w, kL2McPairs, {102, 1000 + std::uint64_t(c)});
    const double z = std::abs(closed - mc.estimate) / std::max(mc.standard_error, 1e-300);
    worst_z = std::max(worst_z, z);
    agree += z <= kL2SeMultiple;
  }
  return {agree >= kL2MinAgree,
          std::to_string(agree) + "/" + std::to_string(kL2Configs) + " within " + g4(kL2SeMultiple) +
              " SE (need " + std::to_string(kL2MinAgree) + "), max |z| " + g4(worst_z) +
              "; kernel form and angular form differ by at most " + g4(form_gap) +
              ", so both expressions are the same quantity"};
}

// ---- 3 ----
double rel_err(const RowMatrix& a, const RowMatrix& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

Outcome gradient_checks() {
  Engine rng = make_engine({103, 0});
  double worst_net = 0, worst_reg = 0;
  int made = 0, attempts = 0;
  while (made < 20 && attempts < 2000) {
    ++attempts;
    const int n = 3 + int(rng() % 10), d = 3 + int(rng() % 6), m = 10 + int(rng() % 30);
    const Dataset data = teacher_data(d, m, rng);
    ReluNetwork net(random_signs(n, {rng(), 0}), gaussian(n, d, rng, 1.0 / std::sqrt(double(d))));
    const Eigen::MatrixXd pre = net.weights() * data.x.points().transpose();
    if (pre.cwiseAbs().minCoeff() < kKinkMargin) continue;
    ++made;
    const Gradient g = gradient(net, data);
    RowMatrix fd(n, d);
    const double h = 1e-6;
    for (int k = 0; k < n; ++k) {
      for (int j = 0; j < d; ++j) {
        ReluNetwork p = net, q = net;
        p.mutable_weights()(k, j) += h;
        q.mutable_weights()(k, j) -= h;
        fd(k, j) = (loss(p, data) - loss(q, data)) / (2 * h);
      }
    }
    worst_net = std::max(worst_net, rel_err(g.grad, fd));

    const RowMatrix w = net.weights();
    const RowMatrix rg = diversity_regularizer_gradient(w);
    RowMatrix rfd(n, d);
    for (int k = 0; k < n; ++k) {
      for (int j = 0; j < d; ++j) {
        RowMatrix p = w, q = w;
        p(k, j) += h;
        q(k, j) -= h;
        rfd(k, j) = (diversity_regularizer(p) - diversity_regularizer(q)) / (2 * h);
      }
    }
    worst_reg = std::max(worst_reg, rel_err(rg, rfd));
  }
  const bool ok = made == 20 && worst_net < kNetGradRelTol && worst_reg < kRegGradRelTol;
  return {ok, std::to_string(made) + " instances; network max rel error " + g4(worst_net) + " (tol " +
                  g4(kNetGradRelTol) + "), regularizer " + g4(worst_reg) + " (tol " + g4(kRegGradRelTol) + ")"};
}

// ---- 4 ----
Outcome algebraic_identities() {
  Engine rng = make_engine({104, 0});
  double worst_dr = 0, worst_sm = 0;
  for (int c = 0; c < 20; ++c) {
    const int n = 5 + int(rng() % 30), d = 3 + int(rng() % 8);
    const int m = 5 + int(rng() % std::max(1, n * d / 2 - 5));
    const Dataset data = teacher_data(d, m, rng);
    const ReluNetwork net(random_signs(n, {rng(), 0}), sample_uniform_sphere(d, n, {rng(), 0}).points());
    const auto f = ExtendedFeatureMatrix::build(net, data.x, 0.0, FeatureMode::kDense);
    const Eigen::VectorXd flat = f.dense() * residual(net, data);
    const RowMatrix dr = Eigen::Map<const RowMatrix>(flat.data(), n, d);
    worst_dr = std::max(worst_dr, rel_err(dr, gradient(net, data).grad));
    const double sm = min_singular_value_svd(f);
    const double lam = smallest_eigenvalue(empirical_gram_Gn(net.weights(), data.x));
    worst_sm = std::max(worst_sm, std::abs(sm * sm - n * lam) / std::max(sm * sm, 1e-300));
  }
  int holds = 0, vacuous = 0;
  for (int c = 0; c < kResidualConfigs; ++c) {
    Engine r2 = make_engine({104, 1000 + std::uint64_t(c)});
    const int n = 5 + int(r2() % 60), d = 3 + int(r2() % 10), m = 5 + int(r2() % 60);
    const Dataset data = teacher_data(d, m, r2);
    const ReluNetwork net(random_signs(n, {r2(), 0}), gaussian(n, d, r2));
    const ResidualBound b = residual_bound_check(net, data);
    holds += b.holds;
    vacuous += b.vacuous;
  }
  const bool ok = worst_dr <= kDrRelTol && worst_sm <= kSmRelTol && holds == kResidualConfigs;
  return {ok, "D r vs gradient max rel " + g4(worst_dr) + " (tol " + g4(kDrRelTol) + "), s_m^2 vs n lambda_m(G_n) " +
                  g4(worst_sm) + " (tol " + g4(kSmRelTol) + "), residual bound " + std::to_string(holds) + "/" +
                  std::to_string(kResidualConfigs) + " (" + std::to_string(vacuous) + " vacuous)"};
}

// ---- 5 ----
Outcome spectrum_machinery() {
  const auto relu = DotProductKernel::relu_g();
  const KernelSpectrum mercer = kernel_spectrum(relu, kMercerD, {.max_order = kMercerT});
  double trace = 0;
  for (const auto& o : mercer.orders) trace += o.multiplicity.convert_to<double>() * o.gamma;
  const double mercer_err = std::abs(trace - relu(1.0));
  const bool mercer_ok = mercer_err <= kMercerTol;

  const KernelSpectrum runs = kernel_spectrum(relu, 6, {.max_order = 12, .expanded_cap = 10'000'000});
  bool runs_ok = !runs.truncated;
  std::size_t pos = 0, total = 0;
  for (int t : runs.sorted_orders) {
    const auto len = runs.orders[t].multiplicity.convert_to<std::size_t>();
    total += len;
    for (std::size_t i = pos; i < pos + len && runs_ok; ++i) runs_ok = runs.expanded[i] == runs.orders[t].gamma;
    if (pos + len < runs.expanded.size() && runs.orders[t].gamma != 0.0)
      runs_ok = runs_ok && runs.expanded[pos + len] != runs.orders[t].gamma;
    pos += len;
  }
  runs_ok = runs_ok && total == runs.expanded.size();

  const int d = 6, T = 5;
  const KernelSpectrum q = kernel_spectrum(relu, d, {.max_order = T});
  const PointSet u = sample_uniform_sphere(d, int(kProjectionPairs), {105, 0});
  const PointSet v = sample_uniform_sphere(d, int(kProjectionPairs), {105, 1});
  std::vector<double> s1(T + 1), s2(T + 1), p(T + 1);
  for (int i = 0; i < u.count(); ++i) {
    const double xi = std::clamp(u.row(i).dot(v.row(i)), -1.0, 1.0);
    legendre_polys(d, xi, p);
    const double k = relu(xi);
    for (int t = 0; t <= T; ++t) {
      s1[t] += k * p[t];
      s2[t] += k * k * p[t] * p[t];
    }
  }
  double worst_z = 0;
  for (int t = 0; t <= T; ++t) {
    const double nn = double(kProjectionPairs), mean = s1[t] / nn;
    const double se = std::sqrt(std::max(s2[t] / nn - mean * mean, 0.0) / nn);
    worst_z = std::max(worst_z, std::abs(q.orders[t].gamma - mean) / se);
  }
  const bool proj_ok = worst_z <= kProjectionSeMultiple;
  return {mercer_ok && runs_ok && proj_ok,
          std::string(mercer_ok ? "" : "FAILED ") + "Mercer trace at d=" + std::to_string(kMercerD) +
              ", T=" + std::to_string(kMercerT) + ": |sum - kappa(1)| = " + g4(mercer_err) + " (tol " +
              g4(kMercerTol) + "); " + (runs_ok ? "" : "FAILED ") + "expanded runs match N(d,t) over " +
              std::to_string(total) + " entries; " + (proj_ok ? "" : "FAILED ") +
              "quadrature vs MC projection max |z| " + g4(worst_z) + " for t<=5, d=6"};
}

// ---- 6 - 11 ----
Outcome figure1(Runner& r) {
  return gates_outcome(r.experiment("spectrum",
                                    {{"kernel", "relu-g"},
                                     {"d", "1500"},
                                     {"fit_first", "10"},
                                     {"fit_last", "100000"},
                                     {"beta_max", g4(kBetaMax)}},
                                    "spectrum"));
}

Outcome figure2(Runner& r) {
  return gates_outcome(r.experiment(
      "gram-concentration", {{"d", "15"}, {"m", "3000"}, {"ranks", "10,100,1000"}, {"factor", g4(kGramFactor)}},
      "gram-concentration"));
}

Outcome figure3(Runner& r) {
  return gates_outcome(r.experiment("discrepancy-sweep",
                                    {{"d", "50"},
                                     {"n_list", "25,50,100,200"},
                                     {"seeds", "3"},
                                     {"slope_min", g4(kSlopeMin)},
                                     {"slope_max", g4(kSlopeMax)}},
                                    "discrepancy-sweep"));
}

Outcome figure4(Runner& r) {
  return gates_outcome(r.experiment("regularize-compare",
                                    {{"n", "100"},
                                     {"d", "100"},
                                     {"m", "3000"},
                                     {"seeds", "20"},
                                     {"min_improved", std::to_string(kMinImproved)},
                                     {"p_max", g4(kSpearmanP)}},
                                    "regularize-compare"));
}

Outcome table1(Runner& r) {
  Outcome scaled = gates_outcome(r.experiment("table1",
                                              {{"mode", "scaled"},
                                               {"m", "1000"},
                                               {"samples", "20000"},
                                               {"seeds", "5"},
                                               {"equal_tolerance", g4(kTable1EqualTolerance)}},
                                              "table1"));
  scaled.detail = "scaled: " + scaled.detail;
  if (!r.full) {
    scaled.detail += "; full scale not requested (--full)";
    return scaled;
  }
  const Outcome full = gates_outcome(r.experiment(
      "table1", {{"mode", "full"}, {"seeds", "5"}, {"tolerance", g4(kTable1Tolerance)}}, "table1-full"));
  return {scaled.passed && full.passed, scaled.detail + "; full: " + full.detail};
}

Outcome table2(Runner& r) {
  return gates_outcome(r.experiment(
      "train-table2", {{"n_list", "100,150"}, {"seeds", "5"}, {"iterations", "30000"}}, "train-table2"));
}

// ---- 12 ----
Outcome lemma4() {
  const int d = 50, draws = 20;
  auto med = [&](int n) {
    std::vector<double> v;
    for (int i = 0; i < draws; ++i)
      v.push_back(l2_discrepancy_closed(sample_uniform_sphere(d, n, {112, std::uint64_t(n) * 1000 + i})));
    return median(v);
  };
  std::string detail;
  bool ok = true;
  for (int n : {25, 100}) {
    const double a = med(n), b = med(4 * n);
    const double ratio = a / b;
    ok = ok && ratio >= kLemma4MinRatio;
    if (!detail.empty()) detail += "; ";
    detail += "n=" + std::to_string(n) + "->" + std::to_string(4 * n) + ": median " + g4(a) + " -> " + g4(b) +
              " (ratio " + g4(ratio) + ", need >= " + g4(kLemma4MinRatio) + ")";
  }
  return {ok, detail};
}

// ---- 13 ----
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(Runner& r) {
  if (r.runs.empty()) {
    // Run standalone: produce a small manifest to rerun.
    r.experiment("table1", {{"d_list", "4,7"}, {"m", "200"}, {"samples", "5000"}, {"seeds", "2"}}, "table1-small");
  }
  int compared = 0, mismatched = 0;
  std::string detail;
  for (const auto& [name, dir] : r.runs) {
    const fs::path rerun = dir.string() + "-rerun";
    fs::remove_all(rerun);
    const std::string cmd = std::string(RELUSPEC_CLI_PATH) + " " + name + " --config \"" +
                            (dir / "manifest.json").string() + "\" --out \"" + rerun.string() + "\" > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    if (rc != 0 && WEXITSTATUS(rc) != 0) {
      ++mismatched;
      detail += " " + name + ":rerun-exit-" + std::to_string(WEXITSTATUS(rc));
      continue;
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().extension() != ".csv") continue;
      ++compared;
      if (slurp(entry.path()) != slurp(rerun / entry.path().filename())) {
        ++mismatched;
        detail += " " + name + "/" + entry.path().filename().string();
      }
    }
  }
  return {mismatched == 0 && compared > 0,
          std::to_string(r.runs.size()) + " manifests rerun, " + std::to_string(compared) + " CSV files compared, " +
              std::to_string(mismatched) + " differ" + (detail.empty() ? "" : ":" + detail)};
}

}  // namespace

int main(int argc, char** argv) {
  Runner runner;
  runner.out = fs::temp_directory_path() / "reluspec_acceptance";
  const char* env_full = std::getenv("RELUSPEC_ACCEPTANCE_FULL");
  runner.full = env_full != nullptr && std::string(env_full) == "1";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--out" && i + 1 < argc) {
      runner.out = argv[++i];
    } else if (a == "--full") {
      runner.full = true;
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string item;
      while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
    } else {
      std::fprintf(stderr, "usage: acceptance [--out DIR] [--full] [--only 1,2,...]\n");
      return 2;
    }
  }
  fs::create_directories(runner.out);

  const std::vector<Criterion> criteria = {
      {1, "closed-form kernels", 1, closed_form_kernels},
      {2, "L2 discrepancy closed form vs Monte Carlo", 300, l2_closed_vs_mc},
      {3, "gradient correctness", 30, gradient_checks},
      {4, "algebraic identities and residual bound", 120, algebraic_identities},
      {5, "spectrum machinery", 120, spectrum_machinery},
      {6, "relu-g eigenvalue decay at d=1500", 60, [&] { return figure1(runner); }},
      {7, "Gram spectrum vs kernel spectrum at d=15, m=3000", 600, [&] { return figure2(runner); }},
      {8, "discrepancy of trained weights vs n", 900, [&] { return figure3(runner); }},
      {9, "regularizer vs minimum singular value", 1200, [&] { return figure4(runner); }},
      {10, "uniform vs matching distribution", runner.full ? 0.0 : 600.0, [&] { return table1(runner); }},
      {11, "regularized vs unregularized test MSE", 1800, [&] { return table2(runner); }},
      {12, "L2 discrepancy scaling of uniform weights", 120, lemma4},
      {13, "rerun determinism", 0, [&] { return determinism(runner); }},
  };

  int passed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = c.budget_seconds <= 0 || secs < c.budget_seconds;
    const bool ok = o.passed && in_budget;
    passed += ok;
    std::string timing = fmt("%.1f s", secs);
    if (c.budget_seconds > 0) timing += fmt(" of %.0f s budget", c.budget_seconds);
    if (!in_budget) timing += ", OVER BUDGET";
    std::printf("[%s] criterion %d, %s: %s [%s]\n", ok ? "PASS" : "FAIL", c.id, c.title.c_str(), o.detail.c_str(),
                timing.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", passed, ran);
  return passed == ran ? 0 : 1;
}
