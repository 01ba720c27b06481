#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "reluspec/network.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string output;
};

CliRun run_cli(const std::string& args) {
  const std::string cmd = std::string(RELUSPEC_CLI_PATH) + " " + args + " 2>&1";
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe) != nullptr) r.output += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "reluspec_cli" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kSmallSpectrum = " --d 20 --fit-last 1000 --expanded-cap 5000 --beta-max 5";

}  // namespace

TEST(Cli, ListsExperiments) {
  const CliRun r = run_cli("list");
  EXPECT_EQ(r.code, 0);
  for (const char* name : {"spectrum", "gram-concentration", "discrepancy-sweep", "regularize-compare",
                           "train-table2", "table1", "report"}) {
    EXPECT_NE(r.output.find(name), std::string::npos) << name;
  }
}

TEST(Cli, HelpExitsZero) { EXPECT_EQ(run_cli("--help").code, 0); }

TEST(Cli, SpectrumRunWritesArtifacts) {
  const fs::path out = fresh_dir("spectrum");
  const CliRun r = run_cli("spectrum --out " + out.string() + kSmallSpectrum + " --check");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("[PASS] beta"), std::string::npos) << r.output;
  for (const char* f : {"manifest.json", "summary.json", "spectrum_orders.csv", "spectrum_expanded.csv", "spectrum.svg"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest["experiment"], "spectrum");
  EXPECT_EQ(manifest["config"]["d"], "20");
}

TEST(Cli, GateFailureExitsFourOnlyUnderCheck) {
  const fs::path out = fresh_dir("gate");
  const CliRun checked = run_cli("spectrum --out " + out.string() + kSmallSpectrum + " --beta-max 0.01 --check");
  EXPECT_EQ(checked.code, 4) << checked.output;
  EXPECT_NE(checked.output.find("[FAIL] beta"), std::string::npos);
  const CliRun unchecked = run_cli("spectrum --out " + out.string() + kSmallSpectrum + " --beta-max 0.01");
  EXPECT_EQ(unchecked.code, 0) << unchecked.output;
}

TEST(Cli, ConfigErrorsExitTwo) {
  const fs::path dir = fresh_dir("config");
  EXPECT_EQ(run_cli("spectrum --out " + dir.string() + " --no-such-key 1").code, 2);
  EXPECT_EQ(run_cli("spectrum --out " + dir.string() + " --config " + (dir / "absent.cfg").string()).code, 2);
  {
    std::ofstream(dir / "bad.cfg") << "d = twenty\n";
  }
  const CliRun bad = run_cli("spectrum --out " + dir.string() + " --config " + (dir / "bad.cfg").string());
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.output.find("bad.cfg:1"), std::string::npos) << bad.output;
  EXPECT_NE(bad.output.find("'d'"), std::string::npos) << bad.output;
  EXPECT_EQ(run_cli("spectrum").code, 2);
  EXPECT_EQ(run_cli("spectrum --out " + dir.string() + " --kernel arccos-J9").code, 2);
}

TEST(Cli, ConfigFileAndOverrides) {
  const fs::path dir = fresh_dir("override");
  {
    std::ofstream(dir / "s.cfg") << "# small run\nd = 30\nfit_last = 1000\nexpanded_cap = 5000\n";
  }
  const CliRun r = run_cli("spectrum --config " + (dir / "s.cfg").string() + " --out " + (dir / "o").string() + " --d=25");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto manifest = nlohmann::json::parse(slurp(dir / "o" / "manifest.json"));
  EXPECT_EQ(manifest["config"]["d"], "25");
  EXPECT_EQ(manifest["config"]["fit_last"], "1000");
}

TEST(Cli, RerunFromManifestIsBitwiseIdentical) {
  const fs::path a = fresh_dir("rerun_a"), b = fresh_dir("rerun_b");
  ASSERT_EQ(run_cli("table1 --out " + a.string() + " --d-list 4 --m 60 --samples 3000 --seeds 2").code, 0);
  const CliRun r = run_cli("table1 --config " + (a / "manifest.json").string() + " --out " + b.string());
  ASSERT_EQ(r.code, 0) << r.output;
  for (const char* f : {"table1.csv", "table1_runs.csv", "manifest.json"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(Cli, ReportOnTeacherCheckpoint) {
  using namespace reluspec;
  const fs::path dir = fresh_dir("report");
  const TeacherStudent ts = make_teacher_student({.d = 8, .n_teacher = 40, .n_student = 4, .m_train = 30, .m_test = 5});
  write_checkpoint(dir / "teacher.ckpt", ts.teacher);
  write_dataset_csv(dir / "data.csv", ts.train);
  const CliRun r = run_cli("report --out " + (dir / "o").string() + " --weights " + (dir / "teacher.ckpt").string() +
                        " --data " + (dir / "data.csv").string() + " --mc-pairs 20000 --check");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto rep = nlohmann::json::parse(slurp(dir / "o" / "report.json"));
  EXPECT_EQ(rep["n"], 40);
  EXPECT_EQ(rep["d"], 8);
  EXPECT_EQ(rep["m"], 30);
  EXPECT_EQ(rep["loss"].get<double>(), 0.0);
  EXPECT_TRUE(rep["residual_bound"]["holds"].get<bool>());

  // Corrupting the checkpoint turns into a parse error, exit code 2.
  std::string bytes = slurp(dir / "teacher.ckpt");
  bytes.resize(bytes.size() - 8);
  std::ofstream(dir / "broken.ckpt", std::ios::binary) << bytes;
  const CliRun broken = run_cli("report --out " + (dir / "o2").string() + " --weights " + (dir / "broken.ckpt").string() +
                             " --data " + (dir / "data.csv").string());
  EXPECT_EQ(broken.code, 2) << broken.output;
  EXPECT_NE(broken.output.find("parse"), std::string::npos) << broken.output;
}
