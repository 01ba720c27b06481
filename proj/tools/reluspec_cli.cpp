// Command-line runner for the reluspec experiments. Talks to the library only
// through the C interface.
#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "reluspec/reluspec.h"

namespace {

enum Exit { kOk = 0, kInternal = 1, kConfigError = 2, kNumericError = 3, kGateFailure = 4 };

int exit_code(rs_status st) {
  switch (st) {
    case RS_OK: return kOk;
    case RS_ERR_GATE: return kGateFailure;
    case RS_ERR_CONFIG:
    case RS_ERR_IO:
    case RS_ERR_PARSE:
    case RS_ERR_DIMENSION:
    case RS_ERR_INVALID_ARGUMENT:
    case RS_ERR_UNSUPPORTED_ORDER: return kConfigError;
    case RS_ERR_NUMERIC:
    case RS_ERR_PRECISION:
    case RS_ERR_DEGENERATE_WEIGHT:
    case RS_ERR_MEMORY: return kNumericError;
    case RS_ERR_INTERNAL: return kInternal;
  }
  return kInternal;
}

int report_error(rs_status st) {
  std::fprintf(stderr, "error [%s]: %s\n", rs_status_string(st), rs_last_error());
  return exit_code(st);
}

struct ConfigDeleter {
  void operator()(rs_config* c) const { rs_config_free(c); }
};
struct ResultDeleter {
  void operator()(rs_experiment_result* r) const { rs_experiment_result_free(r); }
};

// Turns the leftover "--key value" / "--key=value" arguments into overrides.
bool parse_overrides(const std::vector<std::string>& extras, std::vector<std::pair<std::string, std::string>>& out,
                     std::string& problem) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& a = extras[i];
    if (a.rfind("--", 0) != 0 || a.size() < 3) {
      problem = "unexpected argument '" + a + "'";
      return false;
    }
    std::string key = a.substr(2), value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else if (i + 1 < extras.size()) {
      value = extras[++i];
    } else {
      problem = "option '" + a + "' needs a value";
      return false;
    }
    for (char& c : key) {
      if (c == '-') c = '_';
    }
    out.emplace_back(key, value);
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reluspec: spectra, discrepancy and training experiments for one-hidden-layer ReLU networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rs_version()));

  std::string config_path, out_dir;
  bool check = false;
  int jobs = 1;

  std::vector<CLI::App*> subs;
  for (int i = 0; i < rs_experiment_count(); ++i) {
    const std::string name = rs_experiment_name(i);
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config_path, "flat key=value config file or a run manifest");
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_flag("--check", check, "exit with status 4 when an acceptance gate fails");
    sub->add_option("--jobs", jobs, "parallel trials")->check(CLI::PositiveNumber);
    sub->allow_extras();
    sub->footer("Any other --key value pair overrides the config entry 'key' (dashes become underscores).");
    subs.push_back(sub);
  }
  app.add_subcommand("list", "list experiments")->callback([] {
    for (int i = 0; i < rs_experiment_count(); ++i) std::printf("%s\n", rs_experiment_name(i));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  CLI::App* sub = nullptr;
  for (auto* s : subs) {
    if (s->parsed()) sub = s;
  }
  if (sub == nullptr) return kOk;

  std::vector<std::pair<std::string, std::string>> overrides;
  std::string problem;
  if (!parse_overrides(sub->remaining(), overrides, problem)) {
    std::fprintf(stderr, "error [config]: %s\n", problem.c_str());
    return kConfigError;
  }

  rs_config* raw_cfg = nullptr;
  rs_status st = config_path.empty() ? rs_config_create(&raw_cfg) : rs_config_load(config_path.c_str(), &raw_cfg);
  if (st != RS_OK) return report_error(st);
  std::unique_ptr<rs_config, ConfigDeleter> cfg(raw_cfg);
  for (const auto& [k, v] : overrides) {
    if ((st = rs_config_set(cfg.get(), k.c_str(), v.c_str())) != RS_OK) return report_error(st);
  }
  if (jobs > 1 && (st = rs_config_set(cfg.get(), "jobs", std::to_string(jobs).c_str())) != RS_OK) {
    return report_error(st);
  }

  rs_experiment_result* raw_result = nullptr;
  st = rs_experiment_run(sub->get_name().c_str(), cfg.get(), out_dir.c_str(), check ? 1 : 0, &raw_result);
  std::unique_ptr<rs_experiment_result, ResultDeleter> result(raw_result);
  if (st != RS_OK && st != RS_ERR_GATE) return report_error(st);

  for (int i = 0; i < rs_experiment_result_gate_count(result.get()); ++i) {
    const char* name = nullptr;
    const char* detail = nullptr;
    int passed = 0;
    rs_experiment_result_gate(result.get(), i, &name, &passed, &detail);
    std::printf("[%s] %s: %s\n", passed ? "PASS" : "FAIL", name, detail);
  }
  std::printf("results written to %s (summary.json, manifest.json)\n", out_dir.c_str());
  if (st == RS_ERR_GATE) {
    std::fprintf(stderr, "gate failure: one or more acceptance gates failed\n");
    return kGateFailure;
  }
  return kOk;
}
