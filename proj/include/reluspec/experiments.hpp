#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "reluspec/config.hpp"

namespace reluspec {

struct Gate {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentResult {
  std::string experiment;
  std::vector<Gate> gates;
  nlohmann::json summary = nlohmann::json::object();
  /// Written files, relative to the output directory, manifest first.
  std::vector<std::string> files;

  bool gates_passed() const;
};

/// spectrum, gram-concentration, discrepancy-sweep, regularize-compare,
/// train-table2, table1, report.
const std::vector<std::string>& experiment_names();

/// Runs one experiment. The manifest (config, input hashes, versions) is
/// written to out_dir/manifest.json before any result file. Gates are always
/// evaluated; the caller decides whether a failed gate is an error.
ExperimentResult run_experiment(const std::string& name, const Config& config, const std::filesystem::path& out_dir);

/// Library version string.
const char* library_version();

}  // namespace reluspec
