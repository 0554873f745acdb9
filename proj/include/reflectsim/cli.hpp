#pragma once

#include "reflectsim/stats.hpp"
#include "reflectsim/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace reflectsim::cli {

enum ExitCode : int { exit_ok = 0, exit_failed = 1, exit_config = 2, exit_tube = 3, exit_numeric = 4 };

/// INI contents keyed by section; the empty section holds the top-level keys.
using RawConfig = std::map<std::string, std::map<std::string, std::string>>;

RawConfig parse_config_text(const std::string& text);
RawConfig parse_config_file(const std::string& path);

/// Applies "section.key=value" (or "key=value" for a top-level key).
void apply_override(RawConfig& config, const std::string& assignment);

/// Command-line settings that take precedence over the file.
struct Options {
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  bool dry_run = false;
};

/// One key of the resolved configuration, defaults included.
struct Entry {
  std::string section;
  std::string key;
  std::string value;
};

struct ResolvedConfig {
  std::string experiment;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string output = "out";
  std::vector<Entry> entries;

  const std::string* find(const std::string& section, const std::string& key) const;
  /// Sections as a JSON object; workers and output are left out.
  nlohmann::json parameters() const;
  void write_ini(std::ostream& out) const;
};

/// Extra file produced by an experiment next to report.json.
struct Artifact {
  std::string filename;
  std::string content;
};

struct Outcome {
  ExperimentReport report;
  std::vector<Artifact> artifacts;
};

/// A validated configuration bound to its experiment.
struct PreparedRun {
  ResolvedConfig config;
  std::function<Outcome(const ResolvedConfig&)> execute;
};

/// Validates every key, fills defaults and builds the experiment.
/// Throws ConfigError naming the offending key.
PreparedRun prepare(const RawConfig& raw, const Options& options = {});

Outcome execute(const PreparedRun& run);

/// report.json contents: the report with the resolved configuration as its
/// parameters.
nlohmann::json report_json(const ResolvedConfig& config, const ExperimentReport& report);

/// Writes report.json, levels.csv, resolved_config.ini and the artifacts.
void write_outputs(const std::string& directory, const ResolvedConfig& config, const Outcome& outcome);

/// Full `run` subcommand; returns the process exit code.
int run(const std::string& config_path, const std::vector<std::string>& overrides, const Options& options,
        std::ostream& out, std::ostream& err);

struct CatalogEntry {
  std::string name;
  std::string anchor;
  std::string summary;
  bool uses_problem = true;
  std::vector<std::string> keys;
};

const std::vector<CatalogEntry>& catalog();

void list_experiments(std::ostream& out, bool as_json);

/// Named test functions for the submartingale and maximum principle
/// experiments: constant, norm_squared, neg_norm_squared.
std::function<double(const Vector&)> scalar_function(const std::string& name);

}  // namespace reflectsim::cli
