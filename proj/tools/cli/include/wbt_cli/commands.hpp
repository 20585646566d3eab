#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wbt_cli/config.hpp"
#include "wbt_cli/results.hpp"

namespace wbt::cli {

std::string toolkit_version();

/// Command-line overrides; they win over the config's own values.
struct RunFlags {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

struct RunResult {
  std::vector<ResultRow> rows;
  Manifest manifest;
  /// Extra files (edge lists) keyed by file name, written next to the results.
  std::map<std::string, std::string> files;
  std::vector<std::string> messages;
};

/// Runs the experiment in memory. Throws ConfigError for config problems.
RunResult run_experiment(const Config& config, const RunFlags& flags);

/// Writes the rows to `out`, the manifest to `out` + ".manifest.json" and any
/// extra files into the same directory.
void write_run(const RunResult& result, const std::filesystem::path& out);

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  bool ok() const { return errors.empty(); }
};

ValidationReport validate_config(const Config& config, const RunFlags& flags);
/// Also reports unreadable or malformed files as errors.
ValidationReport validate_file(const std::filesystem::path& path, const RunFlags& flags);

struct Summary {
  std::string table;
  /// x/y series keyed by file name: "n value se" lines.
  std::map<std::string, std::string> series;
};

Summary summarize(const std::vector<ResultRow>& rows);

}  // namespace wbt::cli
