#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wbt/convergence.hpp"
#include "wbt/coupling.hpp"
#include "wbt/graphs.hpp"

namespace wbt::cli {

/// A config problem; `field` is the dotted path of the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message);
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class ExperimentKind { simulate, certify, converge, graph, sizebias, rank };

std::string to_string(ExperimentKind k);

struct Config {
  nlohmann::json doc;
  ExperimentKind kind = ExperimentKind::simulate;
  std::string id;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  /// Relative paths inside the config resolve against this directory.
  std::filesystem::path base_dir;
};

Config parse_config(const nlohmann::json& doc, std::filesystem::path base_dir = {});
/// Throws ConfigError with field "" when the file is unreadable or not JSON.
Config load_config(const std::filesystem::path& path);

/// Replaces every parameter object {"base", "coef", "power"} by
/// base + coef * n^(-power); with n empty (the limit) by base.
nlohmann::json instantiate(const nlohmann::json& spec, std::optional<std::size_t> n);

BranchingSampler parse_sampler(const nlohmann::json& j, const std::string& field);
std::optional<RootSampler> parse_root(const nlohmann::json& parent, const std::string& key, const std::string& field);
CoupledSampler parse_coupling(const nlohmann::json& j, const std::string& field);
SamplerSequence parse_family(const nlohmann::json& j, const std::string& field);
Schedule parse_schedule(const nlohmann::json& j, const std::string& field);
Distribution parse_distribution(const nlohmann::json& j, const std::string& field);

std::vector<std::size_t> parse_grid(const nlohmann::json& parent, const std::string& key, const std::string& field);
std::size_t positive_count(const nlohmann::json& parent, const std::string& key, std::size_t fallback,
                           const std::string& field);
double number_in(const nlohmann::json& parent, const std::string& key, double fallback, const std::string& field);

DegreeInput parse_degree_input(const nlohmann::json& doc, const std::filesystem::path& base_dir, StreamKey key);

}  // namespace wbt::cli
