#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace wbt::cli {

inline constexpr const char* kResultHeader = "experiment,n,level,reps,statistic,value,se,note";

/// One long-format result. `reps` is the number of replications behind the
/// value (0 for exact values, whose se is 0).
struct ResultRow {
  std::string experiment;
  std::size_t n = 0;
  std::size_t level = 0;
  std::size_t reps = 0;
  std::string statistic;
  double value = 0.0;
  double se = 0.0;
  std::string note;
  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

/// Shortest round-trip decimal form.
std::string format_number(double x);

/// Sorts by (experiment, statistic, n, level, note) so output is independent
/// of the order rows were produced in.
void sort_rows(std::vector<ResultRow>& rows);
/// Writes the header and the rows in canonical order. Throws on non-finite
/// values.
void write_rows(std::ostream& out, std::vector<ResultRow> rows);
/// Throws std::invalid_argument naming the line on malformed input.
std::vector<ResultRow> read_rows(std::istream& in);

struct Manifest {
  std::string toolkit_version;
  std::string experiment;
  std::string kind;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::size_t rows = 0;
};

/// FNV-1a 64 of the canonical (key-sorted, compact) dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& doc);
void write_manifest(std::ostream& out, const Manifest& m);

}  // namespace wbt::cli
