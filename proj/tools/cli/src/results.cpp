#include "wbt_cli/results.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace wbt::cli {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

template <class T>
T parse_field(const std::string& s, std::size_t line, const char* name) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end)
    throw std::invalid_argument("result line " + std::to_string(line) + ": bad " + name + " '" + s + "'");
  return v;
}

}  // namespace

std::string format_number(double x) {
  if (x == 0.0) return "0";
  std::array<char, 64> buf{};
  const auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  if (ec != std::errc()) throw std::runtime_error("format_number failed");
  return {buf.data(), p};
}

void sort_rows(std::vector<ResultRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.experiment, a.statistic, a.n, a.level, a.note) <
           std::tie(b.experiment, b.statistic, b.n, b.level, b.note);
  });
}

void write_rows(std::ostream& out, std::vector<ResultRow> rows) {
  sort_rows(rows);
  out << kResultHeader << '\n';
  for (const auto& r : rows) {
    if (!std::isfinite(r.value) || !std::isfinite(r.se))
      throw std::runtime_error("non-finite value for statistic '" + r.statistic + "' of " + r.experiment);
    if (r.note.find_first_of(",\n") != std::string::npos)
      throw std::runtime_error("note of '" + r.statistic + "' contains a comma or line break");
    out << r.experiment << ',' << r.n << ',' << r.level << ',' << r.reps << ',' << r.statistic << ','
        << format_number(r.value) << ',' << format_number(r.se) << ',' << r.note << '\n';
  }
}

std::vector<ResultRow> read_rows(std::istream& in) {
  std::vector<ResultRow> rows;
  std::string line;
  if (!std::getline(in, line)) return rows;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultHeader) throw std::invalid_argument("result file: header must be '" + std::string(kResultHeader) + "'");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 8)
      throw std::invalid_argument("result line " + std::to_string(lineno) + ": expected 8 fields, got " +
                                  std::to_string(f.size()));
    ResultRow r;
    r.experiment = f[0];
    r.n = parse_field<std::size_t>(f[1], lineno, "n");
    r.level = parse_field<std::size_t>(f[2], lineno, "level");
    r.reps = parse_field<std::size_t>(f[3], lineno, "reps");
    r.statistic = f[4];
    r.value = parse_field<double>(f[5], lineno, "value");
    r.se = parse_field<double>(f[6], lineno, "se");
    r.note = f[7];
    if (r.experiment.empty() || r.statistic.empty())
      throw std::invalid_argument("result line " + std::to_string(lineno) + ": empty experiment or statistic");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string config_hash(const nlohmann::json& doc) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : doc.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

void write_manifest(std::ostream& out, const Manifest& m) {
  nlohmann::ordered_json j;
  j["toolkit_version"] = m.toolkit_version;
  j["experiment"] = m.experiment;
  j["kind"] = m.kind;
  j["config_hash"] = m.config_hash;
  j["seed"] = m.seed;
  j["rows"] = m.rows;
  out << j.dump(2) << '\n';
}

}  // namespace wbt::cli
