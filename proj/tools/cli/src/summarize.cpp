#include <algorithm>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "wbt_cli/commands.hpp"

namespace wbt::cli {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(6) << x;
  return os.str();
}

void pass_matrix(std::ostringstream& os, const std::vector<const ResultRow*>& rows) {
  std::map<std::size_t, bool> by_level;
  for (const auto* r : rows) by_level[r->level] = r->value != 0.0;
  std::size_t passed = 0;
  os << "  certification  ";
  for (const auto& [j, ok] : by_level) {
    os << " j=" << j << ':' << (ok ? "pass" : "FAIL");
    passed += ok ? 1 : 0;
  }
  os << "   (" << passed << '/' << by_level.size() << " passed)\n";
}

}  // namespace

Summary summarize(const std::vector<ResultRow>& input) {
  Summary s;
  if (input.empty()) {
    s.table = "no rows\n";
    return s;
  }
  std::vector<ResultRow> rows = input;
  sort_rows(rows);
  std::map<std::string, std::vector<const ResultRow*>> by_experiment;
  for (const auto& r : rows) by_experiment[r.experiment].push_back(&r);

  std::ostringstream os;
  for (const auto& [exp, list] : by_experiment) {
    os << "== " << exp << " (" << list.size() << " rows)\n";
    std::map<std::string, std::vector<const ResultRow*>> by_stat;
    for (const auto* r : list) by_stat[r->statistic].push_back(r);

    if (by_stat.count("pass")) pass_matrix(os, by_stat.at("pass"));

    // Curves: per-n medians with the baseline overlay.
    std::set<std::string> curve_names;
    for (const auto& [stat, _] : by_stat)
      if (ends_with(stat, "_median")) curve_names.insert(stat.substr(0, stat.size() - 7));
    for (const auto& name : curve_names) {
      const auto& pts = by_stat.at(name + "_median");
      const ResultRow* baseline = by_stat.count(name + "_baseline") ? by_stat.at(name + "_baseline").front() : nullptr;
      os << "  " << name << " (median over reps)\n";
      std::ostringstream series;
      for (const auto* r : pts) {
        os << "    n=" << std::setw(8) << r->n << "  level=" << std::setw(3) << r->level << "  " << std::setw(12)
           << fmt(r->value) << "  se " << fmt(r->se) << '\n';
        series << r->n << ' ' << format_number(r->value) << ' ' << format_number(r->se) << '\n';
      }
      if (baseline) {
        os << "    baseline " << fmt(baseline->value) << " (3x = " << fmt(3.0 * baseline->value) << ")\n";
        std::ostringstream b;
        for (const auto* r : pts) b << r->n << ' ' << format_number(baseline->value) << ' ' << format_number(baseline->se) << '\n';
        s.series[exp + "__" + name + "_baseline.dat"] = b.str();
      }
      if (by_stat.count(name + "_trend_pass"))
        os << "    trend: " << (by_stat.at(name + "_trend_pass").front()->value != 0.0 ? "pass" : "FAIL") << '\n';
      s.series[exp + "__" + name + ".dat"] = series.str();
    }

    for (const auto& [stat, list2] : by_stat) {
      if (stat == "pass") continue;
      bool in_curve = false;
      for (const auto& name : curve_names)
        in_curve = in_curve || stat.rfind(name + "_", 0) == 0;
      if (in_curve) continue;
      for (const auto* r : list2) {
        os << "  " << std::left << std::setw(32) << stat << std::right << " n=" << r->n << " level=" << r->level << "  "
           << fmt(r->value);
        if (r->reps > 0) os << " +- " << fmt(r->se) << " (" << r->reps << " reps)";
        if (!r->note.empty() && r->note != "exact") os << "  [" << r->note << ']';
        os << '\n';
      }
    }
  }
  s.table = os.str();
  return s;
}

}  // namespace wbt::cli
