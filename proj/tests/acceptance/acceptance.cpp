// Acceptance suite: one line per criterion, nonzero exit status on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "wbt/convergence.hpp"
#include "wbt/coupling.hpp"
#include "wbt/graphs.hpp"
#include "wbt/measures.hpp"
#include "wbt/stats.hpp"
#include "wbt_cli/commands.hpp"

using namespace wbt;
using nlohmann::json;

namespace {

SamplerSequence family(std::function<SequenceElement(std::size_t)> element, SequenceElement limit) {
  return SamplerSequence{std::move(element), std::move(limit), {}, {}};
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failed checks with their context.
class Checks {
 public:
  void require(bool ok, const std::string& what) {
    ++count_;
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  Outcome outcome(std::string summary) const {
    Outcome o{failed_ == 0, std::move(summary)};
    if (failed_ > 0) {
      o.detail += "; " + std::to_string(failed_) + "/" + std::to_string(count_) + " checks failed:";
      for (const auto& f : failures_) o.detail += " [" + f + "]";
    }
    return o;
  }

 private:
  std::size_t count_ = 0;
  std::size_t failed_ = 0;
  std::vector<std::string> failures_;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

unsigned threads() { return std::max(1u, std::thread::hardware_concurrency()); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

CoupledSampler deterministic_pair() {
  return CoupledSampler::quantile(BranchingSampler::deterministic_wbp(1.0, {0.3, 0.3}),
                                  BranchingSampler::deterministic_wbp(1.0, {0.4, 0.4}));
}

Outcome exact_certification() {
  const auto t0 = std::chrono::steady_clock::now();
  CertifyOptions o;
  o.j_max = 10;
  o.reps = 2;
  const auto r = certify(deterministic_pair(), o, StreamKey(1));
  const double elapsed = seconds_since(t0);
  Checks c;
  c.require(r.rows.size() == 10, "ten levels");
  double worst = 0.0;
  for (const auto& row : r.rows) {
    const double j = static_cast<double>(row.j);
    double s = 0.0;
    for (std::size_t t = 0; t < row.j; ++t) s += std::pow(0.6, static_cast<double>(t)) * std::pow(0.8, j - 1.0 - static_cast<double>(t));
    const double gap = std::pow(0.8, j) - std::pow(0.6, j);
    const double bound = (std::pow(0.8, j) + s) * 0.2;
    worst = std::max({worst, std::abs(row.gap - gap), std::abs(row.bound_statement - bound)});
    c.require(std::abs(row.gap - gap) <= 1e-12, "gap j=" + std::to_string(row.j));
    c.require(std::abs(row.bound_statement - bound) <= 1e-12, "bound j=" + std::to_string(row.j));
    c.require(gap <= bound && row.pass, "gap <= bound j=" + std::to_string(row.j));
  }
  c.require(elapsed < 1.0, "runtime " + fmt(elapsed) + " s");
  return c.outcome("max closed-form error " + fmt(worst) + ", " + fmt(elapsed) + " s");
}

struct Family {
  std::string name;
  CoupledSampler cs;
};

std::vector<Family> certification_families() {
  const auto one = Distribution::point(1.0);
  std::vector<Family> f;
  // WBP
  f.push_back({"wbp poisson/uniform quantile",
               CoupledSampler::quantile(
                   BranchingSampler::independent(TreeMode::wbp, one, Distribution(Poisson{1.5, std::nullopt}),
                                                 Distribution::uniform(0, 0.8)),
                   BranchingSampler::independent(TreeMode::wbp, one, Distribution(Poisson{1.6, std::nullopt}),
                                                 Distribution::uniform(0, 0.85)))});
  f.push_back({"wbp supercritical galton-watson",
               CoupledSampler::quantile(
                   BranchingSampler::independent(TreeMode::wbp, Distribution::uniform(0, 2),
                                                 Distribution(Poisson{1.2, std::nullopt}), one),
                   BranchingSampler::independent(TreeMode::wbp, Distribution::uniform(0, 2),
                                                 Distribution(Poisson{1.3, std::nullopt}), one))});
  {
    CouplingTable t;
    t.base = {{1.0, 1, {0.5}}, {2.0, 2, {0.5, 0.5}}, {0.5, 3, {0.2, 0.3, 0.1}}};
    t.alternative = {{1.0, 1, {0.6}}, {1.0, 2, {0.5, 0.2}}, {0.7, 3, {0.2, 0.2, 0.2}}};
    t.probs = {0.4, 0.4, 0.2};
    f.push_back({"wbp joint table", CoupledSampler::table(TreeMode::wbp, t)});
  }
  f.push_back({"wbp geometric independent",
               CoupledSampler::independent(
                   BranchingSampler::independent(TreeMode::wbp, Distribution::uniform(0.5, 1.5),
                                                 Distribution(Geometric{0.5, 0}), Distribution::uniform(0, 1)),
                   BranchingSampler::independent(TreeMode::wbp, Distribution::uniform(0.5, 1.5),
                                                 Distribution(Geometric{0.5, 0}), Distribution::uniform(0, 1.1)))});
  {
    const auto offspring = Distribution::discrete({1, 2, 3}, {1, 1, 1});
    std::map<std::size_t, Distribution> base_c{{1, Distribution::uniform(0, 1)},
                                               {2, Distribution::uniform(0, 0.5)},
                                               {3, Distribution::uniform(0, 1.0 / 3.0)}};
    std::map<std::size_t, Distribution> alt_c{{1, Distribution::uniform(0, 0.9)},
                                              {2, Distribution::uniform(0, 0.55)},
                                              {3, Distribution::uniform(0.05, 0.35)}};
    f.push_back({"wbp weights given offspring",
                 CoupledSampler::quantile(
                     BranchingSampler::independent(TreeMode::wbp, Distribution::uniform(0.5, 1.5), offspring,
                                                   Distribution::uniform(0, 1), base_c),
                     BranchingSampler::independent(TreeMode::wbp, Distribution::uniform(0.4, 1.6), offspring,
                                                   Distribution::uniform(0, 1), alt_c))});
  }
  f.push_back({"wbp signed weights",
               CoupledSampler::quantile(
                   BranchingSampler::independent(TreeMode::wbp, Distribution::uniform(-1, 1),
                                                 Distribution(Poisson{2.0, std::nullopt}),
                                                 Distribution::uniform(-0.5, 0.5)),
                   BranchingSampler::independent(TreeMode::wbp, Distribution::uniform(-1, 1.2),
                                                 Distribution(Poisson{2.0, std::nullopt}),
                                                 Distribution::uniform(-0.5, 0.6)))});
  // WBT
  f.push_back({"wbt finite offspring quantile",
               CoupledSampler::quantile(
                   BranchingSampler::independent(TreeMode::wbt, Distribution::uniform(0.5, 1.5),
                                                 Distribution::discrete({0, 1, 2, 3}, {1, 1, 1, 1}),
                                                 Distribution::uniform(0.1, 0.4)),
                   BranchingSampler::independent(TreeMode::wbt, Distribution::uniform(0.6, 1.4),
                                                 Distribution::discrete({1, 2, 3}, {1, 2, 1}),
                                                 Distribution::uniform(0.1, 0.5)))});
  f.push_back({"wbt supercritical delayed root",
               CoupledSampler::quantile(
                   BranchingSampler::independent(TreeMode::wbt, one, Distribution(Poisson{1.2, std::nullopt}), one),
                   BranchingSampler::independent(TreeMode::wbt, one, Distribution(Poisson{1.3, std::nullopt}), one),
                   RootSampler::independent(one, Distribution(Poisson{2.0, std::nullopt})),
                   RootSampler::independent(one, Distribution(Poisson{2.1, std::nullopt})))});
  f.push_back({"wbt geometric independent joint root",
               CoupledSampler::independent(
                   BranchingSampler::independent(TreeMode::wbt, Distribution::uniform(0, 2),
                                                 Distribution(Geometric{0.5, 0}), Distribution::uniform(0, 0.8)),
                   BranchingSampler::independent(TreeMode::wbt, Distribution::uniform(0, 2),
                                                 Distribution(Geometric{0.5, 0}), Distribution::uniform(0, 0.9)),
                   RootSampler::joint({{1.0, 1}, {2.0, 3}}, {0.5, 0.5}),
                   RootSampler::joint({{1.0, 2}, {1.5, 3}}, {0.5, 0.5}))});
  return f;
}

Outcome mc_certification() {
  Checks c;
  std::size_t wbp = 0, wbt = 0;
  bool supercritical_wbt = false;
  double worst_ratio = 0.0;
  std::uint64_t label = 0;
  for (const auto& fam : certification_families()) {
    CertifyOptions o;
    o.j_min = 1;
    o.j_max = 6;
    o.reps = 100000;
    o.threads = threads();
    const auto r = certify(fam.cs, o, StreamKey(2024).child(label++));
    (fam.cs.mode() == TreeMode::wbp ? wbp : wbt) += 1;
    if (fam.cs.mode() == TreeMode::wbt && r.constants.rho_hat > 1.0) supercritical_wbt = true;
    for (const auto& row : r.rows) {
      const double bound = std::max(row.bound_statement, row.bound_proof);
      const double slack = 3.0 * std::hypot(row.gap_se, row.bound_se);
      if (bound > 0.0) worst_ratio = std::max(worst_ratio, row.gap / bound);
      c.require(row.gap <= bound + slack + 1e-12 * std::max(1.0, bound),
                fam.name + " j=" + std::to_string(row.j) + " gap " + fmt(row.gap) + " > bound " + fmt(bound));
    }
  }
  c.require(wbp >= 5 && wbt >= 3, "family counts");
  c.require(supercritical_wbt, "a supercritical WBT family");
  return c.outcome(std::to_string(wbp) + " WBP + " + std::to_string(wbt) + " WBT families, j=1..6, 1e5 reps; max gap/bound " +
                   fmt(worst_ratio));
}

double brute_force_d1(const EmpiricalMeasure& x, const EmpiricalMeasure& y) {
  std::vector<std::size_t> perm(x.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      const auto a = x.point(i), b = y.point(perm[i]);
      for (std::size_t k = 0; k < a.size(); ++k) cost += std::abs(a[k] - b[k]);
    }
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(x.size());
}

EmpiricalMeasure random_cloud(RandomStream& rs, std::size_t dim, std::size_t n) {
  std::vector<double> v(dim * n);
  for (auto& x : v) x = 20.0 * rs.uniform() - 10.0;
  return EmpiricalMeasure(dim, std::move(v));
}

Outcome d1_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  RandomStream rs(StreamKey(33));
  Checks c;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 1 + rs.below(8);
    const auto x = random_cloud(rs, 1, n), y = random_cloud(rs, 1, n);
    const double q = d1_empirical_1d(x, y), a = d1_empirical_l1(x, y), b = brute_force_d1(x, y);
    worst = std::max({worst, std::abs(q - b), std::abs(a - b)});
    c.require(std::abs(q - b) <= 1e-9 && std::abs(a - b) <= 1e-9, "1-d cloud " + std::to_string(i));
  }
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 1 + rs.below(6);
    const auto x = random_cloud(rs, 3, n), y = random_cloud(rs, 3, n);
    const double a = d1_empirical_l1(x, y), b = brute_force_d1(x, y);
    worst = std::max(worst, std::abs(a - b));
    c.require(std::abs(a - b) <= 1e-9, "3-d cloud " + std::to_string(i));
  }
  const double elapsed = seconds_since(t0);
  c.require(elapsed < 30.0, "runtime " + fmt(elapsed) + " s");
  return c.outcome("1000 1-d + 200 3-d clouds, max error " + fmt(worst) + ", " + fmt(elapsed) + " s");
}

Outcome martingale_and_fixed_point() {
  Checks c;
  std::ostringstream summary;
  {
    const auto s = BranchingSampler::independent(TreeMode::wbp, Distribution::point(1.0),
                                                 Distribution(Poisson{1.5, std::nullopt}), Distribution::uniform(0, 1));
    const double rho = 0.75;
    const std::size_t reps = 100000, depth = 6;
    std::vector<std::vector<double>> v(depth + 1, std::vector<double>(reps));
    parallel_for(reps, threads(), [&](std::size_t i) {
      const auto t = grow(s, std::nullopt, StreamKey(41).child(i), GrowOptions{depth});
      for (std::size_t j = 0; j <= depth; ++j) v[j][i] = martingale_normalize(t.w(j), rho, j);
    });
    double worst_z = 0.0;
    for (std::size_t j = 1; j <= depth; ++j) {
      const auto e = estimate_mean(v[j]);
      const double z = std::abs(e.mean - 1.0) / e.se;
      worst_z = std::max(worst_z, z);
      c.require(z <= 3.0, "E[W/rho^j] j=" + std::to_string(j) + " = " + fmt(e.mean) + " +- " + fmt(e.se));
    }
    summary << "martingale max |z| " << fmt(worst_z);
  }
  const auto s = BranchingSampler::independent(TreeMode::wbp, Distribution::point(1.0), Distribution::point(2.0),
                                               Distribution::uniform(0, 0.4));
  {
    std::vector<double> r(100000);
    parallel_for(r.size(), threads(),
                 [&](std::size_t i) { r[i] = endogenous_r_sample(s, std::nullopt, 1e-4, StreamKey(42).child(i)).value; });
    const auto e = estimate_mean(r);
    const double z = std::abs(e.mean - 5.0 / 3.0) / e.se;
    c.require(z <= 3.0, "E[R] = " + fmt(e.mean) + " +- " + fmt(e.se));
    summary << "; E[R] " << fmt(e.mean) << " (|z| " << fmt(z) << ")";
  }
  {
    const std::size_t n = 10000;
    std::vector<double> a(n), b(n), t(n);
    parallel_for(n, threads(), [&](std::size_t i) {
      a[i] = endogenous_r_sample(s, std::nullopt, 1e-4, StreamKey(43).child(i)).value;
      b[i] = endogenous_r_sample(s, std::nullopt, 1e-4, StreamKey(44).child(i)).value;
    });
    RandomStream rs(StreamKey(45));
    for (std::size_t i = 0; i < n; ++i) {
      const double c1 = 0.4 * rs.uniform(), c2 = 0.4 * rs.uniform();
      t[i] = 1.0 + c1 * a[rs.below(n)] + c2 * a[rs.below(n)];
    }
    const double d_self = d1_sorted_samples(a, t), d_base = d1_sorted_samples(a, b);
    c.require(d_self <= 3.0 * d_base, "self-consistency " + fmt(d_self) + " vs baseline " + fmt(d_base));
    summary << "; self-consistency d1 " << fmt(d_self) << " vs baseline " << fmt(d_base);
  }
  return c.outcome(summary.str());
}

SequenceElement wbp_pair(double b) { return {BranchingSampler::deterministic_wbp(1.0, {b, b}), std::nullopt}; }

SequenceElement two_children_uniform(double high) {
  return {BranchingSampler::independent(TreeMode::wbp, Distribution::point(1.0), Distribution::point(2.0),
                                        Distribution::uniform(0, high)),
          std::nullopt};
}

BranchingSampler finite_wbt(double scale) {
  return BranchingSampler::independent(TreeMode::wbt, Distribution::point(1.0), Distribution::discrete({1, 2}, {1, 1}),
                                       Distribution::discrete({0.2 * scale, 0.4 * scale}, {1, 1}));
}

std::string trend_text(const Curve& curve) {
  return curve.statistic + " " + fmt(curve.points.front().value.median) + " -> " +
         fmt(curve.points.back().value.median) + " (baseline " + fmt(curve.baseline.median) + ")";
}

Outcome convergence_curves() {
  Checks c;
  std::ostringstream summary;
  double worst = 0.0;
  const auto n_of = [](const CurvePoint& p) { return static_cast<double>(p.n); };
  {
    const auto seq = family([](std::size_t n) { return wbp_pair(0.3 + 0.1 / static_cast<double>(n)); }, wbp_pair(0.3));
    FixedLevelOptions o;
    o.samples = 20;
    o.reps = 3;
    for (const auto& p : fixed_level_convergence(seq, 1, {1, 10, 100, 1000}, o, StreamKey(51)).points)
      worst = std::max(worst, std::abs(p.value.median - 0.2 / n_of(p)));

    MartingaleOptions m;
    m.samples = 10;
    m.reps = 2;
    m.proxy_level = 6;
    const std::vector<std::size_t> grid{10, 100, 1000};
    const auto r = scaled_martingale_convergence(seq, Schedule::logarithmic(), grid, m, StreamKey(52));
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double rho_n = 0.6 + 0.2 / static_cast<double>(grid[i]);
      const double j = static_cast<double>(Schedule::logarithmic()(grid[i]));
      worst = std::max(worst, std::abs(r.normalization_gap[i] - std::abs(std::pow(0.6 / rho_n, j) - 1.0)));
      c.require(r.normalization_gap[i] <= r.normalization_bound[i], "normalization gap within the power bound");
    }
  }
  {
    const auto seq = family([](std::size_t n) {
      return SequenceElement{BranchingSampler::deterministic_wbp(1.0 + 1.0 / static_cast<double>(n), {}), std::nullopt};
    }, {BranchingSampler::deterministic_wbp(1.0, {}), std::nullopt});
    RLimitOptions o;
    o.samples = 10;
    o.reps = 2;
    for (const auto& p : r_limit_convergence(seq, Schedule::constant(2), {1, 10, 100}, o, StreamKey(53)).d1.points)
      worst = std::max(worst, std::abs(p.value.median - 1.0 / n_of(p)));
  }
  {
    const auto seq = family([](std::size_t n) { return SequenceElement{finite_wbt(1.0 + 1.0 / static_cast<double>(n)), std::nullopt}; }, {finite_wbt(1.0), std::nullopt});
    const auto r = lemma_condition_check(seq, {1, 10, 100, 1000});
    for (const auto& row : r.rows) worst = std::max(worst, std::abs(row.d1_nu - 0.3 / static_cast<double>(row.n)));
    c.require(r.hypotheses_vanish && r.conclusion_vanishes, "moment lemma scaling family vanishes");
  }
  c.require(worst <= 1e-9, "closed forms, worst error " + fmt(worst));
  summary << "closed forms max error " << fmt(worst);

  {
    const auto seq = family([](std::size_t n) { return two_children_uniform(0.5 + 2.0 / static_cast<double>(n)); }, two_children_uniform(0.5));
    FixedLevelOptions o;
    o.samples = 2000;
    o.reps = 20;
    o.threads = threads();
    const auto curve = fixed_level_convergence(seq, 3, {2, 8, 32, 128, 512}, o, StreamKey(54));
    c.require(curve.trend().pass(), "fixed-level trend: " + trend_text(curve));
    summary << "; fixed-level " << trend_text(curve);
  }
  {
    const auto seq = family([](std::size_t n) { return two_children_uniform(1.0 + 1.0 / static_cast<double>(n)); }, two_children_uniform(1.0));
    MartingaleOptions o;
    o.samples = 300;
    o.reps = 20;
    o.proxy_level = 10;
    o.mean_one = true;
    o.threads = threads();
    const auto r = scaled_martingale_convergence(seq, Schedule::logarithmic(), {4, 16, 64, 256}, o, StreamKey(55));
    c.require(r.d1_rho_n && r.d1_rho_n->trend().pass(),
              "martingale trend: " + (r.d1_rho_n ? trend_text(*r.d1_rho_n) : std::string("no d1 curve")));
    if (r.d1_rho_n) summary << "; martingale " << trend_text(*r.d1_rho_n);
  }
  {
    const auto seq = family([](std::size_t n) { return two_children_uniform(0.4 + 0.4 / static_cast<double>(n)); }, two_children_uniform(0.4));
    RLimitOptions o;
    o.samples = 1000;
    o.reps = 20;
    o.threads = threads();
    const auto r = r_limit_convergence(seq, Schedule::logarithmic(), {2, 8, 32, 128, 512}, o, StreamKey(56));
    c.require(r.d1.trend().pass(), "r-limit trend: " + trend_text(r.d1));
    summary << "; r-limit " << trend_text(r.d1);
  }
  {
    const json doc = json::parse(R"({
      "experiment": "converge", "id": "negative_control", "seed": 11, "study": "r_limit",
      "family": {"sampler": {"mode": "wbp", "mark": 1, "offspring": 2,
        "weight": {"type": "uniform", "low": 0, "high": {"base": 0.5, "coef": 1, "power": 0.5}}}},
      "n_grid": [4, 16, 64, 256], "schedule": {"kind": "linear", "a": 1}, "samples": 200, "reps": 5})");
    const auto rep = cli::validate_config(cli::parse_config(doc), {});
    const bool flagged = std::any_of(rep.warnings.begin(), rep.warnings.end(), [](const std::string& w) {
                           return w.find("does not vanish") != std::string::npos;
                         }) ||
                         !rep.errors.empty();
    c.require(flagged, "negative control flagged by validate");
    summary << "; negative control flagged";
  }
  return c.outcome(summary.str());
}

bool strictly_decreasing(const Curve& curve) {
  for (std::size_t i = 1; i < curve.points.size(); ++i)
    if (!(curve.points[i].value.median < curve.points[i - 1].value.median)) return false;
  return true;
}

std::string medians(const Curve& curve) {
  std::string s;
  for (const auto& p : curve.points) s += (s.empty() ? "" : " ") + fmt(p.value.median);
  return s;
}

Outcome size_biased_rates() {
  Checks c;
  SizeBiasOptions o;
  o.moment_eps = 2.0;
  o.delta_star = 0.4;
  o.delta = 0.4;
  o.reps = 20;
  o.threads = threads();
  const auto r = sizebias_rate_experiment(Distribution(Geometric{0.5, 1}), {100, 1000, 10000, 100000}, o,
                                          StreamKey(61));
  c.require(strictly_decreasing(r.scaled_star), "nu_star medians " + medians(r.scaled_star));
  c.require(strictly_decreasing(r.scaled_nu), "nu medians " + medians(r.scaled_nu));

  const auto sb = size_biased(DegreeSequence{{1, 2, 3}});
  c.require(sb.n == 3 && sb.total == 6, "sizes of (1,2,3)");
  c.require(sb.nu_star_counts == std::map<std::size_t, std::uint64_t>{{1, 1}, {2, 1}, {3, 1}}, "nu_star counts");
  c.require(sb.nu_counts == std::map<std::size_t, std::uint64_t>{{0, 1}, {1, 2}, {2, 3}}, "nu counts");
  return c.outcome("nu_star medians " + medians(r.scaled_star) + "; nu medians " + medians(r.scaled_nu));
}

Outcome gw_coupling() {
  Checks c;
  std::ostringstream summary;
  const auto law = Distribution::discrete({1, 2, 3}, {1, 1, 1});
  {
    GwCouplingOptions o;
    o.reps = 4000;
    o.threads = threads();
    const auto r = gw_coupling_experiment(law, {100, 1000, 10000}, Schedule::constant(1), o, StreamKey(71));
    for (std::size_t g = 0; g < r.first_generation_gap.points.size(); ++g) {
      const auto& gap = r.first_generation_gap.points[g].replicates;
      const auto& d1 = r.first_generation_d1.points[g].replicates;
      std::vector<double> diff(gap.size());
      for (std::size_t i = 0; i < gap.size(); ++i) diff[i] = gap[i] - d1[i];
      const auto e = estimate_mean(diff);
      const double z = e.se > 0.0 ? std::abs(e.mean) / e.se : (e.mean == 0.0 ? 0.0 : INFINITY);
      const auto n = std::to_string(r.first_generation_gap.points[g].n);
      c.require(z <= 3.0, "first generation n=" + n + " diff " + fmt(e.mean) + " +- " + fmt(e.se));
      summary << (g ? ", " : "first generation |z| ") << "n=" << n << ": " << fmt(z);
    }
  }
  {
    GwCouplingOptions o;
    o.reps = 20;
    o.threads = threads();
    const auto r = gw_coupling_experiment(law, {100, 1000, 10000, 100000}, Schedule::loglog(1.0, 1), o, StreamKey(72));
    c.require(r.normalized_max.trend().pass(), "normalized maxima trend: " + trend_text(r.normalized_max));
    c.require(r.absolute_max.trend().pass(), "scaled maxima trend: " + trend_text(r.absolute_max));
    summary << "; " << trend_text(r.normalized_max) << "; " << trend_text(r.absolute_max);
  }
  return c.outcome(summary.str());
}

Outcome power_bound_property() {
  Checks c;
  RandomStream rs(StreamKey(81));
  std::size_t violations = 0;
  for (int i = 0; i < 100000; ++i) {
    const double x = 10.0 * rs.uniform();
    const std::size_t j = 1 + rs.below(50);
    const auto b = power_bounds(x, j);
    if (!(b.lhs1 <= b.rhs1) || !(b.lhs2 <= b.rhs2)) {
      ++violations;
      c.require(false, "x=" + fmt(x) + " j=" + std::to_string(j));
    }
  }
  return c.outcome("1e5 draws, " + std::to_string(violations) + " violations");
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::map<std::string, std::string> directory_bytes(const std::filesystem::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) files[entry.path().filename().string()] = slurp(entry.path());
  return files;
}

Outcome reproducibility() {
  const std::vector<json> docs = {
      json::parse(R"({"experiment": "certify", "id": "pair", "seed": 1,
        "coupling": {"kind": "quantile",
          "base": {"mode": "wbp", "mark": 1, "offspring": {"type": "poisson", "lambda": 1.5}, "weight": {"type": "uniform", "low": 0, "high": 0.8}},
          "alternative": {"mode": "wbp", "mark": 1, "offspring": {"type": "poisson", "lambda": 1.6}, "weight": {"type": "uniform", "low": 0, "high": 0.85}}},
        "j_max": 4, "reps": 2000})"),
      json::parse(R"({"experiment": "simulate", "id": "sim", "seed": 3,
        "sampler": {"mode": "wbp", "mark": 1, "offspring": 2, "weight": {"type": "uniform", "low": 0, "high": 0.4}},
        "depth": 4, "samples": 500, "endogenous": {"eps": 1e-3}})"),
      json::parse(R"({"experiment": "converge", "id": "rl", "seed": 3, "study": "r_limit",
        "family": {"sampler": {"mode": "wbp", "mark": 1, "offspring": 2,
          "weight": {"type": "uniform", "low": 0, "high": {"base": 0.5, "coef": 0.2, "power": 1}}}},
        "n_grid": [4, 16, 64], "schedule": {"kind": "logarithmic", "a": 2}, "samples": 50, "reps": 3})"),
      json::parse(R"({"experiment": "sizebias", "id": "geo", "seed": 5, "degree_law": {"type": "geometric", "p": 0.5},
        "n_grid": [100, 1000], "reps": 5})"),
      json::parse(R"({"experiment": "graph", "id": "g", "seed": 9,
        "degree_law": {"type": "discrete", "atoms": [1, 2, 3], "probs": [0.25, 0.5, 0.25]},
        "n": 2000, "explore": {"start": 0, "depth": 3}, "tree_coupling": {"reps": 50, "depth": 2},
        "export_edges": "g.edges"})"),
      json::parse(R"({"experiment": "rank", "id": "rank", "seed": 2, "regular": {"n": 200, "d": 3},
        "damping": 0.5, "depth": 8, "samples": 100, "reps": 2})")};
  Checks c;
  const auto root = std::filesystem::temp_directory_path() / "wbt_acceptance_repro";
  std::size_t compared = 0;
  for (const auto& doc : docs) {
    const auto config = cli::parse_config(doc);
    const std::string id = doc.at("id");
    std::map<std::string, std::string> first;
    for (int run = 0; run < 2; ++run) {
      const auto dir = root / (id + "_" + std::to_string(run));
      std::filesystem::remove_all(dir);
      std::filesystem::create_directories(dir);
      // The second run uses every available worker; results must not depend on it.
      cli::write_run(cli::run_experiment(config, cli::RunFlags{std::nullopt, run == 0 ? 1u : threads()}), dir / "out.csv");
      auto files = directory_bytes(dir);
      if (run == 0) {
        first = std::move(files);
      } else {
        c.require(files == first, id + " files differ");
        compared += files.size();
      }
    }
  }
  std::filesystem::remove_all(root);
  return c.outcome(std::to_string(docs.size()) + " experiments, " + std::to_string(compared) + " files byte-identical");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"exact certification of the deterministic pair", exact_certification},
      {"Monte Carlo certification of WBP and WBT families", mc_certification},
      {"d1 oracle equivalence", d1_oracles},
      {"martingale mean and fixed point", martingale_and_fixed_point},
      {"convergence curves", convergence_curves},
      {"size-biased degree rates", size_biased_rates},
      {"Galton-Watson coupling", gw_coupling},
      {"power-bound inequalities", power_bound_property},
      {"reproducibility", reproducibility}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("[%s] %zu %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
