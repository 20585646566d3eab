#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "wbt/stats.hpp"
#include "wbt_cli/commands.hpp"

namespace wbt::cli {

namespace {

using nlohmann::json;

const json& section(const json& doc, const std::string& key) {
  if (!doc.contains(key)) throw ConfigError(key, "missing required field");
  return doc.at(key);
}

std::size_t count_or(const json& doc, const std::string& key, std::size_t fallback) {
  return positive_count(doc, key, fallback, "");
}

std::size_t level_or(const json& doc, const std::string& key, std::size_t fallback) {
  if (!doc.contains(key)) return fallback;
  const auto& v = doc.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw ConfigError(key, "expected a nonnegative integer");
  return v.get<std::size_t>();
}

class Emitter {
 public:
  Emitter(std::string id, std::vector<ResultRow>& rows) : id_(std::move(id)), rows_(rows) {}

  void exact(const std::string& stat, std::size_t n, std::size_t level, double value, std::string note = "exact") {
    rows_.push_back({id_, n, level, 0, stat, value, 0.0, std::move(note)});
  }
  void flag(const std::string& stat, std::size_t n, std::size_t level, bool v) { exact(stat, n, level, v ? 1.0 : 0.0, v ? "yes" : "no"); }
  void mc(const std::string& stat, std::size_t n, std::size_t level, std::size_t reps, double value, double se,
          std::string note = "") {
    rows_.push_back({id_, n, level, reps, stat, value, se, std::move(note)});
  }
  void mean(const std::string& stat, std::size_t n, std::size_t level, const MeanEstimate& m) {
    mc(stat, n, level, m.count, m.mean, m.se);
  }

  // Median rows carry the normal-approximation SE of a median, sqrt(pi/2)
  // times the SE of the mean.
  void curve(const Curve& c) {
    const double k = std::sqrt(std::numbers::pi / 2.0);
    for (const auto& p : c.points) {
      mc(c.statistic + "_mean", p.n, p.level, p.value.reps, p.value.mean, p.value.se);
      mc(c.statistic + "_median", p.n, p.level, p.value.reps, p.value.median, k * p.value.se, "median");
    }
    if (c.baseline.reps == 0 || c.points.empty()) return;
    const auto& last = c.points.back();
    mc(c.statistic + "_baseline", last.n, last.level, c.baseline.reps, c.baseline.median, k * c.baseline.se, "median");
    const auto t = c.trend();
    flag(c.statistic + "_trend_halves", 0, 0, t.halves);
    flag(c.statistic + "_trend_below_baseline", 0, 0, t.below_baseline);
    flag(c.statistic + "_trend_pass", 0, 0, t.pass());
  }

  void strictly_decreasing(const Curve& c) {
    bool dec = true;
    for (std::size_t i = 1; i < c.points.size(); ++i)
      dec = dec && c.points[i].value.median < c.points[i - 1].value.median;
    flag(c.statistic + "_strictly_decreasing", 0, 0, dec);
  }

 private:
  std::string id_;
  std::vector<ResultRow>& rows_;
};

std::size_t node_cap(const json& doc) { return count_or(doc, "node_cap", kDefaultNodeCap); }

void emit_moments(Emitter& out, const Moments& m, TreeMode mode, const std::string& prefix = "") {
  out.exact(prefix + "rho", 0, 0, m.rho);
  out.exact(prefix + "mean_abs_q", 0, 0, m.mean_abs_q);
  out.exact(prefix + "mean_offspring", 0, 0, m.mean_offspring);
  if (mode == TreeMode::wbt) out.exact(prefix + "mean_abs_cq", 0, 0, m.mean_abs_cq);
}

std::string contraction_message(double rho) {
  std::ostringstream os;
  os << "contraction premise violated: the R-limit requires rho < 1, but rho = " << rho;
  return os.str();
}

// ---------------------------------------------------------------- simulate

struct SimulatePlan {
  BranchingSampler sampler;
  std::optional<RootSampler> root;
  std::size_t depth;
  std::size_t samples;
  std::optional<double> eps;
};

SimulatePlan prepare_simulate(const Config& c) {
  const json& d = c.doc;
  SimulatePlan p{parse_sampler(section(d, "sampler"), "sampler"), parse_root(d, "root", ""), level_or(d, "depth", 5),
                 count_or(d, "samples", 1000), std::nullopt};
  if (p.root && p.sampler.mode() != TreeMode::wbt) throw ConfigError("root", "a delayed root needs a wbt sampler");
  if (d.contains("endogenous")) {
    p.eps = number_in(d.at("endogenous"), "eps", 1e-4, "endogenous");
    if (!(*p.eps > 0.0)) throw ConfigError("endogenous.eps", "must be positive");
  }
  return p;
}

void run_simulate(const Config& c, StreamKey key, unsigned threads, Emitter& out) {
  const SimulatePlan p = prepare_simulate(c);
  const NodeSource src = make_source(p.sampler, p.root);
  const std::size_t J = p.depth, S = p.samples;
  const auto analytic = p.sampler.analytic_moments();
  const bool normalize = analytic && analytic->rho > 0.0 && p.sampler.nonnegative_weights();
  std::vector<double> w(S * (J + 1)), r(S * (J + 1)), z(S * (J + 1)), h(S * (J + 1));
  const GrowOptions go{J, node_cap(c.doc), false};
  parallel_for(S, threads, [&](std::size_t i) {
    const auto t = grow(src, key.child(0).child(i), go);
    for (std::size_t j = 0; j <= J; ++j) {
      w[j * S + i] = t.w(j);
      r[j * S + i] = t.r(j);
      z[j * S + i] = static_cast<double>(t.generation_size(j));
      if (normalize) h[j * S + i] = t.homogeneous(j) / std::pow(analytic->rho, static_cast<double>(j));
    }
  });
  auto slice = [&](const std::vector<double>& v, std::size_t j) { return std::span<const double>(v.data() + j * S, S); };
  for (std::size_t j = 0; j <= J; ++j) {
    out.mean("mean_w", 0, j, estimate_mean(slice(w, j)));
    out.mean("mean_r", 0, j, estimate_mean(slice(r, j)));
    out.mean("mean_generation_size", 0, j, estimate_mean(slice(z, j)));
    if (normalize) out.mean("mean_normalized_w", 0, j, estimate_mean(slice(h, j)));
  }
  if (analytic) emit_moments(out, *analytic, p.sampler.mode());
  if (p.eps) {
    const Moments m = moments(p.sampler);
    if (!(m.rho < 1.0)) throw ConfigError("endogenous", contraction_message(m.rho));
    std::vector<double> v(S);
    std::vector<std::size_t> levels(S);
    double bound = 0.0;
    parallel_for(S, threads, [&](std::size_t i) {
      const auto e = endogenous_r_sample(p.sampler, p.root, *p.eps, key.child(1).child(i));
      v[i] = e.value;
      levels[i] = e.levels;
      if (i == 0) bound = e.tail_bound;
    });
    out.mean("endogenous_r", 0, levels.front(), estimate_mean(v));
    out.exact("endogenous_tail_bound", 0, levels.front(), bound);
  }
}

// ---------------------------------------------------------------- certify

struct CertifyPlan {
  CoupledSampler coupling;
  CertifyOptions options;
};

CertifyPlan prepare_certify(const Config& c) {
  const json& d = c.doc;
  CertifyPlan p{parse_coupling(section(d, "coupling"), "coupling"), {}};
  p.options.j_min = level_or(d, "j_min", 1);
  p.options.j_max = level_or(d, "j_max", 6);
  if (p.options.j_min > p.options.j_max) throw ConfigError("j_min", "must not exceed j_max");
  p.options.reps = count_or(d, "reps", 100000);
  if (p.options.reps < 2) throw ConfigError("reps", "need at least two replications");
  p.options.constant_draws = count_or(d, "constant_draws", 200000);
  p.options.node_cap = node_cap(d);
  return p;
}

void run_certify(const Config& c, StreamKey key, unsigned threads, Emitter& out) {
  CertifyPlan p = prepare_certify(c);
  p.options.threads = threads;
  const auto report = certify(p.coupling, p.options, key);
  const auto& cc = report.constants;
  const bool wbt = cc.mode == TreeMode::wbt;
  const std::size_t cd = cc.exact ? 0 : p.options.constant_draws;
  const std::string cnote = cc.exact ? "exact" : "estimated";
  out.exact("rho", 0, 0, cc.rho);
  out.exact("rho_hat", 0, 0, cc.rho_hat);
  out.exact("mean_abs_q", 0, 0, cc.mean_abs_q);
  if (wbt) {
    out.exact("mean_abs_cq", 0, 0, cc.mean_abs_cq);
    out.mc("e_wbt", 0, 0, cd, cc.e_wbt, cc.e_wbt_se, cnote);
    out.mc("e_star", 0, 0, cd, cc.e_star, cc.e_star_se, cnote);
  } else {
    out.mc("e", 0, 0, cd, cc.e, cc.e_se, cnote);
    out.flag("rho_gap_ok", 0, 0, report.rho_gap_ok);
  }
  for (const auto& row : report.rows) {
    out.mc("gap", 0, row.j, p.options.reps, row.gap, row.gap_se);
    if (wbt) {
      out.mc("bound_statement", 0, row.j, cd, row.bound_statement, row.bound_se, cnote);
      out.mc("bound_proof", 0, row.j, cd, row.bound_proof, row.bound_se, cnote);
    } else {
      out.mc("bound", 0, row.j, cd, row.bound_statement, row.bound_se, cnote);
    }
    out.flag("pass", 0, row.j, row.pass);
  }
  out.flag("all_pass", 0, 0, report.all_pass());
}

// ---------------------------------------------------------------- converge

enum class Study { fixed_level, martingale, r_limit, lemma };

struct ConvergePlan {
  Study study;
  SamplerSequence family;
  std::vector<std::size_t> n_grid;
  Schedule schedule = Schedule::constant(0);
};

ConvergePlan prepare_converge(const Config& c) {
  const json& d = c.doc;
  const std::string s = section(d, "study").get<std::string>();
  Study study;
  if (s == "fixed_level") study = Study::fixed_level;
  else if (s == "martingale") study = Study::martingale;
  else if (s == "r_limit") study = Study::r_limit;
  else if (s == "lemma") study = Study::lemma;
  else throw ConfigError("study", "unknown study '" + s + "' (fixed_level | martingale | r_limit | lemma)");
  ConvergePlan p{study, parse_family(section(d, "family"), "family"), parse_grid(d, "n_grid", ""), Schedule::constant(0)};
  if (study == Study::fixed_level) p.schedule = Schedule::constant(level_or(d, "level", 3));
  if (study == Study::martingale || study == Study::r_limit) p.schedule = parse_schedule(section(d, "schedule"), "schedule");
  if (study == Study::lemma && p.family.mode() != TreeMode::wbt) throw ConfigError("family.sampler.mode", "the lemma study needs wbt samplers");
  return p;
}

void run_converge(const Config& c, StreamKey key, unsigned threads, Emitter& out, std::vector<std::string>& messages) {
  const ConvergePlan p = prepare_converge(c);
  const json& d = c.doc;
  const std::size_t cap = node_cap(d);
  if (p.study != Study::lemma) {
    const auto premise = schedule_premise(p.family, p.schedule, p.n_grid);
    out.flag("schedule_premise_holds", 0, 0, premise.holds);
    if (!premise.message.empty()) messages.push_back(premise.message);
  }
  switch (p.study) {
    case Study::fixed_level: {
      FixedLevelOptions o;
      o.samples = count_or(d, "samples", 1000);
      o.reps = count_or(d, "reps", 20);
      const std::string q = d.value("quantity", "w");
      if (q != "w" && q != "r") throw ConfigError("quantity", "expected w or r");
      o.quantity = q == "w" ? Quantity::w : Quantity::r;
      o.common_random_numbers = d.value("common_random_numbers", false);
      o.threads = threads;
      o.node_cap = cap;
      out.curve(fixed_level_convergence(p.family, p.schedule(1), p.n_grid, o, key));
      break;
    }
    case Study::martingale: {
      MartingaleOptions o;
      o.samples = count_or(d, "samples", 500);
      o.reps = count_or(d, "reps", 20);
      o.proxy_level = count_or(d, "proxy_level", 14);
      o.mean_one = d.value("mean_one", false);
      o.threads = threads;
      o.node_cap = cap;
      const auto rep = scaled_martingale_convergence(p.family, p.schedule, p.n_grid, o, key);
      out.curve(rep.ks_rho_n);
      out.curve(rep.ks_rho);
      out.curve(rep.ks_baseline);
      if (rep.d1_rho_n) out.curve(*rep.d1_rho_n);
      if (rep.d1_rho) out.curve(*rep.d1_rho);
      if (rep.d1_baseline) out.curve(*rep.d1_baseline);
      for (std::size_t g = 0; g < p.n_grid.size(); ++g) {
        out.exact("normalization_gap", p.n_grid[g], p.schedule(p.n_grid[g]), rep.normalization_gap[g]);
        out.exact("normalization_bound", p.n_grid[g], p.schedule(p.n_grid[g]), rep.normalization_bound[g]);
      }
      break;
    }
    case Study::r_limit: {
      const Moments m = moments(p.family.limit.sampler);
      if (!(m.rho < 1.0)) throw ConfigError("family", contraction_message(m.rho));
      RLimitOptions o;
      o.samples = count_or(d, "samples", 1000);
      o.reps = count_or(d, "reps", 20);
      o.eps = number_in(d, "eps", 1e-4, "");
      o.threads = threads;
      o.node_cap = cap;
      const auto rep = r_limit_convergence(p.family, p.schedule, p.n_grid, o, key);
      out.curve(rep.d1);
      for (std::size_t g = 0; g < p.n_grid.size(); ++g) {
        const std::size_t k = p.schedule(p.n_grid[g]);
        out.exact("tail_slack", p.n_grid[g], k, rep.tail_slack[g]);
        out.mean("mean_r", p.n_grid[g], k, rep.mean_r[g]);
      }
      if (rep.limit_mean) out.exact("limit_mean_r", 0, 0, *rep.limit_mean);
      break;
    }
    case Study::lemma: {
      const auto rep = lemma_condition_check(p.family, p.n_grid);
      for (const auto& row : rep.rows) {
        out.exact("d1_node_law", row.n, 0, row.d1_nu);
        out.exact("abs_cq_gap", row.n, 0, row.abs_cq_gap);
        out.exact("abs_nc_gap", row.n, 0, row.abs_nc_gap);
        out.exact("d1_weight_vector_law", row.n, 0, row.d1_mu);
      }
      out.flag("hypotheses_vanish", 0, 0, rep.hypotheses_vanish);
      out.flag("conclusion_vanishes", 0, 0, rep.conclusion_vanishes);
      break;
    }
  }
}

// ---------------------------------------------------------------- graph

struct GraphPlan {
  DegreeInput degrees;
  bool parity_fixed = false;
  PairingOptions pairing;
};

GraphPlan prepare_graph(const Config& c, StreamKey key) {
  const json& d = c.doc;
  GraphPlan p{parse_degree_input(d, c.base_dir, key), false, {}};
  p.pairing.simple = d.value("simple", false);
  p.pairing.max_attempts = count_or(d, "max_attempts", 1000);
  if (auto* ds = std::get_if<DegreeSequence>(&p.degrees)) {
    if (ds->total() % 2 != 0) {
      if (!d.contains("degree_law")) throw ConfigError("degrees", "total degree " + std::to_string(ds->total()) + " is odd");
      // A sampled sequence with odd total gets one extra half-edge on its last node.
      ++ds->degrees.back();
      p.parity_fixed = true;
    }
  } else {
    const auto& bi = std::get<BiDegreeSequence>(p.degrees);
    if (bi.total_in() != bi.total_out())
      throw ConfigError("bidegrees", "in-degrees sum to " + std::to_string(bi.total_in()) + " but out-degrees sum to " +
                                         std::to_string(bi.total_out()));
  }
  return p;
}

void run_graph(const Config& c, StreamKey key, unsigned threads, Emitter& out, RunResult& result) {
  const json& d = c.doc;
  const GraphPlan p = prepare_graph(c, key.child(0));
  const Multigraph g = std::visit([&](const auto& ds) { return config_model(ds, key.child(1), p.pairing); }, p.degrees);
  std::size_t loops = 0;
  for (const Edge& e : g.edges) loops += e.from == e.to ? 1 : 0;
  auto sorted = g.edges;
  for (auto& e : sorted)
    if (!g.directed && e.from > e.to) std::swap(e.from, e.to);
  std::sort(sorted.begin(), sorted.end());
  std::size_t multi = 0;
  for (std::size_t i = 1; i < sorted.size(); ++i) multi += sorted[i] == sorted[i - 1] ? 1 : 0;
  out.exact("nodes", g.n, 0, static_cast<double>(g.n));
  out.exact("edges", g.n, 0, static_cast<double>(g.edges.size()));
  out.exact("self_loops", g.n, 0, static_cast<double>(loops));
  out.exact("multi_edges", g.n, 0, static_cast<double>(multi));
  if (p.parity_fixed) out.exact("parity_adjusted", g.n, 0, 1.0, "last degree raised by one");

  const json explore = d.value("explore", json::object());
  const std::size_t start = level_or(explore, "start", 0);
  const std::size_t depth = level_or(explore, "depth", 3);
  if (start >= g.n) throw ConfigError("explore.start", "outside the graph");
  const auto trace = bfs_exploration(g, start, depth);
  for (std::size_t j = 0; j <= depth; ++j) {
    out.exact("generation_size", g.n, j, static_cast<double>(trace.generation_sizes[j]));
    out.flag("depleted", g.n, j, trace.depleted[j]);
  }

  if (const auto* ds = std::get_if<DegreeSequence>(&p.degrees)) {
    const auto m = size_biased(*ds);
    for (const auto& [k, cnt] : m.nu_star_counts)
      out.exact("nu_star_mass", g.n, k, static_cast<double>(cnt) / static_cast<double>(m.n));
    for (const auto& [k, cnt] : m.nu_counts)
      out.exact("nu_mass", g.n, k, static_cast<double>(cnt) / static_cast<double>(m.total));
    if (d.contains("tree_coupling")) {
      const json& tc = d.at("tree_coupling");
      const std::size_t reps = positive_count(tc, "reps", 100, "tree_coupling");
      const std::size_t tdepth = level_or(tc, "depth", 2);
      std::vector<double> agree(reps);
      RandomStream starts(key.child(2));
      std::vector<std::size_t> origin(reps);
      for (auto& s : origin) s = starts.below(ds->size());
      parallel_for(reps, threads, [&](std::size_t r) {
        agree[r] = explore_with_tree(*ds, origin[r], tdepth, key.child(3).child(r), node_cap(d)).agrees_below_threshold() ? 1.0 : 0.0;
      });
      out.mean("tree_agreement_fraction", g.n, tdepth, estimate_mean(agree));
    }
  } else {
    PageRankOptions po;
    po.damping = number_in(d, "damping", 0.85, "");
    const auto pr = wbt::pagerank(g, po);
    double sum = 0.0, top = 0.0;
    for (double x : pr.ranks) {
      sum += x;
      top = std::max(top, x);
    }
    out.exact("rank_mean", g.n, 0, sum / static_cast<double>(g.n));
    out.exact("rank_max", g.n, 0, top);
    out.exact("pagerank_iterations", g.n, 0, static_cast<double>(pr.iterations));
  }

  if (d.contains("export_edges")) {
    const std::string name = d.at("export_edges").get<std::string>();
    if (name.empty() || name.find('/') != std::string::npos)
      throw ConfigError("export_edges", "expected a plain file name");
    std::ostringstream os;
    write_edge_list(os, g);
    result.files[name] = os.str();
  }
}

// ---------------------------------------------------------------- sizebias

struct SizeBiasPlan {
  Distribution law;
  std::vector<std::size_t> n_grid;
  SizeBiasOptions options;
  std::optional<Schedule> gw_schedule;
  std::size_t gw_reps = 20;
};

SizeBiasPlan prepare_sizebias(const Config& c) {
  const json& d = c.doc;
  SizeBiasPlan p{parse_distribution(section(d, "degree_law"), "degree_law"), parse_grid(d, "n_grid", ""), {}, std::nullopt, 20};
  if (!p.law.integer_valued() || !p.law.nonnegative()) throw ConfigError("degree_law", "must live on {0, 1, 2, ...}");
  p.options.moment_eps = number_in(d, "moment_eps", 1.0, "");
  p.options.delta_star = number_in(d, "delta_star", 0.4, "");
  p.options.delta = number_in(d, "delta", 0.2, "");
  p.options.reps = count_or(d, "reps", 20);
  if (!(p.options.moment_eps > 0.0)) throw ConfigError("moment_eps", "must be positive");
  if (!(p.options.delta_star > 0.0 && p.options.delta_star < 0.5)) throw ConfigError("delta_star", "must lie in (0, 1/2)");
  const double cap = std::min(0.5, p.options.moment_eps / (2.0 + p.options.moment_eps));
  if (!(p.options.delta > 0.0 && p.options.delta < cap))
    throw ConfigError("delta", "must lie in (0, min(1/2, eps/(2+eps))) = (0, " + format_number(cap) + ")");
  if (!std::isfinite(p.law.abs_moment(2.0 + p.options.moment_eps)))
    throw ConfigError("degree_law", "E[D^(2+eps)] is not finite");
  if (d.contains("gw")) {
    const json& gw = d.at("gw");
    p.gw_schedule = parse_schedule(section(gw, "schedule"), "gw.schedule");
    p.gw_reps = positive_count(gw, "reps", 20, "gw");
  }
  return p;
}

void run_sizebias(const Config& c, StreamKey key, unsigned threads, Emitter& out) {
  SizeBiasPlan p = prepare_sizebias(c);
  p.options.threads = threads;
  const auto rep = sizebias_rate_experiment(p.law, p.n_grid, p.options, key.child(0));
  out.curve(rep.scaled_star);
  out.curve(rep.scaled_nu);
  out.strictly_decreasing(rep.scaled_star);
  out.strictly_decreasing(rep.scaled_nu);
  if (p.gw_schedule) {
    GwCouplingOptions o;
    o.reps = p.gw_reps;
    o.threads = threads;
    o.node_cap = node_cap(c.doc);
    const auto gw = gw_coupling_experiment(p.law, p.n_grid, *p.gw_schedule, o, key.child(1));
    out.curve(gw.normalized_max);
    out.curve(gw.absolute_max);
    out.strictly_decreasing(gw.normalized_max);
    out.strictly_decreasing(gw.absolute_max);
    for (std::size_t g = 0; g < p.n_grid.size(); ++g) {
      const auto& a = gw.first_generation_gap.points[g].replicates;
      const auto& b = gw.first_generation_d1.points[g].replicates;
      std::vector<double> diff(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
      out.mean("first_generation_gap", p.n_grid[g], 1, estimate_mean(a));
      out.mean("first_generation_d1", p.n_grid[g], 1, estimate_mean(b));
      out.mean("first_generation_gap_minus_d1", p.n_grid[g], 1, estimate_mean(diff));
    }
  }
}

// ---------------------------------------------------------------- rank

struct RankPlan {
  BiDegreeSequence degrees;
  RankOptions options;
  std::size_t reps;
};

RankPlan prepare_rank(const Config& c, StreamKey key) {
  const json& d = c.doc;
  const DegreeInput in = parse_degree_input(d, c.base_dir, key);
  if (!std::holds_alternative<BiDegreeSequence>(in)) throw ConfigError("bidegrees", "rank experiments need a bi-degree sequence");
  RankPlan p{std::get<BiDegreeSequence>(in), {}, count_or(d, "reps", 5)};
  if (p.degrees.total_in() != p.degrees.total_out())
    throw ConfigError("bidegrees", "in-degrees sum to " + std::to_string(p.degrees.total_in()) + " but out-degrees sum to " +
                                       std::to_string(p.degrees.total_out()));
  if (p.degrees.total_out() == 0) throw ConfigError("bidegrees", "the graph has no edges");
  p.options.damping = number_in(d, "damping", 0.85, "");
  if (!(p.options.damping > 0.0 && p.options.damping < 1.0)) throw ConfigError("damping", "must lie in (0, 1)");
  p.options.personalization = number_in(d, "personalization", 1.0, "");
  p.options.depth = level_or(d, "depth", 10);
  p.options.samples = count_or(d, "samples", 1000);
  if (p.options.samples < 2) throw ConfigError("samples", "need at least two");
  p.options.node_cap = node_cap(d);
  return p;
}

void run_rank(const Config& c, StreamKey key, unsigned threads, Emitter& out) {
  RankPlan p = prepare_rank(c, key.child(0));
  p.options.threads = threads;
  std::vector<double> d1(p.reps), d1b(p.reps), ks(p.reps), ksb(p.reps), gm(p.reps), tm(p.reps);
  std::size_t dangling = 0;
  for (std::size_t r = 0; r < p.reps; ++r) {
    const auto rep = rank_vs_wbt(p.degrees, p.options, key.child(1).child(r));
    d1[r] = rep.d1;
    d1b[r] = rep.d1_baseline;
    ks[r] = rep.ks;
    ksb[r] = rep.ks_baseline;
    gm[r] = estimate_mean(rep.graph_ranks).mean;
    tm[r] = estimate_mean(rep.tree_ranks).mean;
    dangling = rep.dangling_nodes;
  }
  const std::size_t n = p.degrees.size(), k = p.options.depth;
  const auto md1 = estimate_mean(d1), mb = estimate_mean(d1b);
  out.mean("d1", n, k, md1);
  out.mean("d1_baseline", n, k, mb);
  out.mean("ks", n, k, estimate_mean(ks));
  out.mean("ks_baseline", n, k, estimate_mean(ksb));
  out.mean("graph_rank_mean", n, k, estimate_mean(gm));
  out.mean("tree_rank_mean", n, k, estimate_mean(tm));
  out.exact("dangling_nodes", n, 0, static_cast<double>(dangling), "teleport");
  out.flag("d1_within_3x_baseline", n, k, md1.mean <= 3.0 * mb.mean);
}

std::uint64_t resolve_seed(const Config& c, const RunFlags& flags) {
  if (flags.seed) return *flags.seed;
  if (c.seed) return *c.seed;
  throw ConfigError("seed", "missing: give it in the config or with --seed");
}

unsigned resolve_threads(const Config& c, const RunFlags& flags) {
  const unsigned t = flags.threads.value_or(c.threads);
  if (t == 0) throw ConfigError("threads", "must be positive");
  return t;
}

}  // namespace

std::string toolkit_version() { return "0.3.0"; }

RunResult run_experiment(const Config& c, const RunFlags& flags) {
  const std::uint64_t seed = resolve_seed(c, flags);
  const unsigned threads = resolve_threads(c, flags);
  const StreamKey key(seed);
  RunResult result;
  Emitter out(c.id, result.rows);
  switch (c.kind) {
    case ExperimentKind::simulate: run_simulate(c, key, threads, out); break;
    case ExperimentKind::certify: run_certify(c, key, threads, out); break;
    case ExperimentKind::converge: run_converge(c, key, threads, out, result.messages); break;
    case ExperimentKind::graph: run_graph(c, key, threads, out, result); break;
    case ExperimentKind::sizebias: run_sizebias(c, key, threads, out); break;
    case ExperimentKind::rank: run_rank(c, key, threads, out); break;
  }
  sort_rows(result.rows);
  result.manifest = {toolkit_version(), c.id, to_string(c.kind), config_hash(c.doc), seed, result.rows.size()};
  return result;
}

void write_run(const RunResult& result, const std::filesystem::path& out) {
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + out.string());
    write_rows(f, result.rows);
  }
  {
    std::ofstream f(out.string() + ".manifest.json", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write manifest for " + out.string());
    write_manifest(f, result.manifest);
  }
  for (const auto& [name, body] : result.files) {
    std::ofstream f(out.parent_path() / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + name);
    f << body;
  }
}

ValidationReport validate_config(const Config& c, const RunFlags& flags) {
  ValidationReport rep;
  auto guard = [&](auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      rep.errors.emplace_back(e.what());
    }
  };
  guard([&] { resolve_seed(c, flags); });
  guard([&] { resolve_threads(c, flags); });
  const StreamKey key(flags.seed.value_or(c.seed.value_or(0)));
  guard([&] {
    switch (c.kind) {
      case ExperimentKind::simulate: {
        const auto p = prepare_simulate(c);
        make_source(p.sampler, p.root);
        if (p.eps) {
          const Moments m = moments(p.sampler);
          if (!(m.rho < 1.0)) rep.errors.push_back(contraction_message(m.rho));
        }
        break;
      }
      case ExperimentKind::certify: {
        const auto p = prepare_certify(c);
        moments(p.coupling.base());
        moments(p.coupling.alternative());
        break;
      }
      case ExperimentKind::converge: {
        const auto p = prepare_converge(c);
        const Moments m = moments(p.family.limit.sampler);
        for (std::size_t n : p.n_grid) moments(p.family.element(n).sampler);
        if (p.study == Study::r_limit && !(m.rho < 1.0)) rep.errors.push_back(contraction_message(m.rho));
        if (p.study != Study::lemma) {
          const auto premise = schedule_premise(p.family, p.schedule, p.n_grid);
          if (!premise.holds) rep.warnings.push_back(premise.message);
          else if (!premise.message.empty()) rep.warnings.push_back(premise.message);
        }
        break;
      }
      case ExperimentKind::graph: prepare_graph(c, key.child(0)); break;
      case ExperimentKind::sizebias: prepare_sizebias(c); break;
      case ExperimentKind::rank: prepare_rank(c, key.child(0)); break;
    }
  });
  return rep;
}

ValidationReport validate_file(const std::filesystem::path& path, const RunFlags& flags) {
  try {
    return validate_config(load_config(path), flags);
  } catch (const std::exception& e) {
    ValidationReport rep;
    rep.errors.emplace_back(e.what());
    return rep;
  }
}

}  // namespace wbt::cli
