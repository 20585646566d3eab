#include "wbt/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "wbt/coupling.hpp"

namespace wbt {

namespace {

constexpr std::size_t kMaxLawAtoms = 100000;

// Stream layout per replication r of key: child(r) then
//   1 -> n-th law samples (child(n), child(i)), 2 -> limit samples,
//   3 -> second, independent limit sample for the baseline.
StreamKey element_key(StreamKey rep, std::size_t n) { return rep.child(1).child(n); }
StreamKey limit_key(StreamKey rep) { return rep.child(2); }
StreamKey baseline_key(StreamKey rep) { return rep.child(3); }

std::vector<double> sample_values(const NodeSource& source, StreamKey parent, std::size_t count, std::size_t level,
                                  Quantity q, std::size_t cap) {
  std::vector<double> out(count);
  const GrowOptions opts{level, cap, false};
  for (std::size_t i = 0; i < count; ++i) {
    const TreeRealization t = grow(source, parent.child(i), opts);
    out[i] = q == Quantity::w ? t.w(level) : t.r(level);
  }
  return out;
}

std::vector<double> homogeneous_values(const NodeSource& source, StreamKey parent, std::size_t count,
                                       std::size_t level, double scale, std::size_t cap) {
  std::vector<double> out(count);
  const GrowOptions opts{level, cap, false};
  for (std::size_t i = 0; i < count; ++i) out[i] = grow(source, parent.child(i), opts).homogeneous(level) / scale;
  return out;
}

NodeSource source_of(const SequenceElement& e) { return make_source(e.sampler, e.root); }

void check_grid(const std::vector<std::size_t>& n_grid, std::size_t reps) {
  if (n_grid.empty()) throw std::invalid_argument("convergence: empty n grid");
  if (!std::is_sorted(n_grid.begin(), n_grid.end())) throw std::invalid_argument("convergence: n grid must be increasing");
  if (reps < 2) throw std::invalid_argument("convergence: need at least two replications");
}

CurvePoint make_point(std::size_t n, std::size_t level, std::vector<double> reps) {
  CurvePoint p;
  p.n = n;
  p.level = level;
  p.value = summarize_replicates(reps);
  p.replicates = std::move(reps);
  return p;
}

bool vanishes(const std::vector<double>& v) {
  if (v.empty()) return true;
  if (std::all_of(v.begin(), v.end(), [](double x) { return std::abs(x) <= 1e-12; })) return true;
  return std::abs(v.back()) <= 0.5 * std::abs(v.front());
}

struct NodeAtom {
  double q;
  std::size_t n;
  std::vector<double> weights;  // WBT: own weight; WBP: one per child
  double p;
};

std::vector<NodeAtom> enumerate_atoms(const BranchingSampler& s) {
  std::vector<NodeAtom> out;
  if (const auto* jv = std::get_if<JointVector>(&s.structure())) {
    for (std::size_t i = 0; i < jv->atoms.size(); ++i)
      if (jv->probs[i] > 0.0) out.push_back({jv->atoms[i].mark, jv->atoms[i].offspring, jv->atoms[i].weights, jv->probs[i]});
    return out;
  }
  const auto* iv = std::get_if<IndependentVector>(&s.structure());
  if (!iv) throw std::invalid_argument("finite vector law: custom samplers have no enumerable law");
  const auto q = iv->mark.finite_support();
  const auto n = iv->offspring.finite_support();
  if (!q || !n) throw std::invalid_argument("finite vector law: mark and offspring laws must be finite");
  for (std::size_t a = 0; a < q->size(); ++a)
    for (std::size_t b = 0; b < n->size(); ++b) {
      const double pq = q->mass()[a] * n->mass()[b];
      if (pq == 0.0) continue;
      const auto count = static_cast<std::size_t>(n->support()[b]);
      const auto wl = iv->weight_for(count).finite_support();
      if (!wl) throw std::invalid_argument("finite vector law: weight laws must be finite");
      const std::size_t slots = s.mode() == TreeMode::wbt ? 1 : count;
      // Mixed-radix enumeration of the i.i.d. weights.
      std::vector<std::size_t> digit(slots, 0);
      for (;;) {
        if (out.size() > kMaxLawAtoms) throw std::invalid_argument("finite vector law: too many atoms to enumerate");
        double p = pq;
        std::vector<double> w(slots);
        for (std::size_t k = 0; k < slots; ++k) {
          w[k] = wl->support()[digit[k]];
          p *= wl->mass()[digit[k]];
        }
        if (p > 0.0) out.push_back({q->support()[a], count, std::move(w), p});
        std::size_t k = 0;
        while (k < slots && ++digit[k] == wl->size()) digit[k++] = 0;
        if (k == slots) break;
      }
    }
  return out;
}

}  // namespace

SamplerSequence SamplerSequence::constant(SequenceElement limit) {
  auto element = [limit](std::size_t) { return limit; };
  return SamplerSequence{element, std::move(limit), [](std::size_t) { return 0.0; }, [](std::size_t) { return 0.0; }};
}

Schedule Schedule::constant(std::size_t level) { return Schedule(Kind::constant, 0.0, 0.0, level); }
Schedule Schedule::logarithmic(double a, std::size_t b) { return Schedule(Kind::logarithmic, a, 0.0, b); }
Schedule Schedule::loglog(double a, std::size_t b) { return Schedule(Kind::loglog, a, 0.0, b); }
Schedule Schedule::linear(double a, std::size_t b) { return Schedule(Kind::linear, a, 0.0, b); }
Schedule Schedule::power(double a, double p, std::size_t b) { return Schedule(Kind::power, a, p, b); }

std::size_t Schedule::operator()(std::size_t n) const {
  if (n == 0) throw std::invalid_argument("schedule: n must be positive");
  const double x = static_cast<double>(n);
  double v = 0.0;
  switch (kind_) {
    case Kind::constant: v = 0.0; break;
    case Kind::logarithmic: v = a_ * std::log(x); break;
    case Kind::loglog: v = x > std::exp(1.0) ? a_ * std::log(std::log(x)) : 0.0; break;
    case Kind::linear: v = a_ * x; break;
    case Kind::power: v = a_ * std::pow(x, p_); break;
  }
  return static_cast<std::size_t>(std::floor(std::max(0.0, v))) + b_;
}

std::string Schedule::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::constant: os << b_; break;
    case Kind::logarithmic: os << "floor(" << a_ << " ln n) + " << b_; break;
    case Kind::loglog: os << "floor(" << a_ << " ln ln n) + " << b_; break;
    case Kind::linear: os << "floor(" << a_ << " n) + " << b_; break;
    case Kind::power: os << "floor(" << a_ << " n^" << p_ << ") + " << b_; break;
  }
  return os.str();
}

TrendVerdict Curve::trend() const {
  if (points.empty()) throw std::logic_error("trend of an empty curve");
  return trend_test(points.front().value.median, points.back().value.median, baseline.median);
}

Curve fixed_level_convergence(const SamplerSequence& seq, std::size_t level, const std::vector<std::size_t>& n_grid,
                              const FixedLevelOptions& options, StreamKey key) {
  check_grid(n_grid, options.reps);
  const std::size_t reps = options.reps, ng = n_grid.size();
  const NodeSource limit = source_of(seq.limit);
  std::vector<NodeSource> elements;
  for (std::size_t n : n_grid) elements.push_back(source_of(seq.element(n)));

  std::vector<std::vector<double>> limit_samples(reps);
  std::vector<double> baseline(reps);
  parallel_for(reps, options.threads, [&](std::size_t r) {
    const StreamKey rk = key.child(r);
    limit_samples[r] = sample_values(limit, limit_key(rk), options.samples, level, options.quantity, options.node_cap);
    const auto other = sample_values(limit, baseline_key(rk), options.samples, level, options.quantity, options.node_cap);
    baseline[r] = d1_sorted_samples(limit_samples[r], other);
  });

  std::vector<double> cells(ng * reps);
  parallel_for(ng * reps, options.threads, [&](std::size_t c) {
    const std::size_t g = c / reps, r = c % reps;
    const StreamKey rk = key.child(r);
    const StreamKey parent = options.common_random_numbers ? limit_key(rk) : element_key(rk, n_grid[g]);
    const auto xs = sample_values(elements[g], parent, options.samples, level, options.quantity, options.node_cap);
    cells[c] = d1_sorted_samples(xs, limit_samples[r]);
  });

  Curve curve;
  curve.statistic = options.quantity == Quantity::w ? "d1_w" : "d1_r";
  for (std::size_t g = 0; g < ng; ++g)
    curve.points.push_back(make_point(n_grid[g], level, {cells.begin() + static_cast<std::ptrdiff_t>(g * reps),
                                                         cells.begin() + static_cast<std::ptrdiff_t>((g + 1) * reps)}));
  curve.baseline = summarize_replicates(baseline);
  return curve;
}

MartingaleReport scaled_martingale_convergence(const SamplerSequence& seq, const Schedule& schedule,
                                               const std::vector<std::size_t>& n_grid,
                                               const MartingaleOptions& options, StreamKey key) {
  check_grid(n_grid, options.reps);
  const std::size_t reps = options.reps, ng = n_grid.size(), m = options.samples;
  const double rho = moments(seq.limit.sampler).rho;
  if (!(rho > 0.0)) throw std::domain_error("scaled martingale: limit rho must be positive");
  const NodeSource limit = source_of(seq.limit);
  std::vector<NodeSource> elements;
  std::vector<double> rho_n;
  for (std::size_t n : n_grid) {
    const auto e = seq.element(n);
    elements.push_back(source_of(e));
    rho_n.push_back(moments(e.sampler).rho);
    if (!(rho_n.back() > 0.0)) throw std::domain_error("scaled martingale: rho_n must be positive");
  }

  const std::size_t J = options.proxy_level;
  const double rho_J = std::pow(rho, static_cast<double>(J));
  std::vector<std::vector<double>> proxy(reps);
  parallel_for(reps, options.threads, [&](std::size_t r) {
    proxy[r] = homogeneous_values(limit, limit_key(key.child(r)), m, J, rho_J, options.node_cap);
  });

  const bool d1 = options.mean_one;
  std::vector<double> ks_n(ng * reps), ks(ng * reps), d1_n(ng * reps), d1_l(ng * reps), ks_b(ng * reps), d1_b(ng * reps);
  parallel_for(ng * reps, options.threads, [&](std::size_t c) {
    const std::size_t g = c / reps, r = c % reps;
    const StreamKey rk = key.child(r);
    const std::size_t j = schedule(n_grid[g]);
    const double rj = std::pow(rho, static_cast<double>(j));
    const double rnj = std::pow(rho_n[g], static_cast<double>(j));
    auto by_rho_n = homogeneous_values(elements[g], element_key(rk, n_grid[g]), m, j, rnj, options.node_cap);
    std::vector<double> by_rho(by_rho_n);
    for (double& x : by_rho) x *= rnj / rj;
    const auto base = homogeneous_values(limit, baseline_key(rk).child(n_grid[g]), m, j, rj, options.node_cap);
    ks_n[c] = ks_distance(by_rho_n, proxy[r]);
    ks[c] = ks_distance(by_rho, proxy[r]);
    ks_b[c] = ks_distance(base, proxy[r]);
    if (d1) {
      d1_n[c] = d1_sorted_samples(by_rho_n, proxy[r]);
      d1_l[c] = d1_sorted_samples(by_rho, proxy[r]);
      d1_b[c] = d1_sorted_samples(base, proxy[r]);
    }
  });

  auto build = [&](const std::string& name, const std::vector<double>& cells, const std::vector<double>& base_cells) {
    Curve curve;
    curve.statistic = name;
    for (std::size_t g = 0; g < ng; ++g)
      curve.points.push_back(make_point(n_grid[g], schedule(n_grid[g]),
                                        {cells.begin() + static_cast<std::ptrdiff_t>(g * reps),
                                         cells.begin() + static_cast<std::ptrdiff_t>((g + 1) * reps)}));
    curve.baseline = summarize_replicates(
        std::vector<double>(base_cells.begin() + static_cast<std::ptrdiff_t>((ng - 1) * reps), base_cells.end()));
    return curve;
  };

  MartingaleReport out;
  out.proxy_level = J;
  out.ks_rho_n = build("ks_rho_n", ks_n, ks_b);
  out.ks_rho = build("ks_rho", ks, ks_b);
  out.ks_baseline = build("ks_baseline", ks_b, ks_b);
  if (d1) {
    out.d1_rho_n = build("d1_rho_n", d1_n, d1_b);
    out.d1_rho = build("d1_rho", d1_l, d1_b);
    out.d1_baseline = build("d1_baseline", d1_b, d1_b);
  }
  for (std::size_t g = 0; g < ng; ++g) {
    const std::size_t j = schedule(n_grid[g]);
    const double x = rho / rho_n[g];
    out.normalization_gap.push_back(std::abs(std::pow(x, static_cast<double>(j)) - 1.0));
    out.normalization_bound.push_back(j == 0 ? 0.0 : power_bounds(x, j).rhs2);
  }
  return out;
}

RLimitReport r_limit_convergence(const SamplerSequence& seq, const Schedule& schedule,
                                 const std::vector<std::size_t>& n_grid, const RLimitOptions& options, StreamKey key) {
  check_grid(n_grid, options.reps);
  const Moments m = moments(seq.limit.sampler);
  if (!(m.rho < 1.0))
    throw std::domain_error("contraction premise violated: the limit law has rho = " + std::to_string(m.rho) +
                            " >= 1, and the R-limit needs rho < 1");
  const std::size_t reps = options.reps, ng = n_grid.size(), count = options.samples;
  const double root_n = seq.limit.root ? seq.limit.root->mean_offspring() : m.mean_offspring;
  const TreeMode mode = seq.mode();
  const std::size_t limit_levels = endogenous_levels(m, mode, root_n, options.eps);
  const NodeSource limit = source_of(seq.limit);
  std::vector<NodeSource> elements;
  for (std::size_t n : n_grid) elements.push_back(source_of(seq.element(n)));

  std::vector<std::vector<double>> limit_samples(reps);
  std::vector<double> baseline(reps);
  parallel_for(reps, options.threads, [&](std::size_t r) {
    const StreamKey rk = key.child(r);
    limit_samples[r] = sample_values(limit, limit_key(rk), count, limit_levels, Quantity::r, options.node_cap);
    const auto other = sample_values(limit, baseline_key(rk), count, limit_levels, Quantity::r, options.node_cap);
    baseline[r] = d1_sorted_samples(limit_samples[r], other);
  });

  std::vector<double> cells(ng * reps);
  std::vector<std::vector<double>> values(ng * reps);
  parallel_for(ng * reps, options.threads, [&](std::size_t c) {
    const std::size_t g = c / reps, r = c % reps;
    const std::size_t k = schedule(n_grid[g]);
    values[c] = sample_values(elements[g], element_key(key.child(r), n_grid[g]), count, k, Quantity::r, options.node_cap);
    cells[c] = d1_sorted_samples(values[c], limit_samples[r]);
  });

  RLimitReport out;
  out.d1.statistic = "d1_r";
  for (std::size_t g = 0; g < ng; ++g) {
    const std::size_t k = schedule(n_grid[g]);
    out.d1.points.push_back(make_point(n_grid[g], k,
                                       {cells.begin() + static_cast<std::ptrdiff_t>(g * reps),
                                        cells.begin() + static_cast<std::ptrdiff_t>((g + 1) * reps)}));
    out.tail_slack.push_back(endogenous_tail(m, mode, root_n, k));
    std::vector<double> pooled;
    for (std::size_t r = 0; r < reps; ++r) pooled.insert(pooled.end(), values[g * reps + r].begin(), values[g * reps + r].end());
    out.mean_r.push_back(estimate_mean(pooled));
  }
  out.d1.baseline = summarize_replicates(baseline);

  if (mode == TreeMode::wbp && seq.limit.sampler.nonnegative_weights()) {
    if (const auto* iv = std::get_if<IndependentVector>(&seq.limit.sampler.structure())) {
      out.limit_mean = iv->mark.mean() / (1.0 - m.rho);
    } else if (const auto* jv = std::get_if<JointVector>(&seq.limit.sampler.structure())) {
      double q = 0.0;
      for (std::size_t i = 0; i < jv->atoms.size(); ++i) q += jv->probs[i] * jv->atoms[i].mark;
      out.limit_mean = q / (1.0 - m.rho);
    }
  }
  return out;
}

VectorLaw node_law(const BranchingSampler& s) {
  if (s.mode() != TreeMode::wbt) throw std::invalid_argument("node_law: expects a weighted branching tree sampler");
  VectorLaw law;
  law.dim = 3;
  for (const auto& a : enumerate_atoms(s)) {
    law.atoms.insert(law.atoms.end(), {a.q, static_cast<double>(a.n), a.weights[0]});
    law.probs.push_back(a.p);
  }
  return law;
}

VectorLaw weight_vector_law(const BranchingSampler& s) {
  const auto atoms = enumerate_atoms(s);
  std::size_t max_n = 0;
  for (const auto& a : atoms) max_n = std::max(max_n, a.n);
  VectorLaw law;
  law.dim = 1 + max_n;
  for (const auto& a : atoms) {
    std::vector<double> row(law.dim, 0.0);
    row[0] = a.q;
    for (std::size_t i = 0; i < a.n; ++i) row[1 + i] = s.mode() == TreeMode::wbt ? a.weights[0] : a.weights[i];
    law.atoms.insert(law.atoms.end(), row.begin(), row.end());
    law.probs.push_back(a.p);
  }
  return law;
}

LemmaReport lemma_condition_check(const SamplerSequence& seq, const std::vector<std::size_t>& n_grid) {
  if (seq.mode() != TreeMode::wbt) throw std::invalid_argument("lemma check applies to weighted branching trees");
  if (n_grid.empty()) throw std::invalid_argument("lemma check: empty n grid");
  const Moments m = moments(seq.limit.sampler);
  const VectorLaw nu = node_law(seq.limit.sampler);
  const VectorLaw mu = weight_vector_law(seq.limit.sampler);
  LemmaReport out;
  std::vector<double> d_nu, g_cq, g_nc, d_mu;
  for (std::size_t n : n_grid) {
    const auto e = seq.element(n);
    const Moments mn = moments(e.sampler);
    LemmaRow row;
    row.n = n;
    row.d1_nu = d1_vector_laws(node_law(e.sampler), nu);
    row.abs_cq_gap = std::abs(mn.mean_abs_cq - m.mean_abs_cq);
    row.abs_nc_gap = std::abs(mn.rho - m.rho);
    row.d1_mu = d1_vector_laws(weight_vector_law(e.sampler), mu);
    out.rows.push_back(row);
    d_nu.push_back(row.d1_nu);
    g_cq.push_back(row.abs_cq_gap);
    g_nc.push_back(row.abs_nc_gap);
    d_mu.push_back(row.d1_mu);
  }
  out.hypotheses_vanish = vanishes(d_nu) && vanishes(g_cq) && vanishes(g_nc);
  out.conclusion_vanishes = vanishes(d_mu);
  return out;
}

PowerBounds power_bounds(double x, std::size_t j) {
  if (!(x > 0.0)) throw std::domain_error("power_bounds: x must be positive");
  const double jj = static_cast<double>(j);
  const double up = std::max(0.0, x - 1.0);
  PowerBounds b;
  b.lhs1 = std::pow(std::max(x, 1.0), jj);
  b.rhs1 = std::exp(jj * up);
  b.lhs2 = j == 1 ? std::abs(x - 1.0) : std::abs(std::pow(x, jj) - 1.0);
  b.rhs2 = jj * std::abs(x - 1.0) * std::exp((jj - 1.0) * up);
  return b;
}

PremiseCheck schedule_premise(const SamplerSequence& seq, const Schedule& schedule,
                              const std::vector<std::size_t>& n_grid) {
  PremiseCheck out;
  std::vector<double> roots;
  for (std::size_t n : n_grid) {
    double node = 0.0, root = 0.0;
    if (seq.node_distance) {
      node = seq.node_distance(n);
      if (seq.root_distance) root = seq.root_distance(n);
    } else {
      const auto e = seq.element(n);
      const auto cs = CoupledSampler::quantile(seq.limit.sampler, e.sampler, seq.limit.root, e.root);
      const auto cc = exact_constants(cs);
      if (!cc) {
        out.message = "node-law distance unavailable (declare it); premise not checked";
        return out;
      }
      node = seq.mode() == TreeMode::wbp ? cc->e : cc->e_wbt;
      root = seq.root_distance ? seq.root_distance(n) : (seq.mode() == TreeMode::wbt && e.root ? cc->e_star : 0.0);
    }
    out.products.push_back(static_cast<double>(schedule(n)) * node);
    roots.push_back(root);
  }
  const bool products_ok = vanishes(out.products);
  const bool roots_ok = vanishes(roots);
  out.holds = products_ok && roots_ok;
  if (!products_ok) {
    std::ostringstream os;
    os << "schedule premise: j_n * d1(mu_n, mu) does not vanish along the grid (" << out.products.front() << " -> "
       << out.products.back() << ") for j_n = " << schedule.describe();
    out.message = os.str();
  } else if (!roots_ok) {
    out.message = "schedule premise: the root-law distance does not vanish along the grid";
  }
  return out;
}

}  // namespace wbt
