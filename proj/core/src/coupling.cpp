#include "wbt/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "wbt/stats.hpp"

namespace wbt {

namespace {

// Label of the side stream used by the independent coupling. Tree children
// use labels >= 1, so label 0 never collides with a node key.
constexpr std::uint64_t kSideStream = 0;

struct Piece {
  std::size_t i;
  std::size_t k;
  double p;
};

std::vector<double> cumulative(std::span<const double> probs) {
  std::vector<double> c(probs.size());
  double s = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) c[i] = (s += probs[i]);
  c.back() = 1.0;
  return c;
}

// Joint law of (index under law a, index under law b) for the given kind.
std::vector<Piece> pair_pieces(std::span<const double> pa, std::span<const double> pb, CouplingKind kind) {
  std::vector<Piece> out;
  if (kind == CouplingKind::independent) {
    for (std::size_t i = 0; i < pa.size(); ++i)
      for (std::size_t k = 0; k < pb.size(); ++k)
        if (pa[i] > 0.0 && pb[k] > 0.0) out.push_back({i, k, pa[i] * pb[k]});
    return out;
  }
  const auto ca = cumulative(pa), cb = cumulative(pb);
  std::size_t i = 0, k = 0;
  double prev = 0.0;
  while (i < ca.size() && k < cb.size()) {
    const double next = std::min(ca[i], cb[k]);
    if (next > prev) out.push_back({i, k, next - prev});
    prev = std::max(prev, next);
    if (ca[i] <= next) ++i;
    if (k < cb.size() && cb[k] <= next) ++k;
  }
  return out;
}

std::optional<double> scalar_gap(const Distribution& x, const Distribution& y, CouplingKind kind) {
  if (kind == CouplingKind::identity) return 0.0;
  return kind == CouplingKind::independent ? independent_abs_gap(x, y) : comonotone_abs_gap(x, y);
}

std::optional<Distribution> scaled(const Distribution& d, double a) {
  if (a == 0.0) return Distribution::point(0.0);
  if (const auto* p = std::get_if<PointMass>(&d.variant())) return Distribution::point(a * p->value);
  if (const auto* u = std::get_if<UniformInterval>(&d.variant()))
    return a > 0 ? Distribution::uniform(a * u->low, a * u->high) : Distribution::uniform(a * u->high, a * u->low);
  if (auto m = d.discretized()) {
    std::vector<double> atoms(m->support().begin(), m->support().end());
    for (double& x : atoms) x *= a;
    return Distribution::discrete(std::move(atoms), {m->mass().begin(), m->mass().end()});
  }
  return std::nullopt;
}

struct OffspringPiece {
  double n;
  double n_hat;
  double p;
};

std::optional<std::vector<OffspringPiece>> offspring_pieces(const Distribution& a, const Distribution& b,
                                                            CouplingKind kind) {
  const auto la = a.discretized(), lb = b.discretized();
  if (!la || !lb) return std::nullopt;
  std::vector<OffspringPiece> out;
  for (const auto& pc : pair_pieces(la->mass(), lb->mass(), kind))
    out.push_back({la->support()[pc.i], lb->support()[pc.k], pc.p});
  return out;
}

// E|C_hat Q_hat - C Q| with (Q, Q_hat) and (C, C_hat) independent pairs.
std::optional<double> product_gap(const Distribution& q, const Distribution& q_hat, const Distribution& c,
                                  const Distribution& c_hat, CouplingKind kind) {
  const auto* pq = std::get_if<PointMass>(&q.variant());
  const auto* pqh = std::get_if<PointMass>(&q_hat.variant());
  if (pq && pqh) {
    const auto sc = scaled(c, pq->value), sch = scaled(c_hat, pqh->value);
    if (!sc || !sch) return std::nullopt;
    return scalar_gap(*sc, *sch, kind);
  }
  const auto lq = q.discretized(), lqh = q_hat.discretized(), lc = c.discretized(), lch = c_hat.discretized();
  if (!lq || !lqh || !lc || !lch) return std::nullopt;
  double s = 0.0;
  for (const auto& a : pair_pieces(lq->mass(), lqh->mass(), kind))
    for (const auto& b : pair_pieces(lc->mass(), lch->mass(), kind))
      s += a.p * b.p * std::abs(lch->support()[b.k] * lqh->support()[a.k] - lc->support()[b.i] * lq->support()[a.i]);
  return s;
}

double abs_diff_padded(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  const std::size_t n = std::max(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) s += std::abs((i < b.size() ? b[i] : 0.0) - (i < a.size() ? a[i] : 0.0));
  return s;
}

double wbt_node_term(double q, double n, double c, double q_hat, double n_hat, double c_hat) {
  return std::abs(c_hat * q_hat - c * q) + std::abs(c_hat - c) * std::min(n, n_hat) +
         std::abs(c_hat) * std::max(0.0, n_hat - n) + std::abs(c) * std::max(0.0, n - n_hat);
}

void fill_moments(CouplingConstants& cc, const CoupledSampler& cs) {
  const Moments m = moments(cs.base());
  const Moments mh = moments(cs.alternative());
  cc.mode = cs.mode();
  cc.rho = m.rho;
  cc.rho_hat = mh.rho;
  cc.mean_abs_q = m.mean_abs_q;
  cc.mean_offspring = m.mean_offspring;
  cc.mean_offspring_hat = mh.mean_offspring;
  cc.root_mean_offspring = cs.base_root() ? cs.base_root()->mean_offspring() : m.mean_offspring;
  cc.root_mean_offspring_hat = cs.alternative_root() ? cs.alternative_root()->mean_offspring() : mh.mean_offspring;
  cc.mean_abs_cq = cs.mode() == TreeMode::wbt ? m.mean_abs_cq : 0.0;
}

// E* for roots given by independent (mark, offspring) laws.
std::optional<double> root_gap_independent(const Distribution& q, const Distribution& n, const Distribution& q_hat,
                                           const Distribution& n_hat, CouplingKind kind) {
  const auto gq = scalar_gap(q, q_hat, kind);
  const auto pieces = offspring_pieces(n, n_hat, kind);
  if (!gq || !pieces) return std::nullopt;
  double s = *gq;
  for (const auto& pc : *pieces) s += pc.p * std::abs(pc.n_hat - pc.n);
  return s;
}

std::optional<double> exact_root_gap(const CoupledSampler& cs) {
  const CouplingKind kind = cs.kind() == CouplingKind::table ? CouplingKind::quantile : cs.kind();
  if (cs.base_root()) {
    const auto& a = cs.base_root()->structure();
    const auto& b = cs.alternative_root()->structure();
    if (const auto* ia = std::get_if<RootSampler::Independent>(&a)) {
      const auto* ib = std::get_if<RootSampler::Independent>(&b);
      if (!ib) return std::nullopt;
      return root_gap_independent(ia->mark, ia->offspring, ib->mark, ib->offspring, kind);
    }
    const auto* ja = std::get_if<RootSampler::Joint>(&a);
    const auto* jb = std::get_if<RootSampler::Joint>(&b);
    if (!ja || !jb) return std::nullopt;
    double s = 0.0;
    for (const auto& pc : pair_pieces(ja->probs, jb->probs, kind)) {
      const auto& x = ja->atoms[pc.i];
      const auto& y = jb->atoms[pc.k];
      s += pc.p * (std::abs(y.mark - x.mark) + std::abs(static_cast<double>(y.offspring) - static_cast<double>(x.offspring)));
    }
    return s;
  }
  const auto& a = cs.base().structure();
  const auto& b = cs.alternative().structure();
  if (const auto* ia = std::get_if<IndependentVector>(&a)) {
    const auto* ib = std::get_if<IndependentVector>(&b);
    if (!ib) return std::nullopt;
    return root_gap_independent(ia->mark, ia->offspring, ib->mark, ib->offspring, kind);
  }
  const auto* ja = std::get_if<JointVector>(&a);
  const auto* jb = std::get_if<JointVector>(&b);
  if (!ja || !jb) return std::nullopt;
  double s = 0.0;
  for (const auto& pc : pair_pieces(ja->probs, jb->probs, kind)) {
    const auto& x = ja->atoms[pc.i];
    const auto& y = jb->atoms[pc.k];
    s += pc.p * (std::abs(y.mark - x.mark) + std::abs(static_cast<double>(y.offspring) - static_cast<double>(x.offspring)));
  }
  return s;
}

}  // namespace

std::string to_string(CouplingKind k) {
  switch (k) {
    case CouplingKind::identity: return "identity";
    case CouplingKind::independent: return "independent";
    case CouplingKind::quantile: return "quantile";
    case CouplingKind::table: return "table";
  }
  return "?";
}

CouplingKind coupling_kind_from_string(const std::string& s) {
  if (s == "identity") return CouplingKind::identity;
  if (s == "independent") return CouplingKind::independent;
  if (s == "quantile") return CouplingKind::quantile;
  if (s == "table") return CouplingKind::table;
  throw std::invalid_argument("unknown coupling '" + s + "' (expected identity, independent, quantile or table)");
}

CoupledSampler::CoupledSampler(CouplingKind kind, BranchingSampler base, BranchingSampler alternative,
                               std::optional<RootSampler> base_root, std::optional<RootSampler> alternative_root)
    : kind_(kind),
      base_(std::move(base)),
      alternative_(std::move(alternative)),
      base_root_(std::move(base_root)),
      alternative_root_(std::move(alternative_root)) {
  if (base_.mode() != alternative_.mode()) throw std::invalid_argument("coupling: both sides must use the same tree mode");
  if (base_root_.has_value() != alternative_root_.has_value())
    throw std::invalid_argument("coupling: give a delayed root law on both sides or on neither");
  if (base_root_ && mode() != TreeMode::wbt)
    throw std::invalid_argument("coupling: delayed root laws are only defined for weighted branching trees");
}

CoupledSampler CoupledSampler::identity(BranchingSampler sampler, std::optional<RootSampler> root) {
  return CoupledSampler(CouplingKind::identity, sampler, sampler, root, root);
}

CoupledSampler CoupledSampler::independent(BranchingSampler base, BranchingSampler alternative,
                                           std::optional<RootSampler> base_root,
                                           std::optional<RootSampler> alternative_root) {
  return CoupledSampler(CouplingKind::independent, std::move(base), std::move(alternative), std::move(base_root),
                        std::move(alternative_root));
}

CoupledSampler CoupledSampler::quantile(BranchingSampler base, BranchingSampler alternative,
                                        std::optional<RootSampler> base_root,
                                        std::optional<RootSampler> alternative_root) {
  return CoupledSampler(CouplingKind::quantile, std::move(base), std::move(alternative), std::move(base_root),
                        std::move(alternative_root));
}

CoupledSampler CoupledSampler::table(TreeMode mode, const CouplingTable& nodes,
                                     const std::optional<RootCouplingTable>& roots) {
  if (nodes.base.size() != nodes.probs.size() || nodes.alternative.size() != nodes.probs.size())
    throw std::invalid_argument("coupling table: base, alternative and probs must have equal length");
  // Both marginals share one cumulative table, so a single uniform picks the
  // same entry on each side.
  auto base = BranchingSampler::joint(mode, nodes.base, nodes.probs);
  auto alt = BranchingSampler::joint(mode, nodes.alternative, nodes.probs);
  std::optional<RootSampler> rb, ra;
  if (roots) {
    if (roots->base.size() != roots->probs.size() || roots->alternative.size() != roots->probs.size())
      throw std::invalid_argument("root coupling table: base, alternative and probs must have equal length");
    rb = RootSampler::joint(roots->base, roots->probs);
    ra = RootSampler::joint(roots->alternative, roots->probs);
  }
  return CoupledSampler(CouplingKind::table, std::move(base), std::move(alt), std::move(rb), std::move(ra));
}

NodeSource CoupledSampler::base_source() const { return make_source(base_, base_root_); }

NodeSource CoupledSampler::alternative_source() const {
  if (kind_ != CouplingKind::independent) return make_source(alternative_, alternative_root_);
  NodeSource s;
  s.mode = mode();
  s.node = [alt = alternative_](const NodeUniforms& u, BranchingDraw& d) {
    alt.draw(NodeUniforms(u.key().child(kSideStream)), d);
  };
  if (alternative_root_)
    s.root = [root = *alternative_root_](const NodeUniforms& u, BranchingDraw& d) {
      root.draw(NodeUniforms(u.key().child(kSideStream)), d);
    };
  return s;
}

void CoupledSampler::draw_pair(const NodeUniforms& u, bool root, BranchingDraw& base, BranchingDraw& alternative) const {
  const NodeUniforms ua = kind_ == CouplingKind::independent ? NodeUniforms(u.key().child(kSideStream)) : u;
  if (root && base_root_) {
    base_root_->draw(u, base);
    alternative_root_->draw(ua, alternative);
  } else {
    base_.draw(u, base);
    alternative_.draw(ua, alternative);
  }
}

std::pair<TreeRealization, TreeRealization> grow_coupled(const CoupledSampler& cs, StreamKey root_key,
                                                         const GrowOptions& options) {
  return {grow(cs.base_source(), root_key, options), grow(cs.alternative_source(), root_key, options)};
}

std::optional<CouplingConstants> exact_constants(const CoupledSampler& cs) {
  CouplingConstants cc;
  fill_moments(cc, cs);
  cc.exact = true;
  if (cs.kind() == CouplingKind::identity) return cc;
  const CouplingKind kind = cs.kind() == CouplingKind::table ? CouplingKind::quantile : cs.kind();
  const bool wbt = cs.mode() == TreeMode::wbt;

  const auto& a = cs.base().structure();
  const auto& b = cs.alternative().structure();
  if (const auto* ia = std::get_if<IndependentVector>(&a)) {
    const auto* ib = std::get_if<IndependentVector>(&b);
    if (!ib) return std::nullopt;
    const auto pieces = offspring_pieces(ia->offspring, ib->offspring, kind);
    if (!pieces) return std::nullopt;
    double weights = 0.0, cq = 0.0;
    for (const auto& pc : *pieces) {
      const Distribution& c = ia->weight_for(static_cast<std::size_t>(pc.n));
      const Distribution& ch = ib->weight_for(static_cast<std::size_t>(pc.n_hat));
      const auto g = scalar_gap(c, ch, kind);
      if (!g) return std::nullopt;
      weights += pc.p * (*g * std::min(pc.n, pc.n_hat) + ch.mean_abs() * std::max(0.0, pc.n_hat - pc.n) +
                         c.mean_abs() * std::max(0.0, pc.n - pc.n_hat));
      if (wbt) {
        const auto gcq = product_gap(ia->mark, ib->mark, c, ch, kind);
        if (!gcq) return std::nullopt;
        cq += pc.p * *gcq;
      }
    }
    if (wbt) {
      cc.e_wbt = cq + weights;
    } else {
      const auto gq = scalar_gap(ia->mark, ib->mark, kind);
      if (!gq) return std::nullopt;
      cc.e = *gq + weights;
    }
  } else if (const auto* ja = std::get_if<JointVector>(&a)) {
    const auto* jb = std::get_if<JointVector>(&b);
    if (!jb) return std::nullopt;
    for (const auto& pc : pair_pieces(ja->probs, jb->probs, kind)) {
      const auto& x = ja->atoms[pc.i];
      const auto& y = jb->atoms[pc.k];
      if (wbt) {
        cc.e_wbt += pc.p * wbt_node_term(x.mark, static_cast<double>(x.offspring), x.weights[0], y.mark,
                                         static_cast<double>(y.offspring), y.weights[0]);
      } else {
        cc.e += pc.p * (std::abs(y.mark - x.mark) + abs_diff_padded(x.weights, y.weights));
      }
    }
  } else {
    return std::nullopt;
  }
  if (wbt) {
    const auto es = exact_root_gap(cs);
    if (!es) return std::nullopt;
    cc.e_star = *es;
  }
  return cc;
}

CouplingConstants estimate_constants(const CoupledSampler& cs, std::size_t draws, StreamKey key) {
  if (draws < 2) throw std::invalid_argument("estimate_constants: need at least two draws");
  CouplingConstants cc;
  fill_moments(cc, cs);
  cc.exact = false;
  const bool wbt = cs.mode() == TreeMode::wbt;
  std::vector<double> node(draws), root(wbt ? draws : 0);
  BranchingDraw x, y;
  const StreamKey node_key = key.child(1), root_key = key.child(2);
  for (std::size_t i = 0; i < draws; ++i) {
    cs.draw_pair(NodeUniforms(node_key.child(i)), false, x, y);
    if (wbt) {
      node[i] = wbt_node_term(x.mark, static_cast<double>(x.offspring), x.own_weight(), y.mark,
                              static_cast<double>(y.offspring), y.own_weight());
      cs.draw_pair(NodeUniforms(root_key.child(i)), true, x, y);
      root[i] = std::abs(y.mark - x.mark) + std::abs(static_cast<double>(y.offspring) - static_cast<double>(x.offspring));
    } else {
      node[i] = std::abs(y.mark - x.mark) + abs_diff_padded(x.weights, y.weights);
    }
  }
  const auto en = estimate_mean(node);
  if (wbt) {
    cc.e_wbt = en.mean;
    cc.e_wbt_se = en.se;
    const auto er = estimate_mean(root);
    cc.e_star = er.mean;
    cc.e_star_se = er.se;
  } else {
    cc.e = en.mean;
    cc.e_se = en.se;
  }
  return cc;
}

CouplingConstants coupling_constants(const CoupledSampler& cs, std::size_t draws, StreamKey key) {
  if (auto cc = exact_constants(cs)) return *cc;
  return estimate_constants(cs, draws, key);
}

std::vector<GapEstimate> gap_profile(const CoupledSampler& cs, std::size_t depth, std::size_t reps, StreamKey key,
                                     unsigned threads, std::size_t node_cap) {
  if (reps < 2) throw std::invalid_argument("gap_profile: need at least two replications");
  const std::size_t width = depth + 1;
  std::vector<double> gaps(reps * width);
  const NodeSource left = cs.base_source(), right = cs.alternative_source();
  const GrowOptions opts{depth, node_cap, false};
  parallel_for(reps, threads, [&](std::size_t r) {
    const StreamKey k = key.child(r);
    const TreeRealization a = grow(left, k, opts);
    const TreeRealization b = grow(right, k, opts);
    for (std::size_t j = 0; j <= depth; ++j) gaps[r * width + j] = std::abs(b.w(j) - a.w(j));
  });
  std::vector<GapEstimate> out(width);
  std::vector<double> column(reps);
  for (std::size_t j = 0; j <= depth; ++j) {
    for (std::size_t r = 0; r < reps; ++r) column[r] = gaps[r * width + j];
    const auto m = estimate_mean(column);
    out[j] = {m.mean, m.se};
  }
  return out;
}

GapEstimate mean_abs_gap(const CoupledSampler& cs, std::size_t j, std::size_t reps, StreamKey key, unsigned threads) {
  return gap_profile(cs, j, reps, key, threads).back();
}

double prop1_coefficient(const CouplingConstants& cc, std::size_t j) {
  double s = 0.0;
  for (std::size_t t = 0; t < j; ++t)
    s += std::pow(cc.rho, static_cast<double>(t)) * std::pow(cc.rho_hat, static_cast<double>(j - 1 - t));
  return std::pow(cc.rho_hat, static_cast<double>(j)) + cc.mean_abs_q * s;
}

double prop1_bound(const CouplingConstants& cc, std::size_t j) { return prop1_coefficient(cc, j) * cc.e; }

namespace {

struct WbtBoundTerms {
  double node_coef = 0.0;  // multiplies e_wbt
  double root_scale = 0.0; // rho_hat^{j-1}, multiplies tail * e_star
};

WbtBoundTerms wbt_bound_terms(const CouplingConstants& cc, std::size_t j) {
  WbtBoundTerms t;
  double s = 0.0;
  for (std::size_t k = 0; k < j; ++k)
    s += std::pow(cc.rho_hat, static_cast<double>(k)) * std::pow(cc.rho, static_cast<double>(j - 1 - k));
  // With a delayed root the offspring means of root and node laws may differ;
  // the larger of the two is used on each side.
  const double n_hat = std::max(cc.mean_offspring_hat, cc.root_mean_offspring_hat);
  const double n = std::max(cc.mean_offspring, cc.root_mean_offspring);
  double ratio = 0.0;
  if (cc.rho > 0.0) {
    ratio = n * cc.mean_abs_cq / cc.rho;
  } else if (n * cc.mean_abs_cq != 0.0) {
    throw std::domain_error("prop2_bound: rho = 0 with nonzero E[N] E|CQ|");
  }
  t.node_coef = std::max(n_hat, ratio) * s;
  t.root_scale = std::pow(cc.rho_hat, static_cast<double>(j - 1));
  return t;
}

}  // namespace

double prop2_bound(const CouplingConstants& cc, std::size_t j, TailVariant variant) {
  if (j == 0) return cc.e_star;
  const WbtBoundTerms t = wbt_bound_terms(cc, j);
  const double tail = variant == TailVariant::statement ? cc.mean_abs_q : cc.mean_abs_cq;
  return t.node_coef * cc.e_wbt + tail * t.root_scale * cc.e_star;
}

bool CertificationReport::all_pass() const {
  return rho_gap_ok && std::all_of(rows.begin(), rows.end(), [](const CertificationRow& r) { return r.pass; });
}

CertificationReport certify(const CoupledSampler& cs, const CertifyOptions& options, StreamKey key) {
  if (options.j_min > options.j_max) throw std::invalid_argument("certify: empty level range");
  CertificationReport report;
  report.constants = coupling_constants(cs, options.constant_draws, key.child(1));
  const auto& cc = report.constants;
  const auto profile = gap_profile(cs, options.j_max, options.reps, key.child(2), options.threads, options.node_cap);
  for (std::size_t j = options.j_min; j <= options.j_max; ++j) {
    CertificationRow row;
    row.j = j;
    row.gap = profile[j].mean;
    row.gap_se = profile[j].se;
    if (cc.mode == TreeMode::wbp) {
      row.bound_statement = row.bound_proof = prop1_bound(cc, j);
      row.bound_se = prop1_coefficient(cc, j) * cc.e_se;
    } else {
      row.bound_statement = prop2_bound(cc, j, TailVariant::statement);
      row.bound_proof = prop2_bound(cc, j, TailVariant::proof);
      if (j == 0) {
        row.bound_se = cc.e_star_se;
      } else {
        const WbtBoundTerms t = wbt_bound_terms(cc, j);
        const double tail = std::max(cc.mean_abs_q, cc.mean_abs_cq);
        row.bound_se = std::hypot(t.node_coef * cc.e_wbt_se, tail * t.root_scale * cc.e_star_se);
      }
    }
    const double bound = std::max(row.bound_statement, row.bound_proof);
    const double slack = 3.0 * std::hypot(row.gap_se, row.bound_se) + 1e-12 * std::max(1.0, bound);
    row.pass = row.gap <= bound + slack;
    report.rows.push_back(row);
  }
  if (cc.mode == TreeMode::wbp)
    report.rho_gap_ok = std::abs(cc.rho_hat - cc.rho) <= cc.e + 3.0 * cc.e_se + 1e-12;
  return report;
}

}  // namespace wbt
