#include "wbt/branching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wbt/stats.hpp"

namespace wbt {

namespace {

std::vector<double> cumulative_of(const std::vector<double>& probs, const char* what) {
  if (probs.empty()) throw std::invalid_argument(std::string(what) + ": no atoms");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument(std::string(what) + ": negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument(std::string(what) + ": probabilities must sum to one");
  std::vector<double> cum(probs.size());
  std::partial_sum(probs.begin(), probs.end(), cum.begin());
  cum.back() = 1.0;
  return cum;
}

std::size_t pick_atom(const std::vector<double>& cumulative, double u) {
  const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
  return it == cumulative.end() ? cumulative.size() - 1 : static_cast<std::size_t>(it - cumulative.begin());
}

void require_offspring_law(const Distribution& d) {
  if (!d.integer_valued() || !d.nonnegative())
    throw std::invalid_argument("offspring law must live on the nonnegative integers");
}

std::size_t to_count(double x) { return static_cast<std::size_t>(x); }

}  // namespace

std::string to_string(TreeMode m) { return m == TreeMode::wbp ? "wbp" : "wbt"; }

TreeMode tree_mode_from_string(const std::string& s) {
  if (s == "wbp") return TreeMode::wbp;
  if (s == "wbt") return TreeMode::wbt;
  throw std::invalid_argument("unknown tree mode '" + s + "' (expected wbp or wbt)");
}

const Distribution& IndependentVector::weight_for(std::size_t n) const {
  const auto it = weight_given_offspring.find(n);
  return it == weight_given_offspring.end() ? weight : it->second;
}

std::size_t JointVector::pick(double u) const { return pick_atom(cumulative, u); }

BranchingSampler BranchingSampler::independent(TreeMode mode, Distribution mark, Distribution offspring,
                                               Distribution weight,
                                               std::map<std::size_t, Distribution> weight_given_offspring) {
  require_offspring_law(offspring);
  bool nonneg = weight.nonnegative();
  for (const auto& [n, d] : weight_given_offspring) nonneg = nonneg && d.nonnegative();
  BranchingSampler s(mode, IndependentVector{std::move(mark), std::move(offspring), std::move(weight),
                                             std::move(weight_given_offspring)});
  s.nonnegative_ = nonneg;
  return s;
}

BranchingSampler BranchingSampler::joint(TreeMode mode, std::vector<JointVector::Atom> atoms, std::vector<double> probs) {
  if (atoms.size() != probs.size()) throw std::invalid_argument("joint sampler: atoms/probs length mismatch");
  bool nonneg = true;
  for (const auto& a : atoms) {
    if (mode == TreeMode::wbp && a.weights.size() != a.offspring)
      throw std::invalid_argument("joint sampler: a WBP atom needs one weight per child");
    if (mode == TreeMode::wbt && a.weights.size() != 1)
      throw std::invalid_argument("joint sampler: a WBT atom carries exactly one weight");
    for (double w : a.weights) nonneg = nonneg && w >= 0.0;
  }
  JointVector j{std::move(atoms), probs, cumulative_of(probs, "joint sampler")};
  BranchingSampler s(mode, std::move(j));
  s.nonnegative_ = nonneg;
  return s;
}

BranchingSampler BranchingSampler::deterministic_wbp(double mark, std::vector<double> weights) {
  const std::size_t n = weights.size();
  return joint(TreeMode::wbp, {{mark, n, std::move(weights)}}, {1.0});
}

BranchingSampler BranchingSampler::deterministic_wbt(double mark, std::size_t offspring, double weight) {
  return joint(TreeMode::wbt, {{mark, offspring, {weight}}}, {1.0});
}

BranchingSampler BranchingSampler::custom(TreeMode mode, DrawFunction draw, std::optional<Moments> declared,
                                          bool nonnegative_weights) {
  if (!draw) throw std::invalid_argument("custom sampler: empty draw function");
  BranchingSampler s(mode, CustomVector{std::move(draw)});
  s.declared_ = declared;
  s.nonnegative_ = nonnegative_weights;
  return s;
}

void BranchingSampler::draw(const NodeUniforms& u, BranchingDraw& out) const {
  if (const auto* iv = std::get_if<IndependentVector>(&structure_)) {
    out.mark = iv->mark.quantile(u.at(kMarkSlot));
    out.offspring = to_count(iv->offspring.quantile(u.at(kOffspringSlot)));
    const Distribution& w = iv->weight_for(out.offspring);
    if (mode_ == TreeMode::wbp) {
      out.weights.resize(out.offspring);
      for (std::size_t i = 0; i < out.offspring; ++i) out.weights[i] = w.quantile(u.at(kWeightSlot + i));
    } else {
      out.weights.assign(1, w.quantile(u.at(kWeightSlot)));
    }
  } else if (const auto* jv = std::get_if<JointVector>(&structure_)) {
    const auto& a = jv->atoms[jv->pick(u.at(kMarkSlot))];
    out.mark = a.mark;
    out.offspring = a.offspring;
    out.weights.assign(a.weights.begin(), a.weights.end());
  } else {
    std::get<CustomVector>(structure_).draw(u, out);
  }
}

DrawFunction BranchingSampler::draw_function() const {
  return [self = *this](const NodeUniforms& u, BranchingDraw& out) { self.draw(u, out); };
}

std::optional<Moments> BranchingSampler::analytic_moments() const {
  if (declared_) return declared_;
  Moments m;
  if (const auto* iv = std::get_if<IndependentVector>(&structure_)) {
    m.mean_abs_q = iv->mark.mean_abs();
    m.mean_offspring = iv->offspring.mean();
    double mean_abs_c = 0.0;  // E|C_1| mixed over N, for WBT
    if (iv->weight_given_offspring.empty()) {
      mean_abs_c = iv->weight.mean_abs();
      m.rho = m.mean_offspring * mean_abs_c;
    } else {
      const auto law = iv->offspring.discretized();
      if (!law) return std::nullopt;
      for (std::size_t i = 0; i < law->size(); ++i) {
        const double k = law->support()[i], p = law->mass()[i];
        const double c = iv->weight_for(to_count(k)).mean_abs();
        m.rho += p * k * c;
        mean_abs_c += p * c;
      }
    }
    m.mean_abs_cq = mode_ == TreeMode::wbt ? mean_abs_c * m.mean_abs_q : std::numeric_limits<double>::quiet_NaN();
    return m;
  }
  if (const auto* jv = std::get_if<JointVector>(&structure_)) {
    for (std::size_t i = 0; i < jv->atoms.size(); ++i) {
      const auto& a = jv->atoms[i];
      const double p = jv->probs[i];
      m.mean_abs_q += p * std::abs(a.mark);
      m.mean_offspring += p * static_cast<double>(a.offspring);
      if (mode_ == TreeMode::wbp) {
        for (double w : a.weights) m.rho += p * std::abs(w);
      } else {
        m.rho += p * static_cast<double>(a.offspring) * std::abs(a.weights[0]);
        m.mean_abs_cq += p * std::abs(a.weights[0] * a.mark);
      }
    }
    if (mode_ == TreeMode::wbp) m.mean_abs_cq = std::numeric_limits<double>::quiet_NaN();
    return m;
  }
  return std::nullopt;
}

BranchingSampler BranchingSampler::with_declared_moments(Moments m) const {
  BranchingSampler s = *this;
  s.declared_ = m;
  return s;
}

RootSampler RootSampler::independent(Distribution mark, Distribution offspring) {
  require_offspring_law(offspring);
  return RootSampler(Independent{std::move(mark), std::move(offspring)});
}

RootSampler RootSampler::joint(std::vector<Atom> atoms, std::vector<double> probs) {
  if (atoms.size() != probs.size()) throw std::invalid_argument("root sampler: atoms/probs length mismatch");
  auto cum = cumulative_of(probs, "root sampler");
  return RootSampler(Joint{std::move(atoms), std::move(probs), std::move(cum)});
}

void RootSampler::draw(const NodeUniforms& u, BranchingDraw& out) const {
  if (const auto* ind = std::get_if<Independent>(&structure_)) {
    out.mark = ind->mark.quantile(u.at(kMarkSlot));
    out.offspring = to_count(ind->offspring.quantile(u.at(kOffspringSlot)));
  } else {
    const auto& j = std::get<Joint>(structure_);
    const auto& a = j.atoms[pick_atom(j.cumulative, u.at(kMarkSlot))];
    out.mark = a.mark;
    out.offspring = a.offspring;
  }
  out.weights.clear();
}

DrawFunction RootSampler::draw_function() const {
  return [self = *this](const NodeUniforms& u, BranchingDraw& out) { self.draw(u, out); };
}

double RootSampler::mean_offspring() const {
  if (const auto* ind = std::get_if<Independent>(&structure_)) return ind->offspring.mean();
  const auto& j = std::get<Joint>(structure_);
  double s = 0.0;
  for (std::size_t i = 0; i < j.atoms.size(); ++i) s += j.probs[i] * static_cast<double>(j.atoms[i].offspring);
  return s;
}

double RootSampler::mean_abs_q() const {
  if (const auto* ind = std::get_if<Independent>(&structure_)) return ind->mark.mean_abs();
  const auto& j = std::get<Joint>(structure_);
  double s = 0.0;
  for (std::size_t i = 0; i < j.atoms.size(); ++i) s += j.probs[i] * std::abs(j.atoms[i].mark);
  return s;
}

Moments moments(const BranchingSampler& sampler) {
  if (auto m = sampler.analytic_moments()) return *m;
  throw MissingMoments("moments unavailable: declare rho, mean_abs_q, mean_offspring" +
                       std::string(sampler.mode() == TreeMode::wbt ? ", mean_abs_cq" : "") +
                       " for this sampler (no analytic form)");
}

Moments estimate_moments(const BranchingSampler& sampler, std::size_t draws, StreamKey key) {
  if (draws < 2) throw std::invalid_argument("estimate_moments: need at least two draws");
  std::vector<double> q(draws), n(draws), r(draws), cq(draws);
  BranchingDraw d;
  for (std::size_t i = 0; i < draws; ++i) {
    sampler.draw(NodeUniforms(key.child(i)), d);
    q[i] = std::abs(d.mark);
    n[i] = static_cast<double>(d.offspring);
    if (sampler.mode() == TreeMode::wbp) {
      double s = 0.0;
      for (double w : d.weights) s += std::abs(w);
      r[i] = s;
      cq[i] = 0.0;
    } else {
      r[i] = n[i] * std::abs(d.own_weight());
      cq[i] = std::abs(d.own_weight() * d.mark);
    }
  }
  Moments m;
  const auto eq = estimate_mean(q), en = estimate_mean(n), er = estimate_mean(r), ecq = estimate_mean(cq);
  m.mean_abs_q = eq.mean;
  m.mean_abs_q_se = eq.se;
  m.mean_offspring = en.mean;
  m.mean_offspring_se = en.se;
  m.rho = er.mean;
  m.rho_se = er.se;
  m.mean_abs_cq = sampler.mode() == TreeMode::wbt ? ecq.mean : std::numeric_limits<double>::quiet_NaN();
  m.mean_abs_cq_se = ecq.se;
  m.estimated = true;
  return m;
}

NodeSource make_source(const BranchingSampler& sampler, const std::optional<RootSampler>& root) {
  if (root && sampler.mode() != TreeMode::wbt)
    throw std::invalid_argument("a delayed root law is only defined for weighted branching trees");
  NodeSource s;
  s.mode = sampler.mode();
  s.node = sampler.draw_function();
  if (root) s.root = root->draw_function();
  return s;
}

NodeIndex NodeIndex::truncate(std::size_t n) const {
  if (n > path.size()) throw std::out_of_range("node index truncation beyond its length");
  return NodeIndex{{path.begin(), path.begin() + static_cast<std::ptrdiff_t>(n)}};
}

ExplosionError::ExplosionError(std::size_t generation, std::size_t cap)
    : std::runtime_error("explosion cap: generation " + std::to_string(generation) + " pushes the tree past " +
                         std::to_string(cap) + " nodes"),
      generation_(generation) {}

void TreeRealization::check_level(std::size_t j) const {
  if (j > depth_)
    throw std::out_of_range("level " + std::to_string(j) + " exceeds the grown depth " + std::to_string(depth_));
}

std::size_t TreeRealization::generation_size(std::size_t j) const {
  check_level(j);
  return counts_[j];
}

std::size_t TreeRealization::total_nodes() const { return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0}); }

double TreeRealization::w(std::size_t j) const {
  check_level(j);
  return w_[j];
}

double TreeRealization::r(std::size_t k) const {
  check_level(k);
  double s = 0.0;
  for (std::size_t j = 0; j <= k; ++j) s += w_[j];
  return s;
}

double TreeRealization::homogeneous(std::size_t j) const {
  check_level(j);
  if (first_negative_ <= j)
    throw std::domain_error("homogeneous W requires nonnegative weights; a negative weight appeared at generation " +
                            std::to_string(first_negative_));
  return j == 0 ? 1.0 : pi_sum_[j];
}

std::span<const TreeNode> TreeRealization::generation(std::size_t j) const {
  check_level(j);
  if (!retained()) throw std::logic_error("tree was grown without retaining its nodes");
  return generations_[j];
}

NodeIndex TreeRealization::index_of(std::size_t level, std::size_t position) const {
  const auto gen = generation(level);
  if (position >= gen.size()) throw std::out_of_range("node position out of range");
  NodeIndex idx;
  idx.path.resize(level);
  std::size_t pos = position;
  for (std::size_t l = level; l > 0; --l) {
    const TreeNode& node = generations_[l][pos];
    idx.path[l - 1] = node.ordinal;
    pos = node.parent;
  }
  return idx;
}

TreeRealization grow(const NodeSource& source, StreamKey root_key, const GrowOptions& options) {
  if (options.node_cap < 1) throw std::invalid_argument("grow: node cap must be at least one");
  if (!source.node) throw std::invalid_argument("grow: node source has no draw function");

  struct Pending {
    StreamKey key;
    double parent_weight;
    double edge_weight;  // WBP: the parent's C for this child
    std::uint32_t parent;
    std::uint32_t ordinal;
  };

  TreeRealization t;
  t.depth_ = options.depth;
  t.w_.assign(options.depth + 1, 0.0);
  t.pi_sum_.assign(options.depth + 1, 0.0);
  t.counts_.assign(options.depth + 1, 0);
  if (options.retain) t.generations_.resize(options.depth + 1);

  std::vector<Pending> current{{root_key, 1.0, 1.0, 0, 0}}, next;
  std::size_t total = 1;
  BranchingDraw d;
  for (std::size_t level = 0; level <= options.depth; ++level) {
    double wsum = 0.0, pisum = 0.0;
    next.clear();
    for (std::size_t idx = 0; idx < current.size(); ++idx) {
      const Pending& p = current[idx];
      const NodeUniforms u(p.key);
      if (level == 0 && source.root) {
        source.root(u, d);
      } else {
        source.node(u, d);
      }
      double pi = 1.0;
      if (level > 0) pi = source.mode == TreeMode::wbp ? p.parent_weight * p.edge_weight : p.parent_weight * d.own_weight();
      if (pi < 0.0 && t.first_negative_ > level) t.first_negative_ = level;
      wsum += d.mark * pi;
      pisum += pi;
      if (options.retain)
        t.generations_[level].push_back({p.key, p.parent, p.ordinal, pi, d.mark, static_cast<std::uint32_t>(d.offspring)});
      if (level == options.depth || d.offspring == 0) continue;
      total += d.offspring;
      if (total > options.node_cap) throw ExplosionError(level + 1, options.node_cap);
      for (std::size_t c = 0; c < d.offspring; ++c) {
        const auto ord = static_cast<std::uint32_t>(c + 1);
        next.push_back({p.key.child(ord), pi, source.mode == TreeMode::wbp ? d.weights[c] : 0.0,
                        static_cast<std::uint32_t>(idx), ord});
      }
    }
    t.w_[level] = wsum;
    t.pi_sum_[level] = pisum;
    t.counts_[level] = current.size();
    current.swap(next);
  }
  return t;
}

TreeRealization grow(const BranchingSampler& sampler, const std::optional<RootSampler>& root, StreamKey root_key,
                     const GrowOptions& options) {
  return grow(make_source(sampler, root), root_key, options);
}

double w_process(const TreeRealization& tree, std::size_t j) { return tree.w(j); }
double r_process(const TreeRealization& tree, std::size_t k) { return tree.r(k); }
double homogeneous_w(const TreeRealization& tree, std::size_t j) { return tree.homogeneous(j); }

double martingale_normalize(double w, double rho, std::size_t j) {
  if (!(rho > 0.0)) throw std::invalid_argument("martingale normalization needs rho > 0");
  return w / std::pow(rho, static_cast<double>(j));
}

double endogenous_tail(const Moments& m, TreeMode mode, double root_mean_offspring, std::size_t k) {
  if (!(m.rho < 1.0)) throw std::domain_error("contraction required: rho = " + std::to_string(m.rho) + " >= 1");
  const double kk = static_cast<double>(k);
  if (mode == TreeMode::wbp) return m.mean_abs_q * std::pow(m.rho, kk + 1.0) / (1.0 - m.rho);
  return root_mean_offspring * m.mean_abs_cq * std::pow(m.rho, kk) / (1.0 - m.rho);
}

std::size_t endogenous_levels(const Moments& m, TreeMode mode, double root_mean_offspring, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("endogenous truncation: eps must be positive");
  constexpr std::size_t kMaxLevels = 4096;
  for (std::size_t k = 0; k <= kMaxLevels; ++k)
    if (endogenous_tail(m, mode, root_mean_offspring, k) <= eps) return k;
  throw std::domain_error("endogenous truncation: more than 4096 levels needed for eps = " + std::to_string(eps));
}

EndogenousSample endogenous_r_sample(const BranchingSampler& sampler, const std::optional<RootSampler>& root,
                                     double eps, StreamKey key) {
  const Moments m = moments(sampler);
  const double root_n = root ? root->mean_offspring() : m.mean_offspring;
  EndogenousSample out;
  out.levels = endogenous_levels(m, sampler.mode(), root_n, eps);
  out.tail_bound = endogenous_tail(m, sampler.mode(), root_n, out.levels);
  const TreeRealization t = grow(sampler, root, key, {out.levels, kDefaultNodeCap, false});
  out.value = t.r(out.levels);
  return out;
}

}  // namespace wbt
