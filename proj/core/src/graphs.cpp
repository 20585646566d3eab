#include "wbt/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "wbt/coupling.hpp"

namespace wbt {

namespace {

// Fisher-Yates with our own bounded draws, so the permutation does not depend
// on the standard library's shuffle.
template <class T>
void shuffle_in_place(std::vector<T>& v, RandomStream& rs) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rs.below(i)]);
}

std::vector<std::size_t> stubs_of(const std::vector<std::size_t>& degrees) {
  std::vector<std::size_t> stubs;
  for (std::size_t i = 0; i < degrees.size(); ++i) stubs.insert(stubs.end(), degrees[i], i);
  return stubs;
}

template <class Attempt>
Multigraph with_attempts(const PairingOptions& options, Attempt attempt) {
  const std::size_t attempts = options.simple ? std::max<std::size_t>(1, options.max_attempts) : 1;
  for (std::size_t a = 0; a < attempts; ++a) {
    Multigraph g = attempt(a);
    if (!options.simple || g.simple()) return g;
  }
  throw SimpleGraphUnavailable(attempts);
}

DiscreteMeasure from_counts(const std::map<std::size_t, std::uint64_t>& counts, std::uint64_t denom) {
  std::vector<double> atoms, masses;
  for (const auto& [k, c] : counts) {
    if (c == 0) continue;
    atoms.push_back(static_cast<double>(k));
    masses.push_back(static_cast<double>(c) / static_cast<double>(denom));
  }
  return DiscreteMeasure::make(std::move(atoms), std::move(masses));
}

Distribution as_distribution(const DiscreteMeasure& m) { return Distribution(FiniteDiscrete{m}); }

void check_integer_law(const Distribution& f) {
  if (!f.integer_valued() || !f.nonnegative()) throw std::invalid_argument("degree law must live on {0, 1, 2, ...}");
}

void check_grid(const std::vector<std::size_t>& n_grid, std::size_t reps) {
  if (n_grid.empty() || std::find(n_grid.begin(), n_grid.end(), 0) != n_grid.end())
    throw std::invalid_argument("graph experiment: n grid must be nonempty and positive");
  if (!std::is_sorted(n_grid.begin(), n_grid.end())) throw std::invalid_argument("graph experiment: n grid must be increasing");
  if (reps == 0) throw std::invalid_argument("graph experiment: reps must be positive");
}

Curve curve_from(std::string name, const std::vector<std::size_t>& n_grid, const std::vector<std::size_t>& levels,
                 const std::vector<double>& cells, std::size_t reps) {
  Curve c;
  c.statistic = std::move(name);
  for (std::size_t g = 0; g < n_grid.size(); ++g) {
    CurvePoint p;
    p.n = n_grid[g];
    p.level = levels[g];
    p.replicates.assign(cells.begin() + static_cast<std::ptrdiff_t>(g * reps),
                        cells.begin() + static_cast<std::ptrdiff_t>((g + 1) * reps));
    p.value = summarize_replicates(p.replicates);
    c.points.push_back(std::move(p));
  }
  return c;
}

std::vector<std::vector<std::size_t>> in_neighbours(const Multigraph& g) {
  std::vector<std::vector<std::size_t>> adj(g.n);
  for (const Edge& e : g.edges) {
    if (g.directed) {
      adj[e.to].push_back(e.from);
    } else {
      adj[e.from].push_back(e.to);
      adj[e.to].push_back(e.from);
    }
  }
  return adj;
}

}  // namespace

std::uint64_t DegreeSequence::total() const noexcept {
  return std::accumulate(degrees.begin(), degrees.end(), std::uint64_t{0});
}
std::uint64_t BiDegreeSequence::total_in() const noexcept { return std::accumulate(in.begin(), in.end(), std::uint64_t{0}); }
std::uint64_t BiDegreeSequence::total_out() const noexcept {
  return std::accumulate(out.begin(), out.end(), std::uint64_t{0});
}

std::vector<std::size_t> Multigraph::degrees() const {
  std::vector<std::size_t> d(n, 0);
  for (const Edge& e : edges) {
    ++d[e.from];
    if (!directed) ++d[e.to];
  }
  return d;
}

std::vector<std::size_t> Multigraph::in_degrees() const {
  if (!directed) return degrees();
  std::vector<std::size_t> d(n, 0);
  for (const Edge& e : edges) ++d[e.to];
  return d;
}

bool Multigraph::simple() const {
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const Edge& e : edges) {
    if (e.from == e.to) return false;
    const std::pair<std::size_t, std::size_t> key = directed ? std::pair{e.from, e.to} : std::pair{std::min(e.from, e.to), std::max(e.from, e.to)};
    if (!seen.insert(key).second) return false;
  }
  return true;
}

SimpleGraphUnavailable::SimpleGraphUnavailable(std::size_t attempts)
    : std::runtime_error("no simple graph after " + std::to_string(attempts) + " pairing attempts") {}

Multigraph config_model(const DegreeSequence& ds, StreamKey key, const PairingOptions& options) {
  if (ds.total() % 2 != 0) throw std::invalid_argument("configuration model: total degree " + std::to_string(ds.total()) + " is odd");
  const auto base = stubs_of(ds.degrees);
  return with_attempts(options, [&](std::size_t a) {
    RandomStream rs(key.child(a));
    auto stubs = base;
    shuffle_in_place(stubs, rs);
    Multigraph g{ds.size(), {}, false};
    g.edges.reserve(stubs.size() / 2);
    for (std::size_t i = 0; i + 1 < stubs.size(); i += 2) g.edges.push_back({stubs[i], stubs[i + 1]});
    return g;
  });
}

Multigraph config_model(const BiDegreeSequence& ds, StreamKey key, const PairingOptions& options) {
  if (ds.in.size() != ds.out.size()) throw std::invalid_argument("bi-degree sequence: in and out lists differ in length");
  if (ds.total_in() != ds.total_out())
    throw std::invalid_argument("bi-degree sequence: in-degrees sum to " + std::to_string(ds.total_in()) +
                                " but out-degrees sum to " + std::to_string(ds.total_out()));
  const auto outs = stubs_of(ds.out);
  const auto ins = stubs_of(ds.in);
  return with_attempts(options, [&](std::size_t a) {
    RandomStream rs(key.child(a));
    auto targets = ins;
    shuffle_in_place(targets, rs);
    Multigraph g{ds.size(), {}, true};
    g.edges.reserve(outs.size());
    for (std::size_t i = 0; i < outs.size(); ++i) g.edges.push_back({outs[i], targets[i]});
    return g;
  });
}

ExplorationTrace bfs_exploration(const Multigraph& g, std::size_t start, std::size_t max_depth) {
  if (start >= g.n) throw std::out_of_range("bfs_exploration: start node outside the graph");
  const auto adj = in_neighbours(g);
  ExplorationTrace t;
  t.generation_sizes.assign(max_depth + 1, 0);
  t.depleted.assign(max_depth + 1, false);
  std::vector<bool> seen(g.n, false);
  std::vector<std::size_t> parent(g.n, g.n);
  std::vector<std::size_t> frontier{start};
  seen[start] = true;
  t.generation_sizes[0] = 1;
  t.explored = 1;
  for (std::size_t j = 0; j < max_depth && !frontier.empty(); ++j) {
    std::vector<std::size_t> next;
    for (std::size_t u : frontier) {
      // In a tree the only edge back to a seen node is the one to the parent.
      bool parent_edge_used = g.directed;
      for (std::size_t v : adj[u]) {
        if (!seen[v]) {
          seen[v] = true;
          parent[v] = u;
          next.push_back(v);
        } else if (!parent_edge_used && v == parent[u]) {
          parent_edge_used = true;
        } else {
          t.depleted[j] = true;
        }
      }
    }
    t.generation_sizes[j + 1] = next.size();
    t.explored += next.size();
    frontier = std::move(next);
  }
  return t;
}

bool CoupledExploration::agrees_below_threshold() const {
  for (std::size_t j = 0; j < threshold_level && j < tree.size(); ++j)
    if (graph.generation_sizes[j] != tree[j]) return false;
  return true;
}

CoupledExploration explore_with_tree(const DegreeSequence& ds, std::size_t start, std::size_t depth, StreamKey key,
                                     std::size_t node_cap) {
  if (start >= ds.size()) throw std::out_of_range("explore_with_tree: start node outside the sequence");
  const std::uint64_t L = ds.total();
  if (L == 0) throw std::invalid_argument("explore_with_tree: all degrees are zero");
  std::vector<std::size_t> owner;
  owner.reserve(L);
  std::vector<std::size_t> first(ds.size() + 1, 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    first[i] = owner.size();
    owner.insert(owner.end(), ds.degrees[i], i);
  }
  first[ds.size()] = owner.size();

  // Free half-edges with O(1) removal.
  std::vector<std::size_t> free_list(L), where(L);
  std::iota(free_list.begin(), free_list.end(), std::size_t{0});
  std::iota(where.begin(), where.end(), std::size_t{0});
  std::vector<bool> paired(L, false);
  auto take = [&](std::size_t h) {
    paired[h] = true;
    const std::size_t pos = where[h], last = free_list.back();
    free_list[pos] = last;
    where[last] = pos;
    free_list.pop_back();
  };
  std::vector<bool> discovered(ds.size(), false);

  RandomStream rs(key);
  CoupledExploration out;
  out.graph.generation_sizes.assign(depth + 1, 0);
  out.graph.depleted.assign(depth + 1, false);
  out.tree.assign(depth + 1, 0);
  out.uncovered.assign(depth + 1, 0);

  discovered[start] = true;
  out.graph.generation_sizes[0] = 1;
  out.graph.explored = 1;
  out.tree[0] = 1;
  out.uncovered[0] = ds.degrees[start];
  std::vector<std::size_t> active;
  for (std::size_t h = first[start]; h < first[start + 1]; ++h) active.push_back(h);
  std::uint64_t tree_active = active.size();
  bool coupled = true;

  auto graph_step = [&](std::size_t h, std::size_t j, std::vector<std::size_t>& next) {
    if (paired[h]) return;
    take(h);
    if (free_list.empty()) return;
    std::size_t p = free_list[rs.below(free_list.size())];
    take(p);
    const std::size_t v = owner[p];
    if (discovered[v]) {
      out.graph.depleted[j] = true;
      return;
    }
    discovered[v] = true;
    ++out.graph.generation_sizes[j + 1];
    for (std::size_t x = first[v]; x < first[v + 1]; ++x)
      if (x != p) next.push_back(x);
  };

  for (std::size_t j = 0; j < depth; ++j) {
    std::vector<std::size_t> next;
    std::uint64_t tree_next = 0;
    std::size_t i = 0;
    for (; coupled && i < active.size(); ++i) {
      const std::size_t h = active[i];
      const std::size_t p = rs.below(L);
      tree_next += ds.degrees[owner[p]] - 1;
      if (!paired[h] && p != h && !paired[p] && !discovered[owner[p]]) {
        take(h);
        take(p);
        const std::size_t v = owner[p];
        discovered[v] = true;
        ++out.graph.generation_sizes[j + 1];
        for (std::size_t x = first[v]; x < first[v + 1]; ++x)
          if (x != p) next.push_back(x);
        continue;
      }
      coupled = false;
      out.first_collision = j;
      graph_step(h, j, next);
    }
    for (std::uint64_t t = i; t < tree_active; ++t) tree_next += ds.degrees[owner[rs.below(L)]] - 1;
    for (; i < active.size(); ++i) graph_step(active[i], j, next);

    // Generation j+1 of the tree is one child per active half-edge; their
    // remaining half-edges feed generation j+2.
    out.tree[j + 1] = tree_active;
    if (tree_next > node_cap) throw ExplosionError(j + 2, node_cap);
    tree_active = tree_next;
    out.graph.explored += out.graph.generation_sizes[j + 1];
    out.uncovered[j + 1] = out.uncovered[j] + next.size() + out.graph.generation_sizes[j + 1];
    active = std::move(next);
  }

  const double threshold = std::sqrt(static_cast<double>(L));
  out.threshold_level = 0;
  while (out.threshold_level <= depth && static_cast<double>(out.uncovered[out.threshold_level]) <= threshold)
    ++out.threshold_level;
  return out;
}

SizeBiasedMeasures size_biased(const DegreeSequence& ds) {
  if (ds.size() == 0) throw std::invalid_argument("size_biased: empty degree sequence");
  SizeBiasedMeasures m;
  m.n = ds.size();
  m.total = ds.total();
  if (m.total == 0) throw std::invalid_argument("size_biased: all degrees are zero, so the size-biased law is undefined");
  for (std::size_t d : ds.degrees) {
    ++m.nu_star_counts[d];
    if (d > 0) m.nu_counts[d - 1] += d;
  }
  m.nu_star = from_counts(m.nu_star_counts, m.n);
  m.nu = from_counts(m.nu_counts, m.total);
  return m;
}

LimitMeasures size_biased_limit(const Distribution& f) {
  check_integer_law(f);
  const auto law = f.discretized();
  if (!law) throw std::invalid_argument("size_biased_limit: degree law cannot be discretized");
  const double mean = law->mean();
  if (!(mean > 0.0)) throw std::invalid_argument("size_biased_limit: E[D] must be positive");
  std::vector<double> atoms, masses;
  for (std::size_t i = 0; i < law->size(); ++i) {
    const double k = law->support()[i];
    if (k < 1.0) continue;
    atoms.push_back(k - 1.0);
    masses.push_back(k * law->mass()[i] / mean);
  }
  return {*law, DiscreteMeasure::make(std::move(atoms), std::move(masses))};
}

double d1_integer(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  if (!mu.integer_supported() || !nu.integer_supported()) throw std::invalid_argument("d1_integer: supports must be integers");
  if (mu.support().front() < 0.0 || nu.support().front() < 0.0)
    throw std::invalid_argument("d1_integer: supports must be nonnegative");
  if (!std::isfinite(mu.mean()) || !std::isfinite(nu.mean())) throw std::invalid_argument("d1_integer: infinite mean");
  const auto top = static_cast<std::int64_t>(std::max(mu.support().back(), nu.support().back()));
  double sum = 0.0, fa = 0.0, fb = 0.0;
  std::size_t ia = 0, ib = 0;
  for (std::int64_t k = 0; k < top; ++k) {
    const double x = static_cast<double>(k);
    while (ia < mu.size() && mu.support()[ia] <= x) fa += mu.mass()[ia++];
    while (ib < nu.size() && nu.support()[ib] <= x) fb += nu.mass()[ib++];
    sum += std::abs(fa - fb);
  }
  return sum;
}

DegreeSequence sample_degrees(const Distribution& f, std::size_t n, StreamKey key) {
  check_integer_law(f);
  RandomStream rs(key);
  DegreeSequence ds;
  ds.degrees.resize(n);
  for (auto& d : ds.degrees) d = static_cast<std::size_t>(f.quantile(rs.uniform()));
  return ds;
}

BiDegreeSequence sample_bidegrees(const Distribution& in_law, const Distribution& out_law, std::size_t n,
                                  StreamKey key) {
  if (n == 0) throw std::invalid_argument("sample_bidegrees: n must be positive");
  BiDegreeSequence ds{sample_degrees(in_law, n, key.child(0)).degrees, sample_degrees(out_law, n, key.child(1)).degrees};
  RandomStream rs(key.child(2));
  std::uint64_t tin = ds.total_in(), tout = ds.total_out();
  while (tin != tout) {
    auto& side = tin < tout ? ds.in : ds.out;
    ++side[rs.below(n)];
    ++(tin < tout ? tin : tout);
  }
  return ds;
}

SizeBiasReport sizebias_rate_experiment(const Distribution& f, const std::vector<std::size_t>& n_grid,
                                        const SizeBiasOptions& options, StreamKey key) {
  check_grid(n_grid, options.reps);
  if (!(options.moment_eps > 0.0)) throw std::invalid_argument("sizebias: moment exponent eps must be positive");
  if (!(options.delta_star > 0.0 && options.delta_star < 0.5))
    throw std::invalid_argument("sizebias: delta_star must lie in (0, 1/2)");
  const double cap = std::min(0.5, options.moment_eps / (2.0 + options.moment_eps));
  if (!(options.delta > 0.0 && options.delta < cap))
    throw std::invalid_argument("sizebias: delta must lie in (0, min(1/2, eps/(2+eps))) = (0, " + std::to_string(cap) + ")");
  if (!std::isfinite(f.abs_moment(2.0 + options.moment_eps)))
    throw std::invalid_argument("sizebias: E[D^{2+eps}] is not finite");
  const LimitMeasures limit = size_biased_limit(f);
  const std::size_t reps = options.reps, ng = n_grid.size();
  std::vector<double> star(ng * reps), sized(ng * reps);
  parallel_for(ng * reps, options.threads, [&](std::size_t c) {
    const std::size_t g = c / reps, r = c % reps;
    const std::size_t n = n_grid[g];
    DegreeSequence ds = sample_degrees(f, n, key.child(n).child(r));
    const double x = static_cast<double>(n);
    const auto m = size_biased(ds);
    star[c] = std::pow(x, options.delta_star) * d1_integer(m.nu_star, limit.nu_star);
    sized[c] = std::pow(x, options.delta) * d1_integer(m.nu, limit.nu);
  });
  const std::vector<std::size_t> levels(ng, 0);
  return {curve_from("scaled_d1_nu_star", n_grid, levels, star, reps),
          curve_from("scaled_d1_nu", n_grid, levels, sized, reps)};
}

GwCouplingReport gw_coupling_experiment(const Distribution& f, const std::vector<std::size_t>& n_grid,
                                        const Schedule& schedule, const GwCouplingOptions& options, StreamKey key) {
  check_grid(n_grid, options.reps);
  const LimitMeasures limit = size_biased_limit(f);
  const double m_star = limit.nu_star.mean(), m = limit.nu.mean();
  const auto one = Distribution::point(1.0);
  const auto limit_node = BranchingSampler::independent(TreeMode::wbt, one, as_distribution(limit.nu), one);
  const auto limit_root = RootSampler::independent(one, as_distribution(limit.nu_star));

  struct Side {
    BranchingSampler node;
    RootSampler root;
    double m_star;
    double m;
  };
  auto side_of = [&](const SizeBiasedMeasures& e) {
    return Side{BranchingSampler::independent(TreeMode::wbt, one, as_distribution(e.nu), one),
                RootSampler::independent(one, as_distribution(e.nu_star)), e.nu_star.mean(), e.nu.mean()};
  };
  const Side limit_side{limit_node, limit_root, m_star, m};
  struct Maxima {
    double normalized = 0.0;
    double scaled = 0.0;
    double first = 0.0;
  };
  // Grows the two delayed trees on shared uniforms and compares generations 1..depth.
  auto compare = [&](const Side& x, const Side& y, std::size_t depth, StreamKey k) {
    const auto cs = CoupledSampler::quantile(x.node, y.node, x.root, y.root);
    const auto [tx, ty] = grow_coupled(cs, k, GrowOptions{depth, options.node_cap, false});
    Maxima out;
    for (std::size_t j = 1; j <= depth; ++j) {
      const double zy = static_cast<double>(ty.generation_size(j));
      const double zx = static_cast<double>(tx.generation_size(j));
      const double sy = y.m_star * std::pow(y.m, static_cast<double>(j - 1));
      const double sx = x.m_star * std::pow(x.m, static_cast<double>(j - 1));
      // m_n = 0 forces Z^(n,j) = 0 beyond the root's children.
      const double uy = zy == 0.0 ? 0.0 : zy / sy;
      const double ux = zx == 0.0 ? 0.0 : zx / sx;
      out.normalized = std::max(out.normalized, std::abs(uy - ux));
      out.scaled = std::max(out.scaled, std::abs(zy - zx) / std::pow(m, static_cast<double>(j - 1)));
    }
    out.first = std::abs(static_cast<double>(ty.generation_size(1)) - static_cast<double>(tx.generation_size(1)));
    return out;
  };

  const std::size_t reps = options.reps, ng = n_grid.size();
  std::vector<double> norm(ng * reps), absolute(ng * reps), gap1(ng * reps), d1(ng * reps);
  parallel_for(ng * reps, options.threads, [&](std::size_t c) {
    const std::size_t g = c / reps, r = c % reps;
    const std::size_t n = n_grid[g];
    const StreamKey rk = key.child(n).child(r);
    const auto emp = size_biased(sample_degrees(f, n, rk.child(0)));
    const auto mx = compare(limit_side, side_of(emp), std::max<std::size_t>(1, schedule(n)), rk.child(1));
    norm[c] = mx.normalized;
    absolute[c] = mx.scaled;
    gap1[c] = mx.first;
    d1[c] = d1_integer(emp.nu_star, limit.nu_star);
  });

  // Same-law floor at the largest n: two independent degree sequences of that
  // size, coupled exactly like the finite and limit trees.
  const std::size_t n_last = n_grid.back();
  std::vector<double> base_norm(reps), base_abs(reps);
  parallel_for(reps, options.threads, [&](std::size_t r) {
    const StreamKey rk = key.child(0).child(r);
    const auto a = size_biased(sample_degrees(f, n_last, rk.child(0)));
    const auto b = size_biased(sample_degrees(f, n_last, rk.child(1)));
    const auto mx = compare(side_of(a), side_of(b), std::max<std::size_t>(1, schedule(n_last)), rk.child(2));
    base_norm[r] = mx.normalized;
    base_abs[r] = mx.scaled;
  });

  std::vector<std::size_t> levels;
  for (std::size_t n : n_grid) levels.push_back(std::max<std::size_t>(1, schedule(n)));
  const std::vector<std::size_t> first(ng, 1);
  GwCouplingReport rep{curve_from("max_normalized_gap", n_grid, levels, norm, reps),
                       curve_from("max_scaled_gap", n_grid, levels, absolute, reps),
                       curve_from("first_generation_gap", n_grid, first, gap1, reps),
                       curve_from("d1_nu_star", n_grid, first, d1, reps)};
  rep.normalized_max.baseline = summarize_replicates(base_norm);
  rep.absolute_max.baseline = summarize_replicates(base_abs);
  return rep;
}

PageRankResult pagerank(const Multigraph& g, const PageRankOptions& o) {
  if (!g.directed) throw std::invalid_argument("pagerank: graph must be directed");
  if (!(o.damping > 0.0 && o.damping < 1.0)) throw std::invalid_argument("pagerank: damping must lie in (0, 1)");
  if (!(o.tol > 0.0)) throw std::invalid_argument("pagerank: tolerance must be positive");
  std::vector<double> q = o.personalization;
  if (q.empty()) q.assign(g.n, 1.0);
  if (q.size() != g.n) throw std::invalid_argument("pagerank: personalization length differs from node count");
  const double q_total = std::accumulate(q.begin(), q.end(), 0.0);
  const auto out = g.degrees();
  const auto adj = in_neighbours(g);

  PageRankResult res;
  std::vector<double> r(q), next(g.n);
  for (std::size_t it = 1; it <= o.max_iterations; ++it) {
    double dangling = 0.0;
    if (o.dangling == DanglingPolicy::teleport)
      for (std::size_t j = 0; j < g.n; ++j)
        if (out[j] == 0) dangling += r[j];
    double residual = 0.0;
    for (std::size_t i = 0; i < g.n; ++i) {
      double s = 0.0;
      for (std::size_t j : adj[i]) s += r[j] / static_cast<double>(out[j]);
      double v = q[i] + o.damping * s;
      if (dangling != 0.0 && q_total != 0.0) v += o.damping * dangling * q[i] / q_total;
      next[i] = v;
      residual += std::abs(v - r[i]);
    }
    r.swap(next);
    res.iterations = it;
    res.residual = residual;
    if (residual <= o.tol) {
      res.ranks = std::move(r);
      return res;
    }
  }
  throw std::runtime_error("pagerank: no convergence within " + std::to_string(o.max_iterations) +
                           " iterations (residual " + std::to_string(res.residual) + ")");
}

BranchingSampler rank_node_sampler(const BiDegreeSequence& ds, double damping, double personalization) {
  if (ds.total_out() == 0) throw std::invalid_argument("rank: no edges");
  std::map<std::pair<std::size_t, std::size_t>, std::uint64_t> mass;  // (in, out) -> sum of out
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.out[i] > 0) mass[{ds.in[i], ds.out[i]}] += ds.out[i];
  std::vector<JointVector::Atom> atoms;
  std::vector<double> probs;
  const double L = static_cast<double>(ds.total_out());
  for (const auto& [key, w] : mass) {
    atoms.push_back({personalization, key.first, {damping / static_cast<double>(key.second)}});
    probs.push_back(static_cast<double>(w) / L);
  }
  return BranchingSampler::joint(TreeMode::wbt, std::move(atoms), std::move(probs));
}

RootSampler rank_root_sampler(const BiDegreeSequence& ds, double personalization) {
  std::map<std::size_t, std::uint64_t> counts;
  for (std::size_t d : ds.in) ++counts[d];
  std::vector<RootSampler::Atom> atoms;
  std::vector<double> probs;
  for (const auto& [d, c] : counts) {
    atoms.push_back({personalization, d});
    probs.push_back(static_cast<double>(c) / static_cast<double>(ds.size()));
  }
  return RootSampler::joint(std::move(atoms), std::move(probs));
}

RankReport rank_vs_wbt(const BiDegreeSequence& ds, const RankOptions& o, StreamKey key) {
  if (o.samples < 2) throw std::invalid_argument("rank: need at least two samples");
  const Multigraph g = config_model(ds, key.child(0));
  PageRankOptions po;
  po.damping = o.damping;
  po.personalization.assign(g.n, o.personalization);
  const PageRankResult pr = pagerank(g, po);

  RankReport rep;
  rep.iterations = pr.iterations;
  rep.dangling_nodes = static_cast<std::size_t>(std::count(ds.out.begin(), ds.out.end(), std::size_t{0}));
  RandomStream rs(key.child(1));
  rep.graph_ranks.resize(o.samples);
  for (auto& x : rep.graph_ranks) x = pr.ranks[rs.below(g.n)];

  const NodeSource src = make_source(rank_node_sampler(ds, o.damping, o.personalization),
                                     rank_root_sampler(ds, o.personalization));
  const GrowOptions go{o.depth, o.node_cap, false};
  std::vector<double> tree(o.samples), other(o.samples);
  parallel_for(o.samples, o.threads, [&](std::size_t i) {
    tree[i] = grow(src, key.child(2).child(i), go).r(o.depth);
    other[i] = grow(src, key.child(3).child(i), go).r(o.depth);
  });
  rep.d1 = d1_sorted_samples(rep.graph_ranks, tree);
  rep.ks = ks_distance(rep.graph_ranks, tree);
  rep.d1_baseline = d1_sorted_samples(other, tree);
  rep.ks_baseline = ks_distance(other, tree);
  rep.tree_ranks = std::move(tree);
  return rep;
}

DegreeInput read_degrees(std::istream& in) {
  DegreeSequence single;
  BiDegreeSequence pairs;
  int form = 0;  // 1 = single, 2 = pairs
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& why) {
    throw std::invalid_argument("degree file line " + std::to_string(lineno) + ": " + why);
  };
  auto parse = [&](std::string s) -> std::size_t {
    std::istringstream is(s);
    long long v = -1;
    std::string rest;
    if (!(is >> v) || (is >> rest) || v < 0) fail("expected a nonnegative integer, got '" + s + "'");
    return static_cast<std::size_t>(v);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto comma = line.find(',');
    const int this_form = comma == std::string::npos ? 1 : 2;
    if (form != 0 && form != this_form) fail("mixes single degrees with in,out pairs");
    form = this_form;
    if (form == 1) {
      single.degrees.push_back(parse(line));
    } else {
      pairs.in.push_back(parse(line.substr(0, comma)));
      pairs.out.push_back(parse(line.substr(comma + 1)));
    }
  }
  if (form == 2) return pairs;
  return single;
}

void write_degrees(std::ostream& out, const DegreeInput& ds) {
  if (const auto* s = std::get_if<DegreeSequence>(&ds)) {
    for (std::size_t d : s->degrees) out << d << '\n';
  } else {
    const auto& p = std::get<BiDegreeSequence>(ds);
    for (std::size_t i = 0; i < p.size(); ++i) out << p.in[i] << ',' << p.out[i] << '\n';
  }
}

void write_edge_list(std::ostream& out, const Multigraph& g) {
  out << "# nodes " << g.n << ' ' << (g.directed ? "directed" : "undirected") << '\n';
  for (const Edge& e : g.edges) out << e.from << ' ' << e.to << '\n';
}

Multigraph read_edge_list(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("edge list: missing header");
  std::istringstream hs(line);
  std::string hash, word, kind;
  Multigraph g;
  if (!(hs >> hash >> word >> g.n >> kind) || hash != "#" || word != "nodes" || (kind != "directed" && kind != "undirected"))
    throw std::invalid_argument("edge list: header must read '# nodes <n> directed|undirected'");
  g.directed = kind == "directed";
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream is(line);
    Edge e;
    if (!(is >> e.from >> e.to) || e.from >= g.n || e.to >= g.n)
      throw std::invalid_argument("edge list: bad edge line '" + line + "'");
    g.edges.push_back(e);
  }
  return g;
}

}  // namespace wbt
