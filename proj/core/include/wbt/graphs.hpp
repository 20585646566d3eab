#pragma once

// Configuration-model graphs and the branching trees that approximate their
// local structure: half-edge pairing, breadth-first exploration, size-biased
// degree laws, a coupled delayed Galton-Watson experiment and PageRank.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "wbt/convergence.hpp"
#include "wbt/distribution.hpp"
#include "wbt/measures.hpp"
#include "wbt/rng.hpp"

namespace wbt {

struct DegreeSequence {
  std::vector<std::size_t> degrees;
  std::size_t size() const noexcept { return degrees.size(); }
  std::uint64_t total() const noexcept;
};

struct BiDegreeSequence {
  std::vector<std::size_t> in;
  std::vector<std::size_t> out;
  std::size_t size() const noexcept { return in.size(); }
  std::uint64_t total_in() const noexcept;
  std::uint64_t total_out() const noexcept;
};

struct Edge {
  std::size_t from = 0;
  std::size_t to = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct Multigraph {
  std::size_t n = 0;
  std::vector<Edge> edges;
  bool directed = false;

  /// Undirected: self-loops count twice. Directed: out-degree.
  std::vector<std::size_t> degrees() const;
  std::vector<std::size_t> in_degrees() const;
  bool simple() const;
};

class SimpleGraphUnavailable : public std::runtime_error {
 public:
  explicit SimpleGraphUnavailable(std::size_t attempts);
};

struct PairingOptions {
  /// Repeat the pairing until the graph has no self-loop or multi-edge.
  bool simple = false;
  std::size_t max_attempts = 1000;
};

/// Uniform perfect matching of half-edges (out-stubs to in-stubs when directed).
Multigraph config_model(const DegreeSequence& ds, StreamKey key, const PairingOptions& options = {});
Multigraph config_model(const BiDegreeSequence& ds, StreamKey key, const PairingOptions& options = {});

struct ExplorationTrace {
  /// Number of nodes at distance j from the start, j = 0..max_depth.
  std::vector<std::size_t> generation_sizes;
  /// depleted[j]: some edge explored from generation j led to an already
  /// discovered node, so the neighbourhood stopped being a tree there.
  std::vector<bool> depleted;
  std::size_t explored = 0;
};

/// Directed graphs are explored against the edge direction (in-neighbours),
/// which is the dependence structure of a rank recursion.
ExplorationTrace bfs_exploration(const Multigraph& g, std::size_t start, std::size_t max_depth);

struct CoupledExploration {
  ExplorationTrace graph;
  std::vector<std::size_t> tree;
  /// Half-edges of all nodes discovered through generation j.
  std::vector<std::uint64_t> uncovered;
  /// Levels j whose cumulative uncovered half-edges stay within sqrt(L_n).
  std::size_t threshold_level = 0;
  /// First generation whose pairings left the tree; nullopt if none did.
  std::optional<std::size_t> first_collision;
  bool agrees_below_threshold() const;
};

/// Explores a lazily paired configuration model from `start` while growing the
/// delayed Galton-Watson tree on the same half-edge draws: each tree child
/// picks a uniform half-edge among all L_n, the graph uses that pick as long
/// as it is unpaired and belongs to an undiscovered node.
CoupledExploration explore_with_tree(const DegreeSequence& ds, std::size_t start, std::size_t depth, StreamKey key,
                                     std::size_t node_cap = kDefaultNodeCap);

struct SizeBiasedMeasures {
  DiscreteMeasure nu_star;
  DiscreteMeasure nu;
  std::uint64_t n = 0;
  std::uint64_t total = 0;  // L_n
  /// Exact numerators: nu_star({k}) = nu_star_counts[k] / n and
  /// nu({k}) = nu_counts[k] / L_n.
  std::map<std::size_t, std::uint64_t> nu_star_counts;
  std::map<std::size_t, std::uint64_t> nu_counts;
};

SizeBiasedMeasures size_biased(const DegreeSequence& ds);

/// nu_star = f and nu({k}) = E[D 1(D = k+1)] / E[D], from the law of D.
struct LimitMeasures {
  DiscreteMeasure nu_star;
  DiscreteMeasure nu;
};
LimitMeasures size_biased_limit(const Distribution& degree_law);

/// sum_k |F(k) - G(k)| for laws on the nonnegative integers.
double d1_integer(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

DegreeSequence sample_degrees(const Distribution& degree_law, std::size_t n, StreamKey key);
/// I.i.d. in- and out-degrees, then the smaller total is raised one unit at a
/// time at uniformly chosen nodes until the two totals agree.
BiDegreeSequence sample_bidegrees(const Distribution& in_law, const Distribution& out_law, std::size_t n,
                                  StreamKey key);

struct SizeBiasOptions {
  double moment_eps = 1.0;
  double delta_star = 0.4;
  double delta = 0.2;
  std::size_t reps = 20;
  unsigned threads = 1;
};

struct SizeBiasReport {
  Curve scaled_star;  // n^{delta_star} d1(nu_n*, nu*)
  Curve scaled_nu;    // n^{delta} d1(nu_n, nu)
};

SizeBiasReport sizebias_rate_experiment(const Distribution& degree_law, const std::vector<std::size_t>& n_grid,
                                        const SizeBiasOptions& options, StreamKey key);

struct GwCouplingOptions {
  std::size_t reps = 20;
  unsigned threads = 1;
  std::size_t node_cap = kDefaultNodeCap;
};

struct GwCouplingReport {
  /// max_j |Z^(n,j)/(m_n* m_n^{j-1}) - Z^(j)/(m* m^{j-1})|
  Curve normalized_max;
  /// max_j |Z^(n,j) - Z^(j)| / m^{j-1}
  Curve absolute_max;
  /// Per replication |Z^(n,1) - Z^(1)| and d1(nu_n*, nu*).
  Curve first_generation_gap;
  Curve first_generation_d1;
};

GwCouplingReport gw_coupling_experiment(const Distribution& degree_law, const std::vector<std::size_t>& n_grid,
                                        const Schedule& schedule, const GwCouplingOptions& options, StreamKey key);

enum class DanglingPolicy { teleport, drop };

struct PageRankOptions {
  double damping = 0.85;
  /// Per-node personalization q; empty means q_i = 1.
  std::vector<double> personalization;
  double tol = 1e-12;
  std::size_t max_iterations = 100000;
  DanglingPolicy dangling = DanglingPolicy::teleport;
};

struct PageRankResult {
  std::vector<double> ranks;
  std::size_t iterations = 0;
  double residual = 0.0;
};

/// Fixed point of R_i = q_i + c sum_{j -> i} R_j / out_j, where a node
/// without out-edges either spreads c R_j in proportion to q (teleport) or
/// loses it (drop). Throws std::runtime_error on non-convergence.
PageRankResult pagerank(const Multigraph& g, const PageRankOptions& options = {});

struct RankOptions {
  double damping = 0.85;
  double personalization = 1.0;
  std::size_t depth = 10;
  std::size_t samples = 1000;
  unsigned threads = 1;
  std::size_t node_cap = kDefaultNodeCap;
};

struct RankReport {
  std::vector<double> graph_ranks;  // ranks of uniformly chosen nodes
  std::vector<double> tree_ranks;   // R^(n,k) samples
  double d1 = 0.0;
  double d1_baseline = 0.0;
  double ks = 0.0;
  double ks_baseline = 0.0;
  std::size_t dangling_nodes = 0;
  std::size_t iterations = 0;
};

/// WBT laws implied by a bi-degree sequence: the node law puts mass
/// out_j / L_n on (q, in_j, c / out_j), the root law mass 1/n on (q, in_i).
BranchingSampler rank_node_sampler(const BiDegreeSequence& ds, double damping, double personalization);
RootSampler rank_root_sampler(const BiDegreeSequence& ds, double personalization);

RankReport rank_vs_wbt(const BiDegreeSequence& ds, const RankOptions& options, StreamKey key);

using DegreeInput = std::variant<DegreeSequence, BiDegreeSequence>;

/// One degree per line, or "in,out" per line. Blank lines and lines starting
/// with '#' are skipped; mixing the two forms is an error.
DegreeInput read_degrees(std::istream& in);
void write_degrees(std::ostream& out, const DegreeInput& ds);

/// "# nodes <n> directed|undirected" followed by one "u v" line per edge.
void write_edge_list(std::ostream& out, const Multigraph& g);
Multigraph read_edge_list(std::istream& in);

}  // namespace wbt
