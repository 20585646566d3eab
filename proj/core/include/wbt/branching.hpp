#pragma once

// Weighted branching processes (WBP) and weighted branching trees (WBT).
//
// WBP: a node draws (Q, N, C_1..C_N) and C_k becomes the edge weight of its
// k-th child. WBT: every node draws its own (Q, N, C); a non-root node's path
// weight is its own C times its parent's path weight and the root's C is
// never used. A WBT may have a delayed root whose (Q, N) follows a separate
// law.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "wbt/distribution.hpp"
#include "wbt/rng.hpp"

namespace wbt {

enum class TreeMode { wbp, wbt };

std::string to_string(TreeMode m);
TreeMode tree_mode_from_string(const std::string& s);

/// One realized branching vector. In WBP mode `weights` holds one entry per
/// child; in WBT mode it holds the node's own weight.
struct BranchingDraw {
  double mark = 0.0;
  std::size_t offspring = 0;
  std::vector<double> weights;
  double own_weight() const { return weights.empty() ? 0.0 : weights.front(); }
};

/// rho = E[sum_{i<=N} |C_i|] (WBP) or E[N |C|] (WBT); mean_abs_cq = E|CQ| is
/// only meaningful for WBT samplers. Standard errors are zero for analytic
/// values.
struct Moments {
  double rho = 0.0;
  double mean_abs_q = 0.0;
  double mean_offspring = 0.0;
  double mean_abs_cq = 0.0;
  double rho_se = 0.0;
  double mean_abs_q_se = 0.0;
  double mean_offspring_se = 0.0;
  double mean_abs_cq_se = 0.0;
  bool estimated = false;
};

class MissingMoments : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using DrawFunction = std::function<void(const NodeUniforms&, BranchingDraw&)>;

/// Mark, offspring count and weights drawn independently. Weights are i.i.d.
/// given N; their law may depend on N through a lookup table.
struct IndependentVector {
  Distribution mark;
  Distribution offspring;
  Distribution weight;
  std::map<std::size_t, Distribution> weight_given_offspring;
  const Distribution& weight_for(std::size_t n) const;
};

/// A finite list of whole branching vectors with probabilities.
struct JointVector {
  struct Atom {
    double mark = 0.0;
    std::size_t offspring = 0;
    std::vector<double> weights;
    friend bool operator==(const Atom&, const Atom&) = default;
  };
  std::vector<Atom> atoms;
  std::vector<double> probs;
  std::vector<double> cumulative;
  std::size_t pick(double u) const;
};

struct CustomVector {
  DrawFunction draw;
};

// Uniform positions consumed by the built-in samplers: 0 = mark (or the joint
// atom), 1 = offspring count, 2 + i = weight i. Feeding two samplers the same
// NodeUniforms therefore couples them component-wise through quantiles.
inline constexpr std::uint64_t kMarkSlot = 0;
inline constexpr std::uint64_t kOffspringSlot = 1;
inline constexpr std::uint64_t kWeightSlot = 2;

class BranchingSampler {
 public:
  using Structure = std::variant<IndependentVector, JointVector, CustomVector>;

  static BranchingSampler independent(TreeMode mode, Distribution mark, Distribution offspring, Distribution weight,
                                      std::map<std::size_t, Distribution> weight_given_offspring = {});
  static BranchingSampler joint(TreeMode mode, std::vector<JointVector::Atom> atoms, std::vector<double> probs);
  /// WBP: N = weights.size(); WBT: weights must hold the single own weight and
  /// `offspring` gives N.
  static BranchingSampler deterministic_wbp(double mark, std::vector<double> weights);
  static BranchingSampler deterministic_wbt(double mark, std::size_t offspring, double weight);
  static BranchingSampler custom(TreeMode mode, DrawFunction draw, std::optional<Moments> declared,
                                 bool nonnegative_weights);

  TreeMode mode() const noexcept { return mode_; }
  const Structure& structure() const noexcept { return structure_; }

  void draw(const NodeUniforms& u, BranchingDraw& out) const;
  DrawFunction draw_function() const;

  /// Analytic moments, or the declared ones; nullopt when neither exists.
  std::optional<Moments> analytic_moments() const;
  BranchingSampler with_declared_moments(Moments m) const;
  bool nonnegative_weights() const noexcept { return nonnegative_; }

 private:
  BranchingSampler(TreeMode mode, Structure s) : mode_(mode), structure_(std::move(s)) {}
  TreeMode mode_;
  Structure structure_;
  std::optional<Moments> declared_;
  bool nonnegative_ = true;
};

/// Law of the root's (Q, N) in a delayed tree.
class RootSampler {
 public:
  struct Atom {
    double mark = 0.0;
    std::size_t offspring = 0;
    friend bool operator==(const Atom&, const Atom&) = default;
  };
  struct Independent {
    Distribution mark;
    Distribution offspring;
  };
  struct Joint {
    std::vector<Atom> atoms;
    std::vector<double> probs;
    std::vector<double> cumulative;
  };
  using Structure = std::variant<Independent, Joint>;

  static RootSampler independent(Distribution mark, Distribution offspring);
  static RootSampler joint(std::vector<Atom> atoms, std::vector<double> probs);

  void draw(const NodeUniforms& u, BranchingDraw& out) const;
  DrawFunction draw_function() const;
  double mean_offspring() const;
  double mean_abs_q() const;
  const Structure& structure() const noexcept { return structure_; }

 private:
  explicit RootSampler(Structure s) : structure_(std::move(s)) {}
  Structure structure_;
};

/// Moments from analytic_moments(); throws MissingMoments naming the
/// accessors that are unavailable.
Moments moments(const BranchingSampler& sampler);
/// Monte Carlo estimates with standard errors.
Moments estimate_moments(const BranchingSampler& sampler, std::size_t draws, StreamKey key);

/// Everything needed to grow one tree: node law, optional root law, mode.
struct NodeSource {
  TreeMode mode = TreeMode::wbp;
  DrawFunction node;
  DrawFunction root;  // empty: the root uses `node`
};

NodeSource make_source(const BranchingSampler& sampler, const std::optional<RootSampler>& root = std::nullopt);

/// Path from the root: entries are 1-based child ordinals; empty = root.
struct NodeIndex {
  std::vector<std::uint32_t> path;
  std::size_t length() const { return path.size(); }
  NodeIndex truncate(std::size_t n) const;
  friend bool operator==(const NodeIndex&, const NodeIndex&) = default;
};

struct TreeNode {
  StreamKey key;
  std::uint32_t parent = 0;  // index into the previous generation
  std::uint32_t ordinal = 0;  // 1-based position among the parent's children
  double weight = 1.0;       // path weight Pi
  double mark = 0.0;         // Q
  std::uint32_t offspring = 0;
};

class ExplosionError : public std::runtime_error {
 public:
  ExplosionError(std::size_t generation, std::size_t cap);
  std::size_t generation() const noexcept { return generation_; }

 private:
  std::size_t generation_;
};

inline constexpr std::size_t kDefaultNodeCap = 10'000'000;

struct GrowOptions {
  std::size_t depth = 0;
  std::size_t node_cap = kDefaultNodeCap;
  bool retain = false;  // keep every generation's nodes
};

class TreeRealization {
 public:
  std::size_t depth() const noexcept { return depth_; }
  std::size_t generation_size(std::size_t j) const;
  std::size_t total_nodes() const;

  /// W^(j) = sum over generation j of Q_i Pi_i.
  double w(std::size_t j) const;
  /// R^(k) = sum_{j<=k} W^(j).
  double r(std::size_t k) const;
  /// Homogeneous W^(j): 1 at j = 0, else sum of Pi_i. Throws if a negative
  /// weight occurred at or above level j.
  double homogeneous(std::size_t j) const;

  bool retained() const noexcept { return !generations_.empty(); }
  std::span<const TreeNode> generation(std::size_t j) const;
  NodeIndex index_of(std::size_t level, std::size_t position) const;

 private:
  friend TreeRealization grow(const NodeSource&, StreamKey, const GrowOptions&);
  void check_level(std::size_t j) const;
  std::size_t depth_ = 0;
  std::vector<double> w_;
  std::vector<double> pi_sum_;
  std::vector<std::size_t> counts_;
  std::size_t first_negative_ = SIZE_MAX;
  std::vector<std::vector<TreeNode>> generations_;
};

TreeRealization grow(const NodeSource& source, StreamKey root_key, const GrowOptions& options);
TreeRealization grow(const BranchingSampler& sampler, const std::optional<RootSampler>& root, StreamKey root_key,
                     const GrowOptions& options);

double w_process(const TreeRealization& tree, std::size_t j);
double r_process(const TreeRealization& tree, std::size_t k);
double homogeneous_w(const TreeRealization& tree, std::size_t j);
double martingale_normalize(double w, double rho, std::size_t j);

struct EndogenousSample {
  double value = 0.0;
  std::size_t levels = 0;
  double tail_bound = 0.0;
};

/// Analytic bound on E|R - R^(k)|: WBP E|Q| rho^{k+1}/(1-rho); WBT
/// E[N_root] E|CQ| rho^k/(1-rho). Throws when rho >= 1.
double endogenous_tail(const Moments& m, TreeMode mode, double root_mean_offspring, std::size_t k);

/// Smallest k whose tail bound is at most eps.
std::size_t endogenous_levels(const Moments& m, TreeMode mode, double root_mean_offspring, double eps);

EndogenousSample endogenous_r_sample(const BranchingSampler& sampler, const std::optional<RootSampler>& root,
                                     double eps, StreamKey key);

}  // namespace wbt
