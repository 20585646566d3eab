#pragma once

// Sequence experiments: a family of branching laws indexed by n approaching a
// limit law, and the distance curves of W, R and the normalized W along n.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wbt/branching.hpp"
#include "wbt/measures.hpp"
#include "wbt/stats.hpp"

namespace wbt {

struct SequenceElement {
  BranchingSampler sampler;
  std::optional<RootSampler> root;
};

struct SamplerSequence {
  std::function<SequenceElement(std::size_t)> element;
  SequenceElement limit;
  /// Known d1 between the n-th and the limit vector laws (node law, and root
  /// law for delayed trees). Optional.
  std::function<double(std::size_t)> node_distance;
  std::function<double(std::size_t)> root_distance;

  TreeMode mode() const { return limit.sampler.mode(); }
  /// Every element equal to the limit.
  static SamplerSequence constant(SequenceElement limit);
};

class Schedule {
 public:
  enum class Kind { constant, logarithmic, loglog, linear, power };

  static Schedule constant(std::size_t level);
  /// floor(a ln n) + b
  static Schedule logarithmic(double a = 1.0, std::size_t b = 0);
  /// floor(a ln ln n) + b
  static Schedule loglog(double a = 1.0, std::size_t b = 1);
  /// floor(a n) + b
  static Schedule linear(double a = 1.0, std::size_t b = 0);
  /// floor(a n^p) + b
  static Schedule power(double a, double p, std::size_t b = 0);

  std::size_t operator()(std::size_t n) const;
  Kind kind() const noexcept { return kind_; }
  std::string describe() const;

 private:
  Schedule(Kind k, double a, double p, std::size_t b) : kind_(k), a_(a), p_(p), b_(b) {}
  Kind kind_;
  double a_;
  double p_;
  std::size_t b_;
};

struct CurvePoint {
  std::size_t n = 0;
  std::size_t level = 0;
  std::vector<double> replicates;
  ReplicatedStatistic value;
};

struct Curve {
  std::string statistic;
  std::vector<CurvePoint> points;
  /// Same-law reference at the largest n: the curve's noise floor.
  ReplicatedStatistic baseline;
  TrendVerdict trend() const;
};

enum class Quantity { w, r };

struct FixedLevelOptions {
  std::size_t samples = 1000;
  std::size_t reps = 20;
  Quantity quantity = Quantity::w;
  /// Grow the n-th and the limit samples on the same node randomness instead
  /// of independently.
  bool common_random_numbers = false;
  unsigned threads = 1;
  std::size_t node_cap = kDefaultNodeCap;
};

/// d1 between samples of W^(n,j) (or R^(n,j)) and of the limit, per n, with a
/// baseline d1 between two independent limit samples.
Curve fixed_level_convergence(const SamplerSequence& seq, std::size_t level, const std::vector<std::size_t>& n_grid,
                              const FixedLevelOptions& options, StreamKey key);

struct MartingaleOptions {
  std::size_t samples = 500;
  std::size_t reps = 20;
  std::size_t proxy_level = 14;
  /// Set when E[W] = 1 is known; enables the d1 curves.
  bool mean_one = false;
  unsigned threads = 1;
  std::size_t node_cap = kDefaultNodeCap;
};

struct MartingaleReport {
  std::size_t proxy_level = 0;
  Curve ks_rho_n;  // W^(n,j_n)/rho_n^{j_n} against the proxy
  Curve ks_rho;    // W^(n,j_n)/rho^{j_n} against the proxy
  std::optional<Curve> d1_rho_n;
  std::optional<Curve> d1_rho;
  /// The same statistics for the limit law at level j_n.
  Curve ks_baseline;
  std::optional<Curve> d1_baseline;
  /// Per n: |(rho/rho_n)^{j_n} - 1|, the exact relative gap between the two
  /// normalizations, and its power-bound majorant.
  std::vector<double> normalization_gap;
  std::vector<double> normalization_bound;
};

/// The baselines run the same pipeline with the limit law in place of the
/// n-th law. Requires Q = 1 and nonnegative weights.
MartingaleReport scaled_martingale_convergence(const SamplerSequence& seq, const Schedule& schedule,
                                               const std::vector<std::size_t>& n_grid,
                                               const MartingaleOptions& options, StreamKey key);

struct RLimitOptions {
  std::size_t samples = 1000;
  std::size_t reps = 20;
  double eps = 1e-4;
  unsigned threads = 1;
  std::size_t node_cap = kDefaultNodeCap;
};

struct RLimitReport {
  Curve d1;                        // R^(n,k_n) against endogenous limit samples
  std::vector<double> tail_slack;  // analytic bound on E|R - R^(k_n)| of the limit
  std::vector<MeanEstimate> mean_r;
  std::optional<double> limit_mean;  // E[Q]/(1 - rho) when it applies
};

RLimitReport r_limit_convergence(const SamplerSequence& seq, const Schedule& schedule,
                                 const std::vector<std::size_t>& n_grid, const RLimitOptions& options, StreamKey key);

/// Finite joint law of a WBT node vector (Q, N, C).
VectorLaw node_law(const BranchingSampler& wbt_sampler);
/// Law of (Q, C 1(N >= 1), C 1(N >= 2), ...) for a WBT sampler, or of
/// (Q, B_1, B_2, ...) for a WBP sampler, when the vector law is finite.
VectorLaw weight_vector_law(const BranchingSampler& sampler);

struct LemmaRow {
  std::size_t n = 0;
  double d1_nu = 0.0;
  double abs_cq_gap = 0.0;  // |E|C_n Q_n| - E|CQ||
  double abs_nc_gap = 0.0;  // |E[|C_n| N_n] - E[|C| N]|
  double d1_mu = 0.0;
};

struct LemmaReport {
  std::vector<LemmaRow> rows;
  bool hypotheses_vanish = false;
  bool conclusion_vanishes = false;
};

/// Exact evaluation of the hypotheses and conclusion of the WBT moment lemma
/// for finite laws. Vanishing is judged by the trend rule against zero.
LemmaReport lemma_condition_check(const SamplerSequence& seq, const std::vector<std::size_t>& n_grid);

struct PowerBounds {
  double lhs1 = 0.0;  // (x v 1)^j
  double rhs1 = 0.0;  // e^{j (x-1)^+}
  double lhs2 = 0.0;  // |x^j - 1|
  double rhs2 = 0.0;  // j |x-1| e^{(j-1)(x-1)^+}
};

PowerBounds power_bounds(double x, std::size_t j);

struct PremiseCheck {
  bool holds = true;
  std::vector<double> products;  // j_n * d1 per n
  std::string message;
};

/// Whether j_n * d1(mu_n, mu) (and, for delayed trees, the root distance)
/// vanishes along the grid under the trend rule. Uses declared distances, or
/// the quantile-coupling constant, which bounds d1 from above.
PremiseCheck schedule_premise(const SamplerSequence& seq, const Schedule& schedule,
                              const std::vector<std::size_t>& n_grid);

}  // namespace wbt
