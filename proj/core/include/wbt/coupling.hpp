#pragma once

// Two branching laws grown on shared node randomness, and certification of
// the expectation bounds on |W_hat^(j) - W^(j)| under any such coupling.
//
// The "base" side carries the unhatted law (rho, E|Q|, ...), the
// "alternative" side the hatted one.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wbt/branching.hpp"

namespace wbt {

enum class CouplingKind { identity, independent, quantile, table };

std::string to_string(CouplingKind k);
CouplingKind coupling_kind_from_string(const std::string& s);

/// Explicit joint law of whole branching vectors: entry i pairs base[i] with
/// alternative[i] and has probability probs[i].
struct CouplingTable {
  std::vector<JointVector::Atom> base;
  std::vector<JointVector::Atom> alternative;
  std::vector<double> probs;
};

struct RootCouplingTable {
  std::vector<RootSampler::Atom> base;
  std::vector<RootSampler::Atom> alternative;
  std::vector<double> probs;
};

class CoupledSampler {
 public:
  static CoupledSampler identity(BranchingSampler sampler, std::optional<RootSampler> root = std::nullopt);
  /// Base and alternative vectors drawn from disjoint streams.
  static CoupledSampler independent(BranchingSampler base, BranchingSampler alternative,
                                    std::optional<RootSampler> base_root = std::nullopt,
                                    std::optional<RootSampler> alternative_root = std::nullopt);
  /// Both sides read the same uniforms, so every scalar component is paired
  /// through its quantile function (the optimal coupling per component).
  static CoupledSampler quantile(BranchingSampler base, BranchingSampler alternative,
                                 std::optional<RootSampler> base_root = std::nullopt,
                                 std::optional<RootSampler> alternative_root = std::nullopt);
  static CoupledSampler table(TreeMode mode, const CouplingTable& nodes,
                              const std::optional<RootCouplingTable>& roots = std::nullopt);

  TreeMode mode() const noexcept { return base_.mode(); }
  CouplingKind kind() const noexcept { return kind_; }
  const BranchingSampler& base() const noexcept { return base_; }
  const BranchingSampler& alternative() const noexcept { return alternative_; }
  const std::optional<RootSampler>& base_root() const noexcept { return base_root_; }
  const std::optional<RootSampler>& alternative_root() const noexcept { return alternative_root_; }

  NodeSource base_source() const;
  NodeSource alternative_source() const;

  /// One joint node draw; `root` selects the root coupling.
  void draw_pair(const NodeUniforms& u, bool root, BranchingDraw& base, BranchingDraw& alternative) const;

 private:
  CoupledSampler(CouplingKind kind, BranchingSampler base, BranchingSampler alternative,
                 std::optional<RootSampler> base_root, std::optional<RootSampler> alternative_root);
  CouplingKind kind_;
  BranchingSampler base_;
  BranchingSampler alternative_;
  std::optional<RootSampler> base_root_;
  std::optional<RootSampler> alternative_root_;
};

std::pair<TreeRealization, TreeRealization> grow_coupled(const CoupledSampler& cs, StreamKey root_key,
                                                         const GrowOptions& options);

/// Constants entering the bounds. WBP uses rho, rho_hat, mean_abs_q and e.
/// WBT additionally uses the offspring means (node and root laws),
/// mean_abs_cq, e_star (root coupling) and e_wbt (node coupling).
struct CouplingConstants {
  TreeMode mode = TreeMode::wbp;
  double rho = 0.0;
  double rho_hat = 0.0;
  double mean_abs_q = 0.0;
  double e = 0.0;
  double e_se = 0.0;
  double mean_offspring = 0.0;
  double mean_offspring_hat = 0.0;
  double root_mean_offspring = 0.0;
  double root_mean_offspring_hat = 0.0;
  double mean_abs_cq = 0.0;
  double e_star = 0.0;
  double e_star_se = 0.0;
  double e_wbt = 0.0;
  double e_wbt_se = 0.0;
  bool exact = true;
};

/// Exact coupling constants by summation over the joint law, when every
/// component involved is finite, integer-valued or uniform; nullopt otherwise.
std::optional<CouplingConstants> exact_constants(const CoupledSampler& cs);
/// Coupling distances estimated from `draws` joint draws; moments analytic.
CouplingConstants estimate_constants(const CoupledSampler& cs, std::size_t draws, StreamKey key);
/// exact_constants when available, else estimate_constants.
CouplingConstants coupling_constants(const CoupledSampler& cs, std::size_t draws, StreamKey key);

struct GapEstimate {
  double mean = 0.0;
  double se = 0.0;
};

/// E|W_hat^(j) - W^(j)| for j = 0..depth from `reps` coupled replications.
std::vector<GapEstimate> gap_profile(const CoupledSampler& cs, std::size_t depth, std::size_t reps, StreamKey key,
                                     unsigned threads = 1, std::size_t node_cap = kDefaultNodeCap);
GapEstimate mean_abs_gap(const CoupledSampler& cs, std::size_t j, std::size_t reps, StreamKey key,
                         unsigned threads = 1);

/// Coupling bound for weighted branching processes.
double prop1_bound(const CouplingConstants& cc, std::size_t j);
/// Multiplier of e in prop1_bound.
double prop1_coefficient(const CouplingConstants& cc, std::size_t j);

enum class TailVariant { statement, proof };

/// Coupling bound for weighted branching trees. The last term multiplies
/// rho_hat^{j-1} e_star by E|Q| (statement) or by E|CQ| (proof).
double prop2_bound(const CouplingConstants& cc, std::size_t j, TailVariant variant);

struct CertificationRow {
  std::size_t j = 0;
  double gap = 0.0;
  double gap_se = 0.0;
  double bound_statement = 0.0;
  double bound_proof = 0.0;
  double bound_se = 0.0;
  bool pass = false;
};

struct CertificationReport {
  CouplingConstants constants;
  std::vector<CertificationRow> rows;
  bool rho_gap_ok = true;  // |rho_hat - rho| <= e (WBP), within 3 SE when estimated
  bool all_pass() const;
};

struct CertifyOptions {
  std::size_t j_min = 1;
  std::size_t j_max = 6;
  std::size_t reps = 100000;
  std::size_t constant_draws = 200000;
  unsigned threads = 1;
  std::size_t node_cap = kDefaultNodeCap;
};

/// Each row passes iff gap <= max(bound variants) + 3 sqrt(gap_se^2 + bound_se^2).
CertificationReport certify(const CoupledSampler& cs, const CertifyOptions& options, StreamKey key);

}  // namespace wbt
