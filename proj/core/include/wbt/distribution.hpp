#pragma once

// Scalar distribution primitives used to specify branching vectors.

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "wbt/measures.hpp"

namespace wbt {

struct PointMass {
  double value = 0.0;
  friend bool operator==(const PointMass&, const PointMass&) = default;
};

struct FiniteDiscrete {
  DiscreteMeasure law;
  friend bool operator==(const FiniteDiscrete&, const FiniteDiscrete&) = default;
};

struct UniformInterval {
  double low = 0.0;
  double high = 1.0;
  friend bool operator==(const UniformInterval&, const UniformInterval&) = default;
};

/// Geometric law on {start, start+1, ...}: P(X = start + k) = p (1-p)^k.
struct Geometric {
  double p = 0.5;
  std::int64_t start = 1;
  friend bool operator==(const Geometric&, const Geometric&) = default;
};

/// Poisson law, optionally conditioned on X <= max.
struct Poisson {
  double lambda = 1.0;
  std::optional<std::int64_t> max;
  friend bool operator==(const Poisson&, const Poisson&) = default;
};

class Distribution {
 public:
  using Variant = std::variant<PointMass, FiniteDiscrete, UniformInterval, Geometric, Poisson>;

  Distribution() : v_(PointMass{}) {}
  Distribution(PointMass d);
  Distribution(FiniteDiscrete d);
  Distribution(UniformInterval d);
  Distribution(Geometric d);
  Distribution(Poisson d);

  static Distribution point(double x) { return Distribution(PointMass{x}); }
  static Distribution discrete(std::vector<double> atoms, std::vector<double> weights);
  static Distribution uniform(double low, double high) { return Distribution(UniformInterval{low, high}); }

  const Variant& variant() const noexcept { return v_; }
  std::string kind() const;

  /// Left-continuous inverse CDF, inf{x : F(x) >= u}, for u in (0, 1).
  double quantile(double u) const;

  double mean() const;
  double mean_abs() const;
  /// E|X|^power, power >= 0. Series are summed until the remaining tail is
  /// below 1e-15 relative to the partial sum.
  double abs_moment(double power) const;
  /// E[(X - d)^+] for integer-valued laws.
  double excess_mean(double d) const;

  bool integer_valued() const;
  bool nonnegative() const;
  bool is_point() const { return std::holds_alternative<PointMass>(v_); }
  bool is_uniform() const { return std::holds_alternative<UniformInterval>(v_); }

  /// The law itself when it has finite support.
  std::optional<DiscreteMeasure> finite_support() const;
  /// Finite-support law equal to this one for bounded laws; for unbounded
  /// integer laws the mass above the cut-off (at most `tail`) is moved to the
  /// first atom beyond it. Not available for continuous laws.
  std::optional<DiscreteMeasure> discretized(double tail = 1e-16) const;

  friend bool operator==(const Distribution& a, const Distribution& b);

 private:
  Variant v_;
};

void to_json(nlohmann::json& j, const Distribution& d);
void from_json(const nlohmann::json& j, Distribution& d);

/// E|X - Y| when X, Y share one uniform through their quantile functions.
/// Exact for pairs of laws that are finite, integer-valued or point/uniform;
/// nullopt otherwise.
std::optional<double> comonotone_abs_gap(const Distribution& x, const Distribution& y);

/// E|X - Y| for independent X, Y when both are finite (or discretizable).
std::optional<double> independent_abs_gap(const Distribution& x, const Distribution& y);

}  // namespace wbt
