#pragma once

// Probability measures and the Kantorovich-Rubinstein (Wasserstein-1) distance.

#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace wbt {

/// Finitely supported law on the real line.
class DiscreteMeasure {
 public:
  /// Point mass at zero.
  DiscreteMeasure() : support_{0.0}, mass_{1.0}, cumulative_{1.0} {}
  /// Validates: support strictly increasing, masses nonnegative, total mass
  /// one within 1e-12.
  DiscreteMeasure(std::vector<double> support, std::vector<double> mass);

  /// Sorts atoms, merges duplicates and normalizes nonnegative weights.
  static DiscreteMeasure make(std::vector<double> atoms, std::vector<double> weights);
  static DiscreteMeasure point(double x);
  /// Uniform weights on the given sample values.
  static DiscreteMeasure empirical(std::span<const double> values);

  std::span<const double> support() const noexcept { return support_; }
  std::span<const double> mass() const noexcept { return mass_; }
  std::size_t size() const noexcept { return support_.size(); }

  double cdf(double x) const;
  /// inf{x : F(x) >= u}; u in (0, 1].
  double quantile(double u) const;
  double mean() const;
  double mean_abs() const;
  bool integer_supported() const;

  friend bool operator==(const DiscreteMeasure&, const DiscreteMeasure&) = default;

 private:
  std::vector<double> support_;
  std::vector<double> mass_;
  std::vector<double> cumulative_;
};

/// n points in R^d, stored row-major.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure(std::size_t dim, std::vector<double> coords);
  static EmpiricalMeasure line(std::vector<double> values) { return EmpiricalMeasure(1, std::move(values)); }

  std::size_t size() const noexcept { return coords_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const double> point(std::size_t i) const { return {coords_.data() + i * dim_, dim_}; }
  std::span<const double> coords() const noexcept { return coords_; }

 private:
  std::size_t dim_;
  std::vector<double> coords_;
};

struct CouplingPlan {
  struct Pair {
    std::size_t x;
    std::size_t y;
    double weight;
  };
  std::vector<Pair> pairs;
  double cost = 0.0;
};

class ExactRegimeExceeded : public std::runtime_error {
 public:
  ExactRegimeExceeded(std::size_t n, std::size_t n_max);
};

inline constexpr std::size_t kDefaultAssignmentLimit = 256;

/// Integral of |F - G| over the union of the two supports.
double d1_discrete(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

/// Mean absolute difference of order statistics; equal sample sizes only.
double d1_empirical_1d(const EmpiricalMeasure& x, const EmpiricalMeasure& y);
double d1_sorted_samples(std::span<const double> x, std::span<const double> y);

/// Exact d1 with l1 ground cost between two uniform clouds of equal size,
/// through a minimum-cost perfect matching.
double d1_empirical_l1(const EmpiricalMeasure& x, const EmpiricalMeasure& y,
                       std::size_t n_max = kDefaultAssignmentLimit);
CouplingPlan optimal_plan(const EmpiricalMeasure& x, const EmpiricalMeasure& y,
                          std::size_t n_max = kDefaultAssignmentLimit);

/// (F^{-1}(u), G^{-1}(u)); u must lie strictly inside (0, 1).
std::pair<double, double> quantile_coupling(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double u);

/// Maps R^d -> R that are 1-Lipschitz for the l1 norm by construction.
class LipschitzTest {
 public:
  /// x -> <a, x> + b; requires max_i |a_i| <= 1.
  static LipschitzTest affine(std::vector<double> a, double b = 0.0);
  static LipschitzTest coordinate(std::size_t index);
  /// x -> ||x - p||_1.
  static LipschitzTest distance_to(std::vector<double> p);

  double operator()(std::span<const double> x) const;

 private:
  enum class Kind { affine, coordinate, distance };
  LipschitzTest(Kind k) : kind_(k) {}
  Kind kind_;
  std::vector<double> vec_;
  double offset_ = 0.0;
  std::size_t index_ = 0;
};

/// max over the test maps of |mean psi(x) - mean psi(y)|, a lower bound on d1.
double duality_lower_bound(const EmpiricalMeasure& x, const EmpiricalMeasure& y,
                           std::span<const LipschitzTest> tests);

/// Coordinate projections, sign vectors (d <= 10) and l1 distances to every
/// point of both clouds.
std::vector<LipschitzTest> standard_tests(const EmpiricalMeasure& x, const EmpiricalMeasure& y);

/// Two-sample Kolmogorov-Smirnov statistic sup |F_x - F_y|.
double ks_distance(std::span<const double> x, std::span<const double> y);

/// Finitely supported law on R^d (rows of `atoms`, row-major).
struct VectorLaw {
  std::size_t dim = 0;
  std::vector<double> atoms;
  std::vector<double> probs;
  std::size_t size() const { return probs.size(); }
};

/// Exact d1 with l1 ground cost between two finite vector laws (optimal
/// transport). Vectors of different dimension are padded with zeros.
double d1_vector_laws(const VectorLaw& a, const VectorLaw& b);

/// Truncation of R^infinity vectors: the smallest d with
/// E|C| * E[(N - d)^+] <= tol, together with that tail.
struct Truncation {
  std::size_t dim = 0;
  double tail = 0.0;
};
Truncation truncation_dimension(const DiscreteMeasure& offspring, double mean_abs_weight, double tol = 1e-8);

void to_json(nlohmann::json& j, const DiscreteMeasure& m);
void from_json(const nlohmann::json& j, DiscreteMeasure& m);
void to_json(nlohmann::json& j, const EmpiricalMeasure& m);
EmpiricalMeasure empirical_from_json(const nlohmann::json& j);

}  // namespace wbt
