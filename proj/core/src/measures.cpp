#include "wbt/measures.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "wbt/assignment.hpp"

namespace wbt {

namespace {

double l1(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
  return s;
}

void check_pair(const EmpiricalMeasure& x, const EmpiricalMeasure& y) {
  if (x.size() != y.size())
    throw std::invalid_argument("d1: sample counts differ (" + std::to_string(x.size()) + " vs " +
                                std::to_string(y.size()) + ")");
  if (x.dim() != y.dim()) throw std::invalid_argument("d1: point dimensions differ");
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(std::vector<double> support, std::vector<double> mass)
    : support_(std::move(support)), mass_(std::move(mass)) {
  if (support_.empty()) throw std::invalid_argument("discrete measure: empty support");
  if (support_.size() != mass_.size()) throw std::invalid_argument("discrete measure: support/mass length mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < support_.size(); ++i) {
    if (!std::isfinite(support_[i])) throw std::invalid_argument("discrete measure: non-finite atom");
    if (i > 0 && !(support_[i - 1] < support_[i]))
      throw std::invalid_argument("discrete measure: support must be strictly increasing");
    if (!(mass_[i] >= 0.0)) throw std::invalid_argument("discrete measure: negative mass");
    total += mass_[i];
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("discrete measure: masses must sum to one");
  cumulative_.resize(mass_.size());
  std::partial_sum(mass_.begin(), mass_.end(), cumulative_.begin());
  cumulative_.back() = 1.0;
}

DiscreteMeasure DiscreteMeasure::make(std::vector<double> atoms, std::vector<double> weights) {
  if (atoms.size() != weights.size()) throw std::invalid_argument("discrete measure: atoms/weights length mismatch");
  std::vector<std::size_t> order(atoms.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return atoms[a] < atoms[b]; });
  std::vector<double> s, m;
  double total = 0.0;
  for (std::size_t i : order) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
      throw std::invalid_argument("discrete measure: weights must be finite and nonnegative");
    total += weights[i];
    if (!s.empty() && s.back() == atoms[i]) {
      m.back() += weights[i];
    } else {
      s.push_back(atoms[i]);
      m.push_back(weights[i]);
    }
  }
  if (!(total > 0.0)) throw std::invalid_argument("discrete measure: zero total weight");
  for (double& w : m) w /= total;
  // Renormalization can leave the sum a few ulps off one; absorb that in the
  // largest atom so the strict validation still holds.
  const double drift = 1.0 - std::accumulate(m.begin(), m.end(), 0.0);
  *std::max_element(m.begin(), m.end()) += drift;
  return DiscreteMeasure(std::move(s), std::move(m));
}

DiscreteMeasure DiscreteMeasure::point(double x) { return DiscreteMeasure({x}, {1.0}); }

DiscreteMeasure DiscreteMeasure::empirical(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("discrete measure: empty sample");
  std::vector<double> w(values.size(), 1.0);
  return make(std::vector<double>(values.begin(), values.end()), std::move(w));
}

double DiscreteMeasure::cdf(double x) const {
  const auto it = std::upper_bound(support_.begin(), support_.end(), x);
  if (it == support_.begin()) return 0.0;
  return cumulative_[static_cast<std::size_t>(it - support_.begin()) - 1];
}

double DiscreteMeasure::quantile(double u) const {
  if (!(u > 0.0 && u <= 1.0)) throw std::domain_error("quantile: level must lie in (0, 1]");
  const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
  const std::size_t i = it == cumulative_.end() ? cumulative_.size() - 1 : static_cast<std::size_t>(it - cumulative_.begin());
  return support_[i];
}

double DiscreteMeasure::mean() const {
  double s = 0.0;
  for (std::size_t i = 0; i < support_.size(); ++i) s += support_[i] * mass_[i];
  return s;
}

double DiscreteMeasure::mean_abs() const {
  double s = 0.0;
  for (std::size_t i = 0; i < support_.size(); ++i) s += std::abs(support_[i]) * mass_[i];
  return s;
}

bool DiscreteMeasure::integer_supported() const {
  return std::all_of(support_.begin(), support_.end(), [](double x) { return x == std::floor(x); });
}

EmpiricalMeasure::EmpiricalMeasure(std::size_t dim, std::vector<double> coords) : dim_(dim), coords_(std::move(coords)) {
  if (dim_ == 0) throw std::invalid_argument("empirical measure: dimension must be positive");
  if (coords_.empty()) throw std::invalid_argument("empirical measure: needs at least one point");
  if (coords_.size() % dim_ != 0) throw std::invalid_argument("empirical measure: ragged points");
  for (double c : coords_)
    if (!std::isfinite(c)) throw std::invalid_argument("empirical measure: non-finite coordinate");
}

ExactRegimeExceeded::ExactRegimeExceeded(std::size_t n, std::size_t n_max)
    : std::runtime_error("exact regime exceeded: " + std::to_string(n) + " points > limit " + std::to_string(n_max) +
                         "; subsample before calling") {}

double d1_discrete(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const auto a = mu.support();
  const auto b = nu.support();
  const auto pa = mu.mass();
  const auto pb = nu.mass();
  std::size_t i = 0, k = 0;
  double f = 0.0, g = 0.0, total = 0.0;
  double x = std::min(a[0], b[0]);
  while (i < a.size() || k < b.size()) {
    const double next = std::min(i < a.size() ? a[i] : INFINITY, k < b.size() ? b[k] : INFINITY);
    total += std::abs(f - g) * (next - x);
    while (i < a.size() && a[i] == next) f += pa[i++];
    while (k < b.size() && b[k] == next) g += pb[k++];
    x = next;
  }
  return total;
}

double d1_sorted_samples(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw std::invalid_argument("d1: sample counts differ (" + std::to_string(x.size()) + " vs " +
                                std::to_string(y.size()) + ")");
  if (x.empty()) throw std::invalid_argument("d1: empty samples");
  std::vector<double> a(x.begin(), x.end()), b(y.begin(), y.end());
  std::stable_sort(a.begin(), a.end());
  std::stable_sort(b.begin(), b.end());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

double d1_empirical_1d(const EmpiricalMeasure& x, const EmpiricalMeasure& y) {
  check_pair(x, y);
  if (x.dim() != 1) throw std::invalid_argument("d1_empirical_1d: points must be one-dimensional");
  return d1_sorted_samples(x.coords(), y.coords());
}

CouplingPlan optimal_plan(const EmpiricalMeasure& x, const EmpiricalMeasure& y, std::size_t n_max) {
  check_pair(x, y);
  const std::size_t n = x.size();
  if (n > n_max) throw ExactRegimeExceeded(n, n_max);
  CostMatrix cost(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) cost(r, c) = l1(x.point(r), y.point(c));
  const Assignment a = solve_assignment(cost);
  CouplingPlan plan;
  const double w = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) plan.pairs.push_back({r, a.column_of_row[r], w});
  plan.cost = a.total_cost / static_cast<double>(n);
  return plan;
}

double d1_empirical_l1(const EmpiricalMeasure& x, const EmpiricalMeasure& y, std::size_t n_max) {
  return optimal_plan(x, y, n_max).cost;
}

std::pair<double, double> quantile_coupling(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double u) {
  if (!(u > 0.0 && u < 1.0)) throw std::domain_error("quantile_coupling: u must lie strictly inside (0, 1)");
  return {mu.quantile(u), nu.quantile(u)};
}

LipschitzTest LipschitzTest::affine(std::vector<double> a, double b) {
  for (double c : a)
    if (!(std::abs(c) <= 1.0)) throw std::invalid_argument("affine test map: coefficients must satisfy |a_i| <= 1");
  LipschitzTest t(Kind::affine);
  t.vec_ = std::move(a);
  t.offset_ = b;
  return t;
}

LipschitzTest LipschitzTest::coordinate(std::size_t index) {
  LipschitzTest t(Kind::coordinate);
  t.index_ = index;
  return t;
}

LipschitzTest LipschitzTest::distance_to(std::vector<double> p) {
  LipschitzTest t(Kind::distance);
  t.vec_ = std::move(p);
  return t;
}

double LipschitzTest::operator()(std::span<const double> x) const {
  switch (kind_) {
    case Kind::affine: {
      if (x.size() != vec_.size()) throw std::invalid_argument("affine test map: dimension mismatch");
      double s = offset_;
      for (std::size_t k = 0; k < x.size(); ++k) s += vec_[k] * x[k];
      return s;
    }
    case Kind::coordinate:
      if (index_ >= x.size()) throw std::invalid_argument("coordinate test map: index out of range");
      return x[index_];
    case Kind::distance:
      if (x.size() != vec_.size()) throw std::invalid_argument("distance test map: dimension mismatch");
      return l1(x, vec_);
  }
  return 0.0;
}

double duality_lower_bound(const EmpiricalMeasure& x, const EmpiricalMeasure& y, std::span<const LipschitzTest> tests) {
  if (tests.empty()) throw std::invalid_argument("duality_lower_bound: no test maps given");
  if (x.dim() != y.dim()) throw std::invalid_argument("duality_lower_bound: point dimensions differ");
  double best = 0.0;
  for (const auto& psi : tests) {
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sx += psi(x.point(i));
    for (std::size_t i = 0; i < y.size(); ++i) sy += psi(y.point(i));
    best = std::max(best, std::abs(sx / static_cast<double>(x.size()) - sy / static_cast<double>(y.size())));
  }
  return best;
}

std::vector<LipschitzTest> standard_tests(const EmpiricalMeasure& x, const EmpiricalMeasure& y) {
  const std::size_t d = x.dim();
  std::vector<LipschitzTest> out;
  for (std::size_t k = 0; k < d; ++k) out.push_back(LipschitzTest::coordinate(k));
  if (d <= 10) {
    // Sign vectors up to a global sign flip.
    for (std::size_t mask = 0; mask < (std::size_t{1} << (d - 1)); ++mask) {
      std::vector<double> a(d);
      for (std::size_t k = 0; k < d; ++k) a[k] = (k + 1 < d && (mask >> k) & 1U) ? -1.0 : 1.0;
      out.push_back(LipschitzTest::affine(std::move(a)));
    }
  }
  for (const auto* cloud : {&x, &y})
    for (std::size_t i = 0; i < cloud->size(); ++i) {
      const auto p = cloud->point(i);
      out.push_back(LipschitzTest::distance_to({p.begin(), p.end()}));
    }
  return out;
}

double ks_distance(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw std::invalid_argument("ks_distance: empty sample");
  std::vector<double> a(x.begin(), x.end()), b(y.begin(), y.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, k = 0;
  double best = 0.0;
  while (i < a.size() || k < b.size()) {
    const double next = std::min(i < a.size() ? a[i] : INFINITY, k < b.size() ? b[k] : INFINITY);
    while (i < a.size() && a[i] == next) ++i;
    while (k < b.size() && b[k] == next) ++k;
    best = std::max(best, std::abs(static_cast<double>(i) / na - static_cast<double>(k) / nb));
  }
  return best;
}

double d1_vector_laws(const VectorLaw& a, const VectorLaw& b) {
  if (a.size() == 0 || b.size() == 0) throw std::invalid_argument("d1_vector_laws: empty law");
  const std::size_t dim = std::max(a.dim, b.dim);
  auto coord = [](const VectorLaw& law, std::size_t atom, std::size_t k) {
    return k < law.dim ? law.atoms[atom * law.dim + k] : 0.0;
  };
  CostMatrix cost(a.size(), b.size());
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t c = 0; c < b.size(); ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) s += std::abs(coord(a, r, k) - coord(b, c, k));
      cost(r, c) = s;
    }
  return solve_transport(a.probs, b.probs, cost).total_cost;
}

Truncation truncation_dimension(const DiscreteMeasure& offspring, double mean_abs_weight, double tol) {
  if (!offspring.integer_supported() || offspring.support()[0] < 0.0)
    throw std::invalid_argument("truncation_dimension: offspring law must live on nonnegative integers");
  const auto s = offspring.support();
  const auto p = offspring.mass();
  auto tail_at = [&](double d) {
    double t = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) t += std::max(0.0, s[i] - d) * p[i];
    return mean_abs_weight * t;
  };
  const auto top = static_cast<std::size_t>(s.back());
  for (std::size_t d = 0; d < top; ++d) {
    const double t = tail_at(static_cast<double>(d));
    if (t <= tol) return {d, t};
  }
  return {top, 0.0};
}

void to_json(nlohmann::json& j, const DiscreteMeasure& m) {
  j = nlohmann::json{{"atoms", std::vector<double>(m.support().begin(), m.support().end())},
                     {"masses", std::vector<double>(m.mass().begin(), m.mass().end())}};
}

void from_json(const nlohmann::json& j, DiscreteMeasure& m) {
  m = DiscreteMeasure::make(j.at("atoms").get<std::vector<double>>(), j.at("masses").get<std::vector<double>>());
}

void to_json(nlohmann::json& j, const EmpiricalMeasure& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto p = m.point(i);
    rows.push_back(std::vector<double>(p.begin(), p.end()));
  }
  j = nlohmann::json{{"dim", m.dim()}, {"points", rows}};
}

EmpiricalMeasure empirical_from_json(const nlohmann::json& j) {
  const auto& rows = j.at("points");
  if (!rows.is_array() || rows.empty()) throw std::invalid_argument("empirical measure: 'points' must be a non-empty list");
  std::size_t dim = 0;
  std::vector<double> coords;
  for (const auto& row : rows) {
    const auto p = row.is_array() ? row.get<std::vector<double>>() : std::vector<double>{row.get<double>()};
    if (dim == 0) dim = p.size();
    if (p.size() != dim) throw std::invalid_argument("empirical measure: points differ in dimension");
    coords.insert(coords.end(), p.begin(), p.end());
  }
  return EmpiricalMeasure(dim, std::move(coords));
}

}  // namespace wbt
