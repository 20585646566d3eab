#include "wbt/distribution.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wbt {

namespace {

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

constexpr double kSeriesTail = 1e-17;

// Iterates the pmf of an unbounded integer law, calling visit(k, pmf) until
// the remaining mass drops below kSeriesTail (and the running term of the
// caller's sum has stopped growing, enforced by a hard past-the-mean margin).
template <class Visit>
void geometric_series(const Geometric& g, Visit&& visit) {
  const double q = 1.0 - g.p;
  double pmf = g.p, rest = 1.0;
  for (std::int64_t k = 0;; ++k) {
    visit(static_cast<double>(g.start + k), pmf);
    rest -= pmf;
    if (q == 0.0 || (rest < kSeriesTail && pmf < kSeriesTail)) break;
    pmf *= q;
    if (k > 200000) break;
  }
}

double poisson_normalizer(const Poisson& p) {
  if (!p.max) return 1.0;
  double term = std::exp(-p.lambda), cum = term;
  for (std::int64_t k = 1; k <= *p.max; ++k) {
    term *= p.lambda / static_cast<double>(k);
    cum += term;
  }
  return cum;
}

template <class Visit>
void poisson_series(const Poisson& p, Visit&& visit) {
  const double z = poisson_normalizer(p);
  double term = std::exp(-p.lambda), cum = 0.0;
  const auto cutoff = static_cast<std::int64_t>(p.lambda + 60.0 * std::sqrt(p.lambda) + 60.0);
  for (std::int64_t k = 0;; ++k) {
    if (p.max && k > *p.max) break;
    visit(static_cast<double>(k), term / z);
    cum += term / z;
    if (!p.max && k > p.lambda && 1.0 - cum < kSeriesTail) break;
    if (k > cutoff) break;
    term *= p.lambda / static_cast<double>(k + 1);
    if (term == 0.0 && static_cast<double>(k) >= p.lambda) break;
  }
}

// E|a + b U| for U uniform on (0, 1).
double abs_linear_mean(double a, double b) {
  if (b == 0.0) return std::abs(a);
  const double r = -a / b;
  if (r <= 0.0 || r >= 1.0) return std::abs(a + 0.5 * b);
  return (a * a + (a + b) * (a + b)) / (2.0 * std::abs(b));
}

// Point masses and uniform laws written as low + width * U.
std::optional<std::pair<double, double>> affine_form(const Distribution& d) {
  if (const auto* p = std::get_if<PointMass>(&d.variant())) return std::pair{p->value, 0.0};
  if (const auto* u = std::get_if<UniformInterval>(&d.variant())) return std::pair{u->low, u->high - u->low};
  return std::nullopt;
}

}  // namespace

Distribution::Distribution(PointMass d) : v_(d) {
  if (!std::isfinite(d.value)) throw std::invalid_argument("point mass: value must be finite");
}

Distribution::Distribution(FiniteDiscrete d) : v_(std::move(d)) {}

Distribution::Distribution(UniformInterval d) : v_(d) {
  if (!std::isfinite(d.low) || !std::isfinite(d.high) || d.low > d.high)
    throw std::invalid_argument("uniform: need finite low <= high");
}

Distribution::Distribution(Geometric d) : v_(d) {
  if (!(d.p > 0.0 && d.p <= 1.0)) throw std::invalid_argument("geometric: p must lie in (0, 1]");
}

Distribution::Distribution(Poisson d) : v_(d) {
  if (!(d.lambda >= 0.0 && d.lambda <= 500.0)) throw std::invalid_argument("poisson: lambda must lie in [0, 500]");
  if (d.max && *d.max < 0) throw std::invalid_argument("poisson: max must be nonnegative");
}

Distribution Distribution::discrete(std::vector<double> atoms, std::vector<double> weights) {
  return Distribution(FiniteDiscrete{DiscreteMeasure::make(std::move(atoms), std::move(weights))});
}

std::string Distribution::kind() const {
  return std::visit(overloaded{[](const PointMass&) { return std::string("point"); },
                               [](const FiniteDiscrete&) { return std::string("discrete"); },
                               [](const UniformInterval&) { return std::string("uniform"); },
                               [](const Geometric&) { return std::string("geometric"); },
                               [](const Poisson&) { return std::string("poisson"); }},
                    v_);
}

double Distribution::quantile(double u) const {
  return std::visit(
      overloaded{
          [](const PointMass& d) { return d.value; },
          [u](const FiniteDiscrete& d) { return d.law.quantile(u); },
          [u](const UniformInterval& d) { return d.low + u * (d.high - d.low); },
          [u](const Geometric& d) {
            if (d.p >= 1.0) return static_cast<double>(d.start);
            const double k = std::ceil(std::log1p(-u) / std::log1p(-d.p)) - 1.0;
            return static_cast<double>(d.start) + std::max(0.0, k);
          },
          [u](const Poisson& d) {
            const double target = u * poisson_normalizer(d);
            double term = std::exp(-d.lambda), cum = term;
            std::int64_t k = 0;
            const auto cutoff = static_cast<std::int64_t>(d.lambda + 60.0 * std::sqrt(d.lambda) + 60.0);
            while (cum < target && k < cutoff && (!d.max || k < *d.max)) {
              ++k;
              term *= d.lambda / static_cast<double>(k);
              cum += term;
            }
            return static_cast<double>(k);
          },
      },
      v_);
}

double Distribution::mean() const {
  return std::visit(overloaded{
                        [](const PointMass& d) { return d.value; },
                        [](const FiniteDiscrete& d) { return d.law.mean(); },
                        [](const UniformInterval& d) { return 0.5 * (d.low + d.high); },
                        [](const Geometric& d) { return static_cast<double>(d.start) + (1.0 - d.p) / d.p; },
                        [](const Poisson& d) {
                          if (!d.max) return d.lambda;
                          double s = 0.0;
                          poisson_series(d, [&](double k, double pmf) { s += k * pmf; });
                          return s;
                        },
                    },
                    v_);
}

double Distribution::mean_abs() const {
  if (const auto* u = std::get_if<UniformInterval>(&v_)) {
    if (u->low >= 0.0) return 0.5 * (u->low + u->high);
    if (u->high <= 0.0) return -0.5 * (u->low + u->high);
    return (u->low * u->low + u->high * u->high) / (2.0 * (u->high - u->low));
  }
  return abs_moment(1.0);
}

double Distribution::abs_moment(double power) const {
  if (!(power >= 0.0)) throw std::invalid_argument("abs_moment: power must be nonnegative");
  auto pw = [power](double x) { return power == 0.0 ? 1.0 : std::pow(std::abs(x), power); };
  return std::visit(overloaded{
                        [&](const PointMass& d) { return pw(d.value); },
                        [&](const FiniteDiscrete& d) {
                          double s = 0.0;
                          for (std::size_t i = 0; i < d.law.size(); ++i) s += pw(d.law.support()[i]) * d.law.mass()[i];
                          return s;
                        },
                        [&](const UniformInterval& d) {
                          if (d.high == d.low) return pw(d.low);
                          auto prim = [&](double x) {
                            return std::copysign(std::pow(std::abs(x), power + 1.0) / (power + 1.0), x);
                          };
                          return (prim(d.high) - prim(d.low)) / (d.high - d.low);
                        },
                        [&](const Geometric& d) {
                          double s = 0.0;
                          geometric_series(d, [&](double k, double pmf) { s += pw(k) * pmf; });
                          return s;
                        },
                        [&](const Poisson& d) {
                          double s = 0.0;
                          poisson_series(d, [&](double k, double pmf) { s += pw(k) * pmf; });
                          return s;
                        },
                    },
                    v_);
}

double Distribution::excess_mean(double d) const {
  if (!integer_valued()) throw std::invalid_argument("excess_mean: law must be integer-valued");
  double s = 0.0;
  auto add = [&](double k, double pmf) { s += std::max(0.0, k - d) * pmf; };
  std::visit(overloaded{
                 [&](const PointMass& p) { add(p.value, 1.0); },
                 [&](const FiniteDiscrete& f) {
                   for (std::size_t i = 0; i < f.law.size(); ++i) add(f.law.support()[i], f.law.mass()[i]);
                 },
                 [](const UniformInterval&) {},
                 [&](const Geometric& g) { geometric_series(g, add); },
                 [&](const Poisson& p) { poisson_series(p, add); },
             },
             v_);
  return s;
}

bool Distribution::integer_valued() const {
  return std::visit(overloaded{
                        [](const PointMass& d) { return d.value == std::floor(d.value); },
                        [](const FiniteDiscrete& d) { return d.law.integer_supported(); },
                        [](const UniformInterval& d) { return d.low == d.high && d.low == std::floor(d.low); },
                        [](const Geometric&) { return true; },
                        [](const Poisson&) { return true; },
                    },
                    v_);
}

bool Distribution::nonnegative() const {
  return std::visit(overloaded{
                        [](const PointMass& d) { return d.value >= 0.0; },
                        [](const FiniteDiscrete& d) { return d.law.support()[0] >= 0.0; },
                        [](const UniformInterval& d) { return d.low >= 0.0; },
                        [](const Geometric& d) { return d.start >= 0; },
                        [](const Poisson&) { return true; },
                    },
                    v_);
}

std::optional<DiscreteMeasure> Distribution::finite_support() const {
  return std::visit(overloaded{
                        [](const PointMass& d) -> std::optional<DiscreteMeasure> { return DiscreteMeasure::point(d.value); },
                        [](const FiniteDiscrete& d) -> std::optional<DiscreteMeasure> { return d.law; },
                        [](const UniformInterval& d) -> std::optional<DiscreteMeasure> {
                          if (d.low == d.high) return DiscreteMeasure::point(d.low);
                          return std::nullopt;
                        },
                        [](const Geometric& d) -> std::optional<DiscreteMeasure> {
                          if (d.p >= 1.0) return DiscreteMeasure::point(static_cast<double>(d.start));
                          return std::nullopt;
                        },
                        [](const Poisson& d) -> std::optional<DiscreteMeasure> {
                          if (!d.max && d.lambda > 0.0) return std::nullopt;
                          std::vector<double> a, w;
                          poisson_series(d, [&](double k, double pmf) {
                            a.push_back(k);
                            w.push_back(pmf);
                          });
                          return DiscreteMeasure::make(std::move(a), std::move(w));
                        },
                    },
                    v_);
}

std::optional<DiscreteMeasure> Distribution::discretized(double tail) const {
  if (auto f = finite_support()) return f;
  std::vector<double> a, w;
  double cum = 0.0;
  auto take = [&](double k, double pmf) {
    if (1.0 - cum <= tail && !a.empty()) return;
    a.push_back(k);
    w.push_back(pmf);
    cum += pmf;
  };
  if (const auto* g = std::get_if<Geometric>(&v_)) {
    geometric_series(*g, take);
  } else if (const auto* p = std::get_if<Poisson>(&v_)) {
    poisson_series(*p, take);
  } else {
    return std::nullopt;
  }
  if (cum < 1.0) {
    a.push_back(a.back() + 1.0);
    w.push_back(1.0 - cum);
  }
  return DiscreteMeasure::make(std::move(a), std::move(w));
}

bool operator==(const Distribution& a, const Distribution& b) { return a.v_ == b.v_; }

void to_json(nlohmann::json& j, const Distribution& d) {
  std::visit(overloaded{
                 [&](const PointMass& p) { j = {{"type", "point"}, {"value", p.value}}; },
                 [&](const FiniteDiscrete& f) {
                   j = {{"type", "discrete"},
                        {"atoms", std::vector<double>(f.law.support().begin(), f.law.support().end())},
                        {"probs", std::vector<double>(f.law.mass().begin(), f.law.mass().end())}};
                 },
                 [&](const UniformInterval& u) { j = {{"type", "uniform"}, {"low", u.low}, {"high", u.high}}; },
                 [&](const Geometric& g) { j = {{"type", "geometric"}, {"p", g.p}, {"start", g.start}}; },
                 [&](const Poisson& p) {
                   j = {{"type", "poisson"}, {"lambda", p.lambda}};
                   if (p.max) j["max"] = *p.max;
                 },
             },
             d.variant());
}

void from_json(const nlohmann::json& j, Distribution& d) {
  if (j.is_number()) {
    d = Distribution::point(j.get<double>());
    return;
  }
  if (!j.is_object() || !j.contains("type")) throw std::invalid_argument("distribution: expected a number or an object with 'type'");
  const auto type = j.at("type").get<std::string>();
  if (type == "point") {
    d = Distribution::point(j.at("value").get<double>());
  } else if (type == "discrete") {
    d = Distribution::discrete(j.at("atoms").get<std::vector<double>>(), j.at("probs").get<std::vector<double>>());
  } else if (type == "uniform") {
    d = Distribution::uniform(j.at("low").get<double>(), j.at("high").get<double>());
  } else if (type == "geometric") {
    d = Distribution(Geometric{j.at("p").get<double>(), j.value("start", std::int64_t{1})});
  } else if (type == "poisson") {
    Poisson p{j.at("lambda").get<double>(), std::nullopt};
    if (j.contains("max")) p.max = j.at("max").get<std::int64_t>();
    d = Distribution(p);
  } else {
    throw std::invalid_argument("distribution: unknown type '" + type + "'");
  }
}

std::optional<double> comonotone_abs_gap(const Distribution& x, const Distribution& y) {
  const auto ax = affine_form(x), ay = affine_form(y);
  if (ax && ay) return abs_linear_mean(ax->first - ay->first, ax->second - ay->second);
  const auto dx = x.discretized(), dy = y.discretized();
  if (dx && dy) return d1_discrete(*dx, *dy);
  return std::nullopt;
}

std::optional<double> independent_abs_gap(const Distribution& x, const Distribution& y) {
  const auto dx = x.discretized(), dy = y.discretized();
  if (dx && dy) {
    double s = 0.0;
    for (std::size_t i = 0; i < dx->size(); ++i)
      for (std::size_t k = 0; k < dy->size(); ++k)
        s += std::abs(dx->support()[i] - dy->support()[k]) * dx->mass()[i] * dy->mass()[k];
    return s;
  }
  // One side a point mass: E|X - c| is the mean absolute value of a shift.
  const auto ax = affine_form(x), ay = affine_form(y);
  if (ax && ay && (ax->second == 0.0 || ay->second == 0.0)) {
    const double c = ax->second == 0.0 ? ax->first : ay->first;
    const auto& other = ax->second == 0.0 ? *ay : *ax;
    return Distribution::uniform(other.first - c, other.first + other.second - c).mean_abs();
  }
  return std::nullopt;
}

}  // namespace wbt
