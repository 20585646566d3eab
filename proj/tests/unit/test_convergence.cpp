#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <map>

#include "wbt/convergence.hpp"

using namespace wbt;

namespace {

SamplerSequence family(std::function<SequenceElement(std::size_t)> element, SequenceElement limit) {
  return SamplerSequence{std::move(element), std::move(limit), {}, {}};
}

SequenceElement wbp_pair(double b) { return {BranchingSampler::deterministic_wbp(1.0, {b, b}), std::nullopt}; }

SamplerSequence shifted_pair_family() {
  return family([](std::size_t n) { return wbp_pair(0.3 + 0.1 / static_cast<double>(n)); }, wbp_pair(0.3));
}

SamplerSequence barren_shift_family() {
  return family(
      [](std::size_t n) {
        return SequenceElement{BranchingSampler::deterministic_wbp(1.0 + 1.0 / static_cast<double>(n), {}),
                               std::nullopt};
      },
      {BranchingSampler::deterministic_wbp(1.0, {}), std::nullopt});
}

BranchingSampler finite_wbt(double scale) {
  return BranchingSampler::independent(TreeMode::wbt, Distribution::point(1.0), Distribution::discrete({1, 2}, {1, 1}),
                                       Distribution::discrete({0.2 * scale, 0.4 * scale}, {1, 1}));
}

}  // namespace

TEST(PowerBounds, Examples) {
  for (std::size_t j : {1, 2, 7}) {
    const auto b = power_bounds(1.0, j);
    EXPECT_EQ(b.lhs1, 1.0);
    EXPECT_EQ(b.rhs1, 1.0);
    EXPECT_EQ(b.lhs2, 0.0);
    EXPECT_EQ(b.rhs2, 0.0);
  }
  const auto a = power_bounds(1.1, 3);
  EXPECT_NEAR(a.lhs1, 1.331, 1e-12);
  EXPECT_NEAR(a.rhs1, std::exp(0.3), 1e-12);
  const auto c = power_bounds(0.5, 4);
  EXPECT_NEAR(c.lhs2, 0.9375, 1e-15);
  EXPECT_NEAR(c.rhs2, 2.0, 1e-15);
  EXPECT_THROW(power_bounds(0.0, 1), std::domain_error);
}

TEST(Schedule, Values) {
  EXPECT_EQ(Schedule::constant(3)(1000), 3u);
  EXPECT_EQ(Schedule::logarithmic()(100), 4u);
  EXPECT_EQ(Schedule::loglog()(100), 2u);
  EXPECT_EQ(Schedule::loglog()(2), 1u);
  EXPECT_EQ(Schedule::linear(0.5, 1)(9), 5u);
  EXPECT_EQ(Schedule::power(2.0, 0.5)(16), 8u);
  EXPECT_THROW(Schedule::constant(1)(0), std::invalid_argument);
}

TEST(FixedLevel, DeterministicPairIsExact) {
  FixedLevelOptions o;
  o.samples = 20;
  o.reps = 3;
  const std::vector<std::size_t> grid{1, 2, 5, 10};
  const auto curve = fixed_level_convergence(shifted_pair_family(), 1, grid, o, StreamKey(1));
  ASSERT_EQ(curve.points.size(), grid.size());
  for (const auto& p : curve.points) EXPECT_NEAR(p.value.median, 0.2 / static_cast<double>(p.n), 1e-9);
  EXPECT_EQ(curve.baseline.median, 0.0);
}

TEST(FixedLevel, MarkShiftAtLevelZero) {
  FixedLevelOptions o;
  o.samples = 10;
  o.reps = 2;
  const auto curve = fixed_level_convergence(barren_shift_family(), 0, {1, 4, 16}, o, StreamKey(2));
  for (const auto& p : curve.points) EXPECT_NEAR(p.value.median, 1.0 / static_cast<double>(p.n), 1e-12);
}

TEST(FixedLevel, ConstantSequenceSitsAtTheBaseline) {
  const SequenceElement e{BranchingSampler::independent(TreeMode::wbp, Distribution::point(1.0),
                                                        Distribution(Poisson{1.2, std::nullopt}),
                                                        Distribution::uniform(0, 1)),
                          std::nullopt};
  FixedLevelOptions o;
  o.samples = 400;
  o.reps = 9;
  o.threads = 4;
  const auto curve = fixed_level_convergence(SamplerSequence::constant(e), 3, {10, 100}, o, StreamKey(3));
  for (const auto& p : curve.points) EXPECT_LE(p.value.median, 3.0 * curve.baseline.median);
  o.common_random_numbers = true;
  const auto crn = fixed_level_convergence(SamplerSequence::constant(e), 3, {10, 100}, o, StreamKey(3));
  for (const auto& p : crn.points) EXPECT_EQ(p.value.median, 0.0);
}

TEST(FixedLevel, IsThreadCountInvariant) {
  const SequenceElement e{BranchingSampler::independent(TreeMode::wbp, Distribution::point(1.0),
                                                        Distribution(Poisson{1.2, std::nullopt}),
                                                        Distribution::uniform(0, 1)),
                          std::nullopt};
  FixedLevelOptions o;
  o.samples = 50;
  o.reps = 4;
  const auto a = fixed_level_convergence(SamplerSequence::constant(e), 2, {1, 2}, o, StreamKey(8));
  o.threads = 3;
  const auto b = fixed_level_convergence(SamplerSequence::constant(e), 2, {1, 2}, o, StreamKey(8));
  for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_EQ(a.points[i].replicates, b.points[i].replicates);
}

TEST(Martingale, UnperturbedBinaryFamilyIsIdenticallyOne) {
  const auto e = wbp_pair(0.5);
  MartingaleOptions o;
  o.samples = 10;
  o.reps = 2;
  o.proxy_level = 6;
  o.mean_one = true;
  const auto r = scaled_martingale_convergence(SamplerSequence::constant(e), Schedule::logarithmic(), {10, 100}, o,
                                               StreamKey(4));
  for (const auto& p : r.ks_rho_n.points) EXPECT_EQ(p.value.median, 0.0);
  ASSERT_TRUE(r.d1_rho);
  for (const auto& p : r.d1_rho->points) EXPECT_NEAR(p.value.median, 0.0, 1e-12);
  for (double g : r.normalization_gap) EXPECT_EQ(g, 0.0);
}

TEST(Martingale, NormalizationGapRespectsThePowerBound) {
  const auto gw = [](double p) {
    return SequenceElement{BranchingSampler::independent(TreeMode::wbp, Distribution::point(1.0),
                                                         Distribution::discrete({0, 1, 2}, {(1 - p) * (1 - p),
                                                                                            2 * p * (1 - p), p * p}),
                                                         Distribution::point(1.0)),
                           std::nullopt};
  };
  const auto seq = family([gw](std::size_t n) { return gw(0.5 + 1.0 / static_cast<double>(n)); }, gw(0.5));
  MartingaleOptions o;
  o.samples = 50;
  o.reps = 2;
  o.proxy_level = 8;
  const std::vector<std::size_t> grid{10, 100, 1000};
  const auto r = scaled_martingale_convergence(seq, Schedule::logarithmic(), grid, o, StreamKey(5));
  ASSERT_EQ(r.normalization_gap.size(), grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double rho_n = 2.0 * (0.5 + 1.0 / static_cast<double>(grid[i]));
    const auto j = Schedule::logarithmic()(grid[i]);
    EXPECT_NEAR(r.normalization_gap[i], std::abs(std::pow(1.0 / rho_n, static_cast<double>(j)) - 1.0), 1e-12);
    EXPECT_LE(r.normalization_gap[i], r.normalization_bound[i]);
  }
}

TEST(RLimit, BarrenShiftIsExact) {
  RLimitOptions o;
  o.samples = 10;
  o.reps = 2;
  const auto r = r_limit_convergence(barren_shift_family(), Schedule::constant(2), {1, 10, 100}, o, StreamKey(6));
  for (const auto& p : r.d1.points) EXPECT_NEAR(p.value.median, 1.0 / static_cast<double>(p.n), 1e-12);
}

TEST(RLimit, MeansFollowTheGeometricSeries) {
  const auto e = [](double c) {
    return SequenceElement{BranchingSampler::independent(TreeMode::wbp, Distribution::point(1.0),
                                                         Distribution::point(2.0), Distribution::uniform(0, 2 * c)),
                           std::nullopt};
  };
  const auto seq = family([e](std::size_t n) { return e(0.25 + 0.05 / static_cast<double>(n)); }, e(0.25));
  RLimitOptions o;
  o.samples = 1000;
  o.reps = 2;
  o.eps = 1e-3;
  o.threads = 4;
  const std::vector<std::size_t> grid{1, 4};
  const auto r = r_limit_convergence(seq, Schedule::linear(1.0, 6), grid, o, StreamKey(7));
  ASSERT_TRUE(r.limit_mean);
  EXPECT_NEAR(*r.limit_mean, 2.0, 1e-12);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double target = 1.0 / (0.5 - 0.1 / static_cast<double>(grid[i]));
    const std::size_t k = 6 + grid[i];
    const double rho_n = 1.0 - 1.0 / target;
    const double truncated = (1.0 - std::pow(rho_n, static_cast<double>(k + 1))) / (1.0 - rho_n);
    EXPECT_NEAR(r.mean_r[i].mean, truncated, 4 * r.mean_r[i].se);
  }
}

TEST(RLimit, RejectsNonContractingLimit) {
  RLimitOptions o;
  o.reps = 2;
  EXPECT_THROW(r_limit_convergence(SamplerSequence::constant(wbp_pair(0.5)), Schedule::constant(1), {1}, o,
                                   StreamKey(1)),
               std::domain_error);
}

TEST(Lemma, ScalingFamilyVanishesAtRateOneOverN) {
  const auto seq = family([](std::size_t n) { return SequenceElement{finite_wbt(1.0 + 1.0 / static_cast<double>(n)), std::nullopt}; }, {finite_wbt(1.0), std::nullopt});
  const auto r = lemma_condition_check(seq, {1, 10, 100, 1000});
  EXPECT_TRUE(r.hypotheses_vanish);
  EXPECT_TRUE(r.conclusion_vanishes);
  const double mean_abs_c = 0.3, mean_nc = 1.5 * 0.3;
  for (const auto& row : r.rows) {
    const double n = static_cast<double>(row.n);
    EXPECT_NEAR(row.d1_nu, mean_abs_c / n, 1e-12);
    EXPECT_LE(row.d1_mu, (mean_abs_c + mean_nc) / n + 1e-12);
  }
}

TEST(Lemma, EscapingMassIsReported) {
  const auto element = [](std::size_t n) {
    const double nn = static_cast<double>(n);
    std::map<std::size_t, Distribution> c{{1, Distribution::point(0.5)}, {n * n, Distribution::point(1.0 / nn)}};
    return SequenceElement{BranchingSampler::independent(TreeMode::wbt, Distribution::point(1.0),
                                                         Distribution::discrete({1.0, nn * nn}, {1 - 1 / nn, 1 / nn}),
                                                         Distribution::point(0.5), c),
                           std::nullopt};
  };
  const auto seq = family(element, {BranchingSampler::deterministic_wbt(1.0, 1, 0.5), std::nullopt});
  const auto r = lemma_condition_check(seq, {2, 4, 8});
  EXPECT_FALSE(r.hypotheses_vanish);
  EXPECT_FALSE(r.conclusion_vanishes);
}

TEST(SchedulePremise, FlagsNonVanishingProducts) {
  const auto seq = shifted_pair_family();
  const std::vector<std::size_t> grid{10, 100, 1000};
  EXPECT_TRUE(schedule_premise(seq, Schedule::logarithmic(), grid).holds);
  const auto bad = schedule_premise(seq, Schedule::linear(), grid);
  EXPECT_FALSE(bad.holds);
  EXPECT_NE(bad.message.find("does not vanish"), std::string::npos);
  for (double p : bad.products) EXPECT_NEAR(p, 0.2, 1e-12);
}

TEST(VectorLaws, NodeAndWeightVectors) {
  const auto law = node_law(finite_wbt(1.0));
  EXPECT_EQ(law.dim, 3u);
  EXPECT_EQ(law.size(), 4u);
  const auto mu = weight_vector_law(BranchingSampler::deterministic_wbp(2.0, {0.1, 0.2}));
  EXPECT_EQ(mu.dim, 3u);
  EXPECT_EQ(mu.atoms, (std::vector<double>{2.0, 0.1, 0.2}));
}
