#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "wbt/branching.hpp"
#include "wbt/stats.hpp"

using namespace wbt;

namespace {

TreeRealization grow_det(const BranchingSampler& s, std::size_t depth, bool retain = false) {
  return grow(s, std::nullopt, StreamKey(1), GrowOptions{depth, kDefaultNodeCap, retain});
}

}  // namespace

TEST(Grow, DepthZeroIsTheRoot) {
  const auto t = grow_det(BranchingSampler::deterministic_wbp(2.5, {0.5, 0.5}), 0);
  EXPECT_EQ(t.generation_size(0), 1u);
  EXPECT_EQ(t.w(0), 2.5);
  EXPECT_EQ(t.homogeneous(0), 1.0);
  EXPECT_THROW(t.w(1), std::out_of_range);
}

TEST(Grow, BinaryHalvingTree) {
  const auto t = grow_det(BranchingSampler::deterministic_wbp(1.0, {0.5, 0.5}), 3, true);
  for (std::size_t j = 0; j <= 3; ++j) {
    EXPECT_EQ(t.generation_size(j), std::size_t{1} << j);
    EXPECT_DOUBLE_EQ(t.w(j), 1.0);
    for (const auto& node : t.generation(j)) EXPECT_DOUBLE_EQ(node.weight, std::ldexp(1.0, -static_cast<int>(j)));
  }
  EXPECT_EQ(t.index_of(3, 5).path, (std::vector<std::uint32_t>{2, 1, 2}));
}

TEST(Grow, BarrenSamplerHasEmptyGenerations) {
  const auto t = grow_det(BranchingSampler::deterministic_wbp(0.7, {}), 4);
  for (std::size_t j = 1; j <= 4; ++j) {
    EXPECT_EQ(t.generation_size(j), 0u);
    EXPECT_EQ(t.w(j), 0.0);
  }
  EXPECT_EQ(t.r(2), 0.7);
}

TEST(Grow, ExplosionCapNamesTheGeneration) {
  try {
    grow(BranchingSampler::deterministic_wbp(1.0, {1, 1, 1}), std::nullopt, StreamKey(1), GrowOptions{10, 100, false});
    FAIL() << "expected an explosion error";
  } catch (const ExplosionError& e) {
    EXPECT_EQ(e.generation(), 4u);
  }
}

TEST(RProcess, GeometricSum) {
  const auto t = grow_det(BranchingSampler::deterministic_wbp(1.0, {0.25, 0.25}), 8);
  for (std::size_t k = 0; k <= 8; ++k) EXPECT_NEAR(t.r(k), 2.0 - std::ldexp(1.0, -static_cast<int>(k)), 1e-15);
}

TEST(HomogeneousW, ThirdsAndGaltonWatson) {
  const auto t = grow_det(BranchingSampler::deterministic_wbp(5.0, {1 / 3.0, 1 / 3.0, 1 / 3.0}), 4);
  for (std::size_t j = 0; j <= 4; ++j) EXPECT_NEAR(t.homogeneous(j), 1.0, 1e-14);

  const auto gw = BranchingSampler::independent(TreeMode::wbp, Distribution::point(1.0),
                                                Distribution(Poisson{1.3, std::nullopt}), Distribution::point(1.0));
  const auto g = grow(gw, std::nullopt, StreamKey(77), GrowOptions{5});
  for (std::size_t j = 0; j <= 5; ++j) EXPECT_EQ(g.homogeneous(j), static_cast<double>(g.generation_size(j)));
}

TEST(HomogeneousW, RejectsNegativeWeights) {
  const auto t = grow_det(BranchingSampler::deterministic_wbp(1.0, {-0.5, 0.5}), 2);
  EXPECT_THROW(t.homogeneous(1), std::domain_error);
  EXPECT_NO_THROW(t.w(2));
}

TEST(MartingaleNormalize, Examples) {
  EXPECT_NEAR(martingale_normalize(0.36, 0.6, 2), 1.0, 1e-15);
  EXPECT_EQ(martingale_normalize(3.0, 1.0, 7), 3.0);
  EXPECT_THROW(martingale_normalize(1.0, 0.0, 1), std::invalid_argument);
}

TEST(Moments, Examples) {
  EXPECT_NEAR(moments(BranchingSampler::deterministic_wbp(1.0, {0.3, 0.3})).rho, 0.6, 1e-15);
  const auto wbt = BranchingSampler::independent(TreeMode::wbt, Distribution::point(1.0),
                                                 Distribution(Geometric{0.5, 0}), Distribution::point(0.4));
  const auto m = moments(wbt);
  EXPECT_NEAR(m.mean_offspring, 1.0, 1e-14);
  EXPECT_NEAR(m.rho, 0.4, 1e-14);
  EXPECT_NEAR(m.mean_abs_cq, 0.4, 1e-14);
  EXPECT_EQ(moments(BranchingSampler::deterministic_wbp(1.0, {})).rho, 0.0);
}

TEST(Moments, CustomSamplerNeedsDeclaredMoments) {
  const auto s = BranchingSampler::custom(
      TreeMode::wbt, [](const NodeUniforms&, BranchingDraw& d) { d = {1.0, 1, {0.5}}; }, std::nullopt, true);
  EXPECT_THROW(moments(s), MissingMoments);
  Moments declared;
  declared.rho = 0.5;
  declared.mean_abs_q = 1.0;
  declared.mean_offspring = 1.0;
  declared.mean_abs_cq = 0.5;
  EXPECT_EQ(moments(s.with_declared_moments(declared)).rho, 0.5);
}

TEST(Moments, EstimatesAgreeWithAnalyticValues) {
  const auto s = BranchingSampler::independent(TreeMode::wbp, Distribution::uniform(0, 2),
                                               Distribution(Poisson{1.5, std::nullopt}), Distribution::uniform(0, 1));
  const auto exact = moments(s);
  const auto est = estimate_moments(s, 200000, StreamKey(3));
  EXPECT_NEAR(est.rho, exact.rho, 4 * est.rho_se);
  EXPECT_NEAR(est.mean_abs_q, exact.mean_abs_q, 4 * est.mean_abs_q_se);
  EXPECT_NEAR(est.mean_offspring, exact.mean_offspring, 4 * est.mean_offspring_se);
}

TEST(Wbt, PathWeightIsTheProductOfOwnWeights) {
  const auto s = BranchingSampler::independent(TreeMode::wbt, Distribution::point(1.0),
                                               Distribution::discrete({1, 2, 3}, {1, 1, 1}),
                                               Distribution::uniform(0.2, 0.6));
  const auto t = grow(s, std::nullopt, StreamKey(8), GrowOptions{4, kDefaultNodeCap, true});
  BranchingDraw d;
  for (std::size_t j = 1; j <= 4; ++j) {
    const auto parents = t.generation(j - 1);
    double w = 0.0;
    for (const auto& node : t.generation(j)) {
      s.draw(NodeUniforms(node.key), d);
      EXPECT_NEAR(node.weight, parents[node.parent].weight * d.own_weight(), 1e-15);
      w += node.weight * node.mark;
    }
    EXPECT_NEAR(t.w(j), w, 1e-12);
  }
}

TEST(Wbt, DelayedRootControlsTheFirstGeneration) {
  const auto s = BranchingSampler::deterministic_wbt(1.0, 2, 0.5);
  const auto root = RootSampler::joint({{3.0, 5}}, {1.0});
  const auto t = grow(s, root, StreamKey(2), GrowOptions{2});
  EXPECT_EQ(t.w(0), 3.0);
  EXPECT_EQ(t.generation_size(1), 5u);
  EXPECT_EQ(t.generation_size(2), 10u);
  EXPECT_NEAR(t.w(2), 10 * 0.25, 1e-15);
  EXPECT_THROW(make_source(BranchingSampler::deterministic_wbp(1.0, {0.5}), root), std::invalid_argument);
}

TEST(Grow, SameKeySameTree) {
  const auto s = BranchingSampler::independent(TreeMode::wbp, Distribution::point(1.0),
                                               Distribution(Poisson{1.4, std::nullopt}), Distribution::uniform(0, 1));
  const auto a = grow(s, std::nullopt, StreamKey(123), GrowOptions{6});
  const auto b = grow(s, std::nullopt, StreamKey(123), GrowOptions{6});
  for (std::size_t j = 0; j <= 6; ++j) EXPECT_EQ(a.w(j), b.w(j));
}

TEST(GaltonWatson, NormalizedGenerationMeanIsOne) {
  const auto s = BranchingSampler::independent(TreeMode::wbp, Distribution::point(1.0),
                                               Distribution(Poisson{1.5, std::nullopt}), Distribution::point(1.0));
  std::vector<double> v(20000);
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = martingale_normalize(grow(s, std::nullopt, StreamKey(5).child(i), GrowOptions{4}).homogeneous(4), 1.5, 4);
  const auto e = estimate_mean(v);
  EXPECT_NEAR(e.mean, 1.0, 3 * e.se);
}

TEST(Endogenous, TailBoundsAndErrors) {
  Moments m;
  m.rho = 0.5;
  m.mean_abs_q = 1.0;
  m.mean_abs_cq = 0.25;
  EXPECT_NEAR(endogenous_tail(m, TreeMode::wbp, 0.0, 3), std::pow(0.5, 4) / 0.5, 1e-15);
  EXPECT_NEAR(endogenous_tail(m, TreeMode::wbt, 2.0, 3), 2.0 * 0.25 * std::pow(0.5, 3) / 0.5, 1e-15);
  m.rho = 1.0;
  EXPECT_THROW(endogenous_tail(m, TreeMode::wbp, 0.0, 1), std::domain_error);
}

TEST(Endogenous, DeterministicLimitAndBarrenTree) {
  const auto r = endogenous_r_sample(BranchingSampler::deterministic_wbp(1.0, {0.25, 0.25}), std::nullopt, 1e-3,
                                     StreamKey(1));
  EXPECT_NEAR(r.value, 2.0, 1e-3);
  EXPECT_LE(r.tail_bound, 1e-3);
  const auto barren = endogenous_r_sample(BranchingSampler::deterministic_wbp(0.9, {}), std::nullopt, 1e-6,
                                          StreamKey(1));
  EXPECT_EQ(barren.value, 0.9);
  EXPECT_THROW(endogenous_r_sample(BranchingSampler::deterministic_wbp(1.0, {0.5, 0.5}), std::nullopt, 1e-3,
                                   StreamKey(1)),
               std::domain_error);
}

TEST(Stats, MedianAndTrend) {
  const std::vector<double> odd{3, 1, 2}, even{4, 1, 3, 2};
  EXPECT_EQ(median(odd), 2.0);
  EXPECT_EQ(median(even), 2.5);
  EXPECT_TRUE(trend_test(1.0, 0.4, 0.2).pass());
  EXPECT_FALSE(trend_test(1.0, 0.7, 1.0).pass());
  EXPECT_FALSE(trend_test(1.0, 0.4, 0.1).pass());
}

TEST(Stats, ParallelForCoversEveryIndexOnce) {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
  for (int h : hits) EXPECT_EQ(h, 1);
}
