#include <gtest/gtest.h>

#include <cmath>

#include "wbt/coupling.hpp"
#include "wbt/stats.hpp"

using namespace wbt;

namespace {

CoupledSampler deterministic_pair() {
  return CoupledSampler::quantile(BranchingSampler::deterministic_wbp(1.0, {0.3, 0.3}),
                                  BranchingSampler::deterministic_wbp(1.0, {0.4, 0.4}));
}

CouplingConstants plain(double rho, double rho_hat, double q, double e) {
  CouplingConstants cc;
  cc.rho = rho;
  cc.rho_hat = rho_hat;
  cc.mean_abs_q = q;
  cc.e = e;
  return cc;
}

}  // namespace

TEST(GrowCoupled, IdentityGivesIdenticalTrees) {
  const auto s = BranchingSampler::independent(TreeMode::wbp, Distribution::uniform(0, 1),
                                               Distribution(Poisson{1.3, std::nullopt}), Distribution::uniform(0, 1));
  const auto [a, b] = grow_coupled(CoupledSampler::identity(s), StreamKey(4), GrowOptions{5, kDefaultNodeCap, true});
  for (std::size_t j = 0; j <= 5; ++j) {
    ASSERT_EQ(a.generation_size(j), b.generation_size(j));
    EXPECT_EQ(a.w(j), b.w(j));
    for (std::size_t i = 0; i < a.generation_size(j); ++i) EXPECT_EQ(a.generation(j)[i].weight, b.generation(j)[i].weight);
  }
  EXPECT_EQ(mean_abs_gap(CoupledSampler::identity(s), 4, 100, StreamKey(1)).mean, 0.0);
}

TEST(GrowCoupled, IndependentMarginalsKeepTheirLaw) {
  const auto s = BranchingSampler::independent(TreeMode::wbp, Distribution::point(1.0),
                                               Distribution(Poisson{1.2, std::nullopt}), Distribution::point(1.0));
  const auto cs = CoupledSampler::independent(s, s);
  std::vector<double> za(20000), zb(20000);
  for (std::size_t i = 0; i < za.size(); ++i) {
    const auto [a, b] = grow_coupled(cs, StreamKey(6).child(i), GrowOptions{3});
    za[i] = static_cast<double>(a.generation_size(3));
    zb[i] = static_cast<double>(b.generation_size(3));
  }
  const auto ea = estimate_mean(za), eb = estimate_mean(zb);
  EXPECT_NEAR(ea.mean, 1.728, 3 * ea.se);
  EXPECT_NEAR(eb.mean, 1.728, 3 * eb.se);
  EXPECT_NE(za, zb);
}

TEST(MeanAbsGap, DeterministicPairIsExact) {
  const auto g1 = mean_abs_gap(deterministic_pair(), 1, 10, StreamKey(1));
  EXPECT_NEAR(g1.mean, 0.2, 1e-15);
  EXPECT_EQ(g1.se, 0.0);
  EXPECT_NEAR(mean_abs_gap(deterministic_pair(), 2, 10, StreamKey(1)).mean, 0.28, 1e-15);
}

TEST(Prop1Bound, PlugInValues) {
  EXPECT_EQ(prop1_bound(plain(0.6, 0.8, 1.0, 0.0), 3), 0.0);
  EXPECT_NEAR(prop1_bound(plain(0.6, 0.8, 1.0, 0.2), 1), 0.36, 1e-15);
  EXPECT_NEAR(prop1_bound(plain(0.6, 0.8, 1.0, 0.2), 2), 0.408, 1e-15);
}

TEST(Prop2Bound, PlugInValues) {
  CouplingConstants cc;
  cc.mode = TreeMode::wbt;
  cc.mean_offspring = cc.mean_offspring_hat = cc.root_mean_offspring = cc.root_mean_offspring_hat = 2.0;
  cc.mean_abs_cq = 0.5;
  cc.rho = 0.5;
  cc.rho_hat = 0.6;
  cc.mean_abs_q = 1.0;
  cc.e_wbt = 0.1;
  cc.e_star = 0.2;
  EXPECT_NEAR(prop2_bound(cc, 1, TailVariant::statement), 0.4, 1e-15);
  EXPECT_NEAR(prop2_bound(cc, 1, TailVariant::proof), 0.2 + 0.5 * 0.2, 1e-15);
  cc.e_star = 0.3;
  EXPECT_EQ(prop2_bound(cc, 0, TailVariant::statement), 0.3);
  cc.e_wbt = cc.e_star = 0.0;
  EXPECT_EQ(prop2_bound(cc, 4, TailVariant::proof), 0.0);
  cc.rho = 0.0;
  EXPECT_THROW(prop2_bound(cc, 2, TailVariant::statement), std::domain_error);
}

TEST(ExactConstants, DeterministicPair) {
  const auto cc = exact_constants(deterministic_pair());
  ASSERT_TRUE(cc);
  EXPECT_NEAR(cc->rho, 0.6, 1e-15);
  EXPECT_NEAR(cc->rho_hat, 0.8, 1e-15);
  EXPECT_NEAR(cc->e, 0.2, 1e-15);
}

TEST(ExactConstants, QuantileCouplingDistanceIsD1OfTheWeightLaws) {
  const auto c = Distribution::discrete({0.1, 0.3, 0.5}, {1, 2, 1});
  const auto ch = Distribution::discrete({0.2, 0.6}, {3, 1});
  const auto one = Distribution::point(1.0);
  const auto cs = CoupledSampler::quantile(BranchingSampler::independent(TreeMode::wbp, one, one, c),
                                           BranchingSampler::independent(TreeMode::wbp, one, one, ch));
  EXPECT_NEAR(exact_constants(cs)->e, d1_discrete(*c.finite_support(), *ch.finite_support()), 1e-15);
}

TEST(ExactConstants, JointTableByHand) {
  // base atoms (Q, B) = (1, {0.5}) w.p. 1/2 and (2, {0.5, 0.5}) w.p. 1/2;
  // alternative (1, {0.6}) and (1, {0.5, 0.2}); paired by index.
  CouplingTable t;
  t.base = {{1.0, 1, {0.5}}, {2.0, 2, {0.5, 0.5}}};
  t.alternative = {{1.0, 1, {0.6}}, {1.0, 2, {0.5, 0.2}}};
  t.probs = {0.5, 0.5};
  const auto cs = CoupledSampler::table(TreeMode::wbp, t);
  const double by_hand = 0.5 * 0.1 + 0.5 * (1.0 + 0.3);
  EXPECT_NEAR(exact_constants(cs)->e, by_hand, 1e-15);
  const auto est = estimate_constants(cs, 100000, StreamKey(2));
  EXPECT_NEAR(est.e, by_hand, 4 * est.e_se);
}

TEST(ExactConstants, EstimatesAgreeForWbt) {
  const auto base = BranchingSampler::independent(TreeMode::wbt, Distribution::point(1.0),
                                                  Distribution::discrete({0, 1, 2, 3}, {1, 1, 1, 1}),
                                                  Distribution::uniform(0.1, 0.4));
  const auto alt = BranchingSampler::independent(TreeMode::wbt, Distribution::point(1.2),
                                                 Distribution::discrete({1, 2, 3}, {1, 2, 1}),
                                                 Distribution::uniform(0.1, 0.5));
  const auto cs = CoupledSampler::quantile(base, alt);
  const auto exact = exact_constants(cs);
  ASSERT_TRUE(exact);
  const auto est = estimate_constants(cs, 200000, StreamKey(12));
  EXPECT_NEAR(est.e_wbt, exact->e_wbt, 4 * est.e_wbt_se);
  EXPECT_NEAR(est.e_star, exact->e_star, 4 * est.e_star_se);
}

TEST(Certify, IdentityPassesWithZeroGap) {
  const auto s = BranchingSampler::independent(TreeMode::wbt, Distribution::point(1.0),
                                               Distribution(Poisson{1.1, std::nullopt}), Distribution::uniform(0, 1));
  CertifyOptions o;
  o.reps = 200;
  o.j_max = 4;
  const auto r = certify(CoupledSampler::identity(s), o, StreamKey(3));
  EXPECT_TRUE(r.all_pass());
  for (const auto& row : r.rows) EXPECT_EQ(row.gap, 0.0);
}

TEST(Certify, DeterministicPairClosedForms) {
  CertifyOptions o;
  o.j_max = 10;
  o.reps = 2;
  const auto r = certify(deterministic_pair(), o, StreamKey(1));
  ASSERT_EQ(r.rows.size(), 10u);
  for (const auto& row : r.rows) {
    const double j = static_cast<double>(row.j);
    double s = 0.0;
    for (std::size_t t = 0; t < row.j; ++t) s += std::pow(0.6, t) * std::pow(0.8, j - 1.0 - t);
    EXPECT_NEAR(row.gap, std::pow(0.8, j) - std::pow(0.6, j), 1e-12);
    EXPECT_NEAR(row.bound_statement, (std::pow(0.8, j) + s) * 0.2, 1e-12);
    EXPECT_TRUE(row.pass);
  }
}

TEST(Certify, RandomWbpPairPasses) {
  const auto base = BranchingSampler::independent(TreeMode::wbp, Distribution::uniform(0, 2),
                                                  Distribution(Poisson{1.5, std::nullopt}), Distribution::uniform(0, 1));
  const auto alt = BranchingSampler::independent(TreeMode::wbp, Distribution::uniform(0, 2.2),
                                                 Distribution(Poisson{1.5, std::nullopt}), Distribution::uniform(0, 0.9));
  CertifyOptions o;
  o.reps = 4000;
  o.j_max = 4;
  o.threads = 4;
  const auto r = certify(CoupledSampler::quantile(base, alt), o, StreamKey(9));
  EXPECT_TRUE(r.all_pass());
  EXPECT_TRUE(r.rho_gap_ok);
}

TEST(CoupledSampler, RejectsMixedModesAndHalfRoots) {
  const auto wbp = BranchingSampler::deterministic_wbp(1.0, {0.5});
  const auto wbt = BranchingSampler::deterministic_wbt(1.0, 1, 0.5);
  EXPECT_THROW(CoupledSampler::quantile(wbp, wbt), std::invalid_argument);
  EXPECT_THROW(CoupledSampler::quantile(wbt, wbt, RootSampler::joint({{1.0, 1}}, {1.0}), std::nullopt),
               std::invalid_argument);
  EXPECT_THROW(coupling_kind_from_string("optimal"), std::invalid_argument);
}
