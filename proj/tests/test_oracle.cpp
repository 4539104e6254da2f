#include <gtest/gtest.h>

#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "icelab/icelab.hpp"

using namespace icelab;
using sim::ScenarioConfig;

namespace {

constexpr long kN = 200'000;

double Phi(double x) { return boost::math::cdf(boost::math::normal(), x); }

ScenarioConfig base() {
  auto c = sim::make_basic_scenario(4, {-0.3, -0.5, -0.6, -0.7}, {-0.8, -1.3, -1.6, -2.0}, {0.0, 0.0, 0.0, 0.0});
  c.seed = 2024;
  c.washout = 0.5;
  return c;
}

sim::HazardSpec admin_at_visit1(double p) {
  const double eta = p <= 0 ? -sim::kInf : p >= 1 ? sim::kInf : std::log(p / (1 - p));
  return {IceCause::AdminDocumented, IceKind::Discontinuation, eta, 0.0, 0.0, 0.0, {1}};
}

}  // namespace

TEST(OracleCdh, ClosedFormIsExactUnderRankPreservation) {
  auto c = base();
  c.hazards.push_back({IceCause::LackOfEfficacy, IceKind::Discontinuation, -1.0, 0.5, 0.0, 1.0, {}});
  const auto t = oracle::true_cdh(c, kN);
  EXPECT_EQ(t.value, -2.0 - -0.7);
  EXPECT_EQ(t.mc_se, 0.0);
  EXPECT_EQ(t.value, oracle::closed_form_cdh(c));
}

TEST(OracleCdh, IdenticalArmsGiveZero) {
  auto c = sim::make_basic_scenario(3, {-1, -1, -1}, {-1, -1, -1}, {0, 0, 0});
  EXPECT_EQ(oracle::true_cdh(c, 10'000).value, 0.0);
}

TEST(OracleNth, ZeroHazardEqualsCdh) {
  auto c = base();
  EXPECT_EQ(oracle::true_nth(c, kN).value, oracle::true_cdh(c, kN).value);
}

TEST(OracleNth, McarAdminEventsScaleTheEffect) {
  auto c = base();
  const double p = 0.3;
  c.hazards.push_back(admin_at_visit1(p));
  const auto t = oracle::true_nth(c, kN);
  const double expected = (1 - p) * (-2.0 - -0.7);
  EXPECT_GT(t.mc_se, 0.0);
  EXPECT_NEAR(t.value, expected, 4 * t.mc_se);
}

TEST(OracleNth, Boundaries) {
  auto c = base();
  c.hazards.push_back(admin_at_visit1(0.0));
  EXPECT_EQ(oracle::true_nth(c, kN).value, -2.0 - -0.7);
  c.hazards[0] = admin_at_visit1(1.0);
  EXPECT_EQ(oracle::true_nth(c, kN).value, 0.0);
}

TEST(OraclePth, FullRetentionEqualsCdh) {
  auto c = base();
  c.washout = 1.0;
  c.hazards.push_back({IceCause::AeNormal, IceKind::Discontinuation, -1.0, 0.3, 0.2, 0.5, {}});
  EXPECT_EQ(oracle::true_pth(c, kN).value, oracle::true_cdh(c, kN).value);
}

TEST(OraclePth, ImmediateWashoutAtFirstVisitEqualsNth) {
  auto c = sim::make_basic_scenario(4, {0.0, -0.5, -0.6, -0.7}, {0.0, -1.3, -1.6, -2.0}, {0.0, 0.1, 0.2, 0.3});
  c.washout = 0.0;
  c.hazards.push_back({IceCause::AeNormal, IceKind::Discontinuation, -0.5, 0.0, 0.4, 0.0, {1}});
  const auto pth = oracle::true_pth(c, kN);
  const auto nth = oracle::true_nth(c, kN);
  EXPECT_NEAR(pth.value, nth.value, std::max(pth.mc_se, 1e-12));
}

TEST(OracleStrategies, ZeroHazardAllCoincide) {
  auto c = base();
  const double cdh = oracle::true_cdh(c, kN).value;
  EXPECT_EQ(oracle::true_pth(c, kN).value, cdh);
  EXPECT_EQ(oracle::true_treatment_policy(c, kN).value, cdh);
  EXPECT_EQ(oracle::true_dtr(c, sim::kInf, kN).value, cdh);
}

TEST(OracleTreatmentPolicy, RescueInControlAttenuates) {
  auto c = base();
  c.rescue_effect = -1.0;
  c.hazards.push_back({IceCause::LackOfEfficacy, IceKind::RescueStart, 0.0, 0.5, -60.0, 0.0, {}});
  const auto tp = oracle::true_treatment_policy(c, kN);
  const auto cdh = oracle::true_cdh(c, kN);
  EXPECT_LT(cdh.value, 0.0);
  EXPECT_GT(tp.value, cdh.value + 4 * tp.mc_se);
  EXPECT_LT(std::abs(tp.value), std::abs(cdh.value));
}

TEST(OracleTreatmentPolicy, UniversalRescueCancels) {
  auto c = base();
  c.rescue_effect = 2.0;
  c.hazards.push_back({IceCause::LackOfEfficacy, IceKind::RescueStart, sim::kInf, 0.0, 0.0, 0.0, {1}});
  EXPECT_NEAR(oracle::true_treatment_policy(c, kN).value, oracle::true_cdh(c, kN).value, 1e-12);
}

TEST(OracleDtr, InfiniteThresholds) {
  auto c = base();
  c.rescue_effect = 1.5;
  const double cdh = oracle::true_cdh(c, kN).value;
  EXPECT_EQ(oracle::true_dtr(c, sim::kInf, kN).value, cdh);
  EXPECT_NEAR(oracle::true_dtr(c, -sim::kInf, kN).value, cdh, 1e-12);
}

TEST(OracleDtr, FiniteThresholdMatchesNormalTail) {
  // Two visits: rescue reaches the final visit iff Z(1) = mu_a(1) + e_1 > delta.
  auto c = sim::make_basic_scenario(2, {-0.3, -0.7}, {-1.0, -2.0}, {0.0, 0.0});
  c.rescue_effect = 1.2;
  const double delta = -0.5;
  const auto t = oracle::true_dtr(c, delta, kN);
  const double p1 = 1 - Phi(delta - -1.0), p0 = 1 - Phi(delta - -0.3);
  const double expected = (-2.0 - -0.7) + c.rescue_effect * (p1 - p0);
  EXPECT_NEAR(t.value, expected, 4 * t.mc_se);
}

TEST(OraclePrincipalStratum, FullPopulationIdentity) {
  auto c = base();
  c.rescue_effect = 0.8;
  c.hazards.push_back({IceCause::AeNormal, IceKind::Discontinuation, -1.5, 0.4, 0.3, 0.5, {}});
  c.hazards.push_back({IceCause::LackOfEfficacy, IceKind::RescueStart, -2.0, 0.6, 0.0, 0.0, {}});
  for (auto inner : {EstimandStrategy::cdh(), EstimandStrategy::nth(), EstimandStrategy::pth(),
                     EstimandStrategy::treatment_policy(), EstimandStrategy::dtr(0.0)}) {
    SCOPED_TRACE(to_string(inner));
    const auto ps = oracle::true_principal_stratum(c, -sim::kInf, inner, 50'000);
    const auto plain = oracle::evaluate(c, oracle::single_strategy_target(inner), 50'000, oracle::default_options(c));
    EXPECT_EQ(ps.value, plain.value);
    EXPECT_EQ(*ps.stratum_prevalence, 1.0);
  }
}

TEST(OraclePrincipalStratum, EmptyStratumIsAnError) {
  EXPECT_THROW(oracle::true_principal_stratum(base(), 1e9, EstimandStrategy::cdh(), 10'000), OracleError);
}

TEST(OraclePrincipalStratum, ConstantEffectMakesStratumIrrelevant) {
  auto c = base();
  c.ps_visit = 2;
  const auto ps = oracle::true_principal_stratum(c, -1.0, EstimandStrategy::cdh(), kN);
  EXPECT_EQ(ps.value, oracle::true_cdh(c, kN).value);
  ASSERT_TRUE(ps.stratum_prevalence);
  EXPECT_GT(*ps.stratum_prevalence, 0.0);
  EXPECT_LT(*ps.stratum_prevalence, 1.0);
  // S(1,1) at visit 2 is N(-1.3, 1): prevalence of S > -1
  EXPECT_NEAR(*ps.stratum_prevalence, 1 - Phi(-1.0 - -1.3), 4 * std::sqrt(0.25 / kN));
}

TEST(OracleComposite, TrivialThresholdGivesZero) {
  CompositeEndpoint e;
  e.threshold = sim::kInf;
  EXPECT_EQ(oracle::true_composite(base(), e, 10'000).value, 0.0);
  e.threshold = -sim::kInf;
  e.direction = CompositeEndpoint::Direction::AtLeast;
  EXPECT_EQ(oracle::true_composite(base(), e, 10'000).value, 0.0);
}

TEST(OracleComposite, ZeroHazardMatchesGaussianTails) {
  auto c = base();
  CompositeEndpoint e;
  e.threshold = -1.0;
  const auto t = oracle::true_composite(c, e, kN);
  const double expected = Phi(-1.0 - -2.0) - Phi(-1.0 - -0.7);
  EXPECT_NEAR(t.value, expected, 4 * t.mc_se);
}

TEST(OracleComposite, RescueInEveryExperimentalPatient) {
  auto c = base();
  c.hazards.push_back({IceCause::LackOfEfficacy, IceKind::RescueStart, -60.0, 0.0, 120.0, 0.0, {2}});
  CompositeEndpoint e;
  e.threshold = -1.0;
  e.failure_events.push_back({IceKind::RescueStart, std::nullopt});
  const auto t = oracle::true_composite(c, e, kN);
  // arm-1 success proportion is 0, so the contrast is minus the arm-0 proportion
  EXPECT_NEAR(t.value, -Phi(-1.0 - -0.7), 4 * t.mc_se);
}

TEST(Oracle, DeterministicAcrossJobCounts) {
  auto c = base();
  c.hazards.push_back({IceCause::AeNormal, IceKind::Discontinuation, -1.0, 0.5, 0.2, 0.5, {}});
  auto target = oracle::single_strategy_target(EstimandStrategy::nth());
  const auto a = oracle::evaluate(c, target, 30'000, {7, 1});
  const auto b = oracle::evaluate(c, target, 30'000, {7, 4});
  const auto d = oracle::evaluate(c, target, 30'000, {8, 1});
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.mc_se, b.mc_se);
  EXPECT_NE(a.value, d.value);
}

TEST(Oracle, FirstEventChoosesTheRegimen) {
  PatientRecord p;
  p.ice_history[1] = {{IceCause::AeNormal, 2, IceKind::Discontinuation, false},
                      {IceCause::LackOfEfficacy, 3, IceKind::RescueStart, false}};
  StrategyAssignment a = StrategyAssignment::uniform(EstimandStrategy::cdh());
  a.by_cause[IceCause::AeNormal] = EstimandStrategy::pth();
  EXPECT_EQ(oracle::target_regimen(p, 1, a), Regimen::partial_until(1, 2));
  EXPECT_EQ(oracle::target_regimen(p, 0, a), Regimen::actual_policy(0));
  a.regimen_causes.insert(IceCause::AeNormal);
  EXPECT_EQ(oracle::target_regimen(p, 1, a), Regimen::assigned_full(1));
  a.by_kind[IceKind::RescueStart] = EstimandStrategy::nth();
  EXPECT_EQ(oracle::target_regimen(p, 1, a), Regimen::no_treatment());
  a.by_kind[IceKind::RescueStart] = EstimandStrategy::composite();
  EXPECT_THROW(oracle::target_regimen(p, 1, a), OracleError);
}
