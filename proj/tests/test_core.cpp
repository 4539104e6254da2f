#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "icelab/icelab.hpp"

using namespace icelab;

namespace {

PatientRecord patient_with(std::vector<IceEvent> arm0, std::vector<IceEvent> arm1) {
  PatientRecord p;
  p.ice_history[0] = std::move(arm0);
  p.ice_history[1] = std::move(arm1);
  return p;
}

CompositeEndpoint at_most(double c, std::vector<FailureEvent> f = {}) {
  CompositeEndpoint e;
  e.threshold = c;
  e.direction = CompositeEndpoint::Direction::AtMost;
  e.failure_events = std::move(f);
  return e;
}

}  // namespace

TEST(VisitSchedule, RejectsBaselineOnly) {
  EXPECT_THROW(VisitSchedule(0), ConfigError);
  VisitSchedule s(4);
  EXPECT_EQ(s.size(), 5);
  EXPECT_EQ(s.times(), (std::vector<int>{0, 1, 2, 3, 4}));
}

TEST(IceIndicator, NoEventsIsZero) {
  auto p = patient_with({}, {});
  EXPECT_EQ(ice_indicator(p, 1), 0);
  EXPECT_FALSE(first_ice_visit(p, 1));
}

TEST(IceIndicator, DeathUnderControlCountsForControlOnly) {
  auto p = patient_with({{IceCause::AeNormal, 2, IceKind::Death, true}}, {});
  EXPECT_EQ(ice_indicator(p, 0), 1);
  EXPECT_EQ(ice_indicator(p, 1), 0);
  EXPECT_EQ(*first_ice_visit(p, 0), 2);
  EXPECT_THROW(ice_indicator(p, 2), Error);
}

TEST(Composite, RescueForcesFailure) {
  auto e = at_most(-1.0, {{IceKind::RescueStart, std::nullopt}});
  EXPECT_EQ(composite_success(-3.0, {{IceCause::LackOfEfficacy, 3, IceKind::RescueStart, false}}, e), 0);
  EXPECT_EQ(composite_success(-3.0, {}, e), 1);
  EXPECT_EQ(composite_success(0.0, {}, e), 0);
}

TEST(Composite, DeathIsFailureRegardlessOfValues) {
  auto e = at_most(10.0, {{IceKind::Death, std::nullopt}});
  EXPECT_EQ(composite_success(-100.0, {{IceCause::AeNormal, 1, IceKind::Death, true}}, e), 0);
}

TEST(Composite, CauseRestrictedFailure) {
  auto e = at_most(0.0, {{IceKind::Discontinuation, IceCause::LackOfEfficacy}});
  EXPECT_EQ(composite_success(-1.0, {{IceCause::AeNormal, 1, IceKind::Discontinuation, false}}, e), 1);
  EXPECT_EQ(composite_success(-1.0, {{IceCause::LackOfEfficacy, 1, IceKind::Discontinuation, false}}, e), 0);
}

TEST(Composite, ObservedPatientNeedsFinalValue) {
  PatientRecord p;
  p.observed.resize(3);
  p.observed[0].value = 0.0;
  p.observed[1].value = 0.0;
  p.observed[2].reason = MissingReason::non_ice();
  EXPECT_THROW(composite_success(p, at_most(0.0)), AnalysisError);
  p.observed[2].value = -0.5;
  EXPECT_EQ(composite_success(p, at_most(0.0)), 1);
}

TEST(Missingness, LatticeOrdering) {
  using M = MissingnessClass;
  const M all[] = {M::MCAR, M::CovMAR, M::MAR, M::MNAR};
  // reflexive, and transitive across the chain MCAR < CovMAR < MAR
  for (M a : all) EXPECT_TRUE(is_special_case_of(a, a));
  EXPECT_TRUE(is_special_case_of(M::MCAR, M::CovMAR));
  EXPECT_TRUE(is_special_case_of(M::CovMAR, M::MAR));
  EXPECT_TRUE(is_special_case_of(M::MCAR, M::MAR));
  EXPECT_FALSE(is_special_case_of(M::MAR, M::MCAR));
  for (M a : all)
    if (a != M::MNAR) {
      EXPECT_FALSE(is_special_case_of(a, M::MNAR));
      EXPECT_FALSE(is_special_case_of(M::MNAR, a));
    }
  for (M a : all)
    for (M b : all)
      for (M c : all)
        if (is_special_case_of(a, b) && is_special_case_of(b, c)) {
          EXPECT_TRUE(is_special_case_of(a, c));
        }
}

TEST(Names, RoundTrip) {
  for (IceCause c : kAllCauses) EXPECT_EQ(parse_cause(to_string(c)), c);
  for (IceKind k : kAllKinds) EXPECT_EQ(parse_kind(to_string(k)), k);
  EXPECT_FALSE(parse_cause("Covid"));
  for (auto r : {MissingReason::none(), MissingReason::non_ice(),
                 MissingReason::from_event({IceCause::AdminLostToFollowUp, 2, IceKind::Discontinuation, true})})
    EXPECT_EQ(*parse_missing_reason(to_string(r)), r);
  EXPECT_FALSE(parse_missing_reason("AeNormal"));
}

TEST(Doubles, ShortestRoundTrip) {
  for (double x : {0.1, -1.2, 1e-300, 123456.789, -0.0, 2.0 / 3.0}) EXPECT_EQ(parse_double(format_double(x)), x);
  EXPECT_EQ(format_double(2.0), "2");
  EXPECT_THROW(parse_double("1.0x"), Error);
}

TEST(Rng, StreamsAreKeyedAndReproducible) {
  auto a = rng::stream(7, rng::Purpose::Patient, {0, 1});
  auto b = rng::stream(7, rng::Purpose::Patient, {0, 1});
  auto c = rng::stream(7, rng::Purpose::Patient, {1, 1});
  auto d = rng::stream(7, rng::Purpose::OraclePatient, {0, 1});
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    auto x = a();
    EXPECT_EQ(x, b());
    seen.insert(x);
  }
  for (int i = 0; i < 1000; ++i) {
    EXPECT_FALSE(seen.count(c()));
    EXPECT_FALSE(seen.count(d()));
  }
}

TEST(Stats, MeanSdMatchesTwoPass) {
  std::vector<double> x;
  for (int i = 0; i < 101; ++i) x.push_back(std::sin(i) * 3.0 + 1e6);
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  const auto r = stats::mean_sd(x);
  EXPECT_NEAR(r.mean, m, 1e-9);
  EXPECT_NEAR(r.var, ss / 100.0, 1e-9);
  std::vector<double> same(7, 0.3);
  EXPECT_EQ(stats::mean_sd(same).mean, 0.3);
  EXPECT_EQ(stats::mean_sd(same).sd, 0.0);
}

TEST(Parallel, ResultsIndependentOfJobCount) {
  std::vector<double> one(500), many(500);
  auto body = [](std::vector<double>& out) {
    return [&out](std::size_t i) {
      auto g = rng::stream(3, {i});
      out[i] = rng::normal(g);
    };
  };
  parallel_for(500, 1, body(one));
  parallel_for(500, 8, body(many));
  EXPECT_EQ(one, many);
  EXPECT_THROW(parallel_for(10, 4, [](std::size_t i) { if (i == 7) throw Error("boom"); }), Error);
}

TEST(DatasetCsv, RoundTripIsExact) {
  auto c = sim::make_basic_scenario(3, {-0.5, -0.7, -1.0}, {-1, -1.5, -2}, {0, 0, 0});
  c.n_per_arm = 20;
  c.seed = 5;
  c.hazards.push_back({IceCause::AeNormal, IceKind::Discontinuation, -1.0, 0.0, 0.0, 0.5, {}});
  c.hazards.push_back({IceCause::AePandemic, IceKind::Death, -3.0, 0.0, 0.0, 0.0, {}});
  c.pandemic_window = std::make_pair(1, 3);
  c.extra_missingness = {0.0, 0.1, 0.1, 0.1};
  const auto data = observe(sim::generate_replicate(c, 4));
  std::stringstream ss;
  write_dataset_csv(ss, 4, data);
  const auto text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "replicate,patient,arm,visit,observed_value,missing_reason,ice_cause,ice_kind");
  const auto back = read_dataset_csv(ss);
  ASSERT_EQ(back.by_replicate.size(), 1u);
  EXPECT_EQ(back.by_replicate.at(4), data);
  std::stringstream again;
  write_dataset_csv(again, 4, back.by_replicate.at(4));
  EXPECT_EQ(again.str(), text);
}

TEST(DatasetCsv, RejectsBadInput) {
  std::stringstream no_header("1,2,3\n");
  EXPECT_THROW(read_dataset_csv(no_header), ParseError);
  std::stringstream gap(std::string(kDatasetHeader) + "\n0,0,0,0,1.5,,,\n0,0,0,2,1.5,,,\n");
  try {
    read_dataset_csv(gap);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::stringstream reasonless(std::string(kDatasetHeader) + "\n0,0,0,0,NA,,,\n");
  EXPECT_THROW(read_dataset_csv(reasonless), ParseError);
}
