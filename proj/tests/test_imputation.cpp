#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "icelab/icelab.hpp"

using namespace icelab;

namespace {

EstimandSpec uniform_plan(EstimandStrategy s, ImputationMethod m) {
  EstimandSpec p;
  p.strategies = StrategyAssignment::uniform(s);
  for (IceCause c : kAllCauses) p.imputation.by_cause[c] = m;
  p.non_ice = ImputationMethod::mar();
  return p;
}

sim::ScenarioConfig dropout_scenario(int n = 100) {
  auto c = sim::make_basic_scenario(3, {-0.4, -0.6, -0.8}, {-0.9, -1.4, -1.8}, {0.0, 0.0, 0.0});
  c.n_per_arm = n;
  c.seed = 41;
  c.hazards.push_back({IceCause::LackOfEfficacy, IceKind::Discontinuation, -1.5, 0.8, 0.0, 1.0, {}});
  c.hazards.push_back({IceCause::AeNormal, IceKind::Discontinuation, -2.0, 0.0, 0.3, 0.5, {}});
  c.extra_missingness = {0.0, 0.03, 0.03, 0.03};
  return c;
}

std::vector<ObservedPatient> dataset(const sim::ScenarioConfig& c, std::uint64_t r = 0) {
  return observe(sim::generate_replicate(c, r));
}

ImputeOptions opts(int m, std::uint64_t seed = 5, std::uint64_t replicate = 0) {
  ImputeOptions o;
  o.m = m;
  o.seed = seed;
  o.replicate = replicate;
  return o;
}

int count_imputed(const ImputedDatasetSet& s) {
  int n = 0;
  for (const auto& row : s.provenance)
    for (const auto& c : row) n += c.kind == CellProvenance::Kind::Imputed;
  return n;
}

}  // namespace

TEST(Impute, CompleteDataIsANoOp) {
  auto c = dropout_scenario();
  c.hazards.clear();
  c.extra_missingness.assign(4, 0.0);
  const auto data = dataset(c);
  const auto set = impute(data, uniform_plan(EstimandStrategy::cdh(), ImputationMethod::mar()), opts(4));
  ASSERT_EQ(set.m(), 4);
  EXPECT_EQ(count_imputed(set), 0);
  for (int k = 0; k < set.m(); ++k)
    for (std::size_t i = 0; i < data.size(); ++i)
      for (int v = 0; v <= 3; ++v) EXPECT_EQ(set.value(k, i, v), *data[i].cells[static_cast<std::size_t>(v)].value);
}

TEST(Impute, ObservedCellsNeverChange) {
  const auto data = dataset(dropout_scenario());
  const auto set = impute(data, uniform_plan(EstimandStrategy::cdh(), ImputationMethod::mar()), opts(5));
  ASSERT_GT(count_imputed(set), 0);
  for (int k = 0; k < set.m(); ++k)
    for (std::size_t i = 0; i < data.size(); ++i)
      for (int v = 0; v <= 3; ++v) {
        const auto& cell = data[i].cells[static_cast<std::size_t>(v)];
        if (set.cell(i, v).kind == CellProvenance::Kind::Observed) {
          ASSERT_FALSE(cell.missing());
          EXPECT_EQ(set.value(k, i, v), *cell.value);
        } else {
          EXPECT_TRUE(std::isfinite(set.value(k, i, v)));
        }
      }
}

TEST(Impute, HypotheticalStrategiesDiscardPostEventData) {
  const auto data = dataset(dropout_scenario());
  const auto cdh = impute(data, uniform_plan(EstimandStrategy::cdh(), ImputationMethod::mar()), opts(2));
  const auto tp = impute(data, uniform_plan(EstimandStrategy::treatment_policy(), ImputationMethod::mar()), opts(2));
  EXPECT_GT(count_imputed(cdh), count_imputed(tp));
}

TEST(Impute, DrawsVaryAcrossCopies) {
  const auto data = dataset(dropout_scenario());
  const auto set = impute(data, uniform_plan(EstimandStrategy::cdh(), ImputationMethod::mar()), opts(10));
  for (std::size_t i = 0; i < data.size(); ++i)
    if (set.cell(i, 3).kind == CellProvenance::Kind::Imputed) {
      std::vector<double> v;
      for (int k = 0; k < set.m(); ++k) v.push_back(set.value(k, i, 3));
      EXPECT_GT(stats::mean_sd(v).var, 0.0);
    }
}

TEST(Impute, Deterministic) {
  const auto data = dataset(dropout_scenario());
  const auto plan = uniform_plan(EstimandStrategy::cdh(), ImputationMethod::mar());
  const auto a = impute(data, plan, opts(3, 5, 0));
  const auto b = impute(data, plan, opts(3, 5, 0));
  const auto c = impute(data, plan, opts(3, 5, 1));
  EXPECT_EQ(a.copies, b.copies);
  EXPECT_NE(a.copies, c.copies);
}

TEST(Impute, ReturnToBaselineCentresOnThePatientsBaseline) {
  auto c = dropout_scenario(30);
  c.hazards = {{IceCause::AeNormal, IceKind::Discontinuation, -1.5, 0.0, 0.0, 1.0, {}}};
  c.extra_missingness.assign(4, 0.0);
  const auto data = dataset(c);
  const auto set =
      impute(data, uniform_plan(EstimandStrategy::nth(), ImputationMethod::return_to_baseline()), opts(10'000));
  int checked = 0;
  for (std::size_t i = 0; i < data.size() && checked < 3; ++i) {
    if (set.cell(i, 3).kind != CellProvenance::Kind::Imputed) continue;
    ++checked;
    std::vector<double> v;
    for (int k = 0; k < set.m(); ++k) v.push_back(set.value(k, i, 3));
    const auto ms = stats::mean_sd(v);
    EXPECT_GT(ms.sd, 0.0);
    EXPECT_NEAR(ms.mean, data[i].baseline(), 4 * ms.sd / std::sqrt(static_cast<double>(v.size())));
  }
  EXPECT_EQ(checked, 3);
}

TEST(Impute, JumpToReferenceOnReferenceArmIsMar) {
  const auto data = dataset(dropout_scenario());
  const auto mar = impute(data, uniform_plan(EstimandStrategy::cdh(), ImputationMethod::mar()), opts(4));
  const auto j2r = impute(data, uniform_plan(EstimandStrategy::nth(), ImputationMethod::jump_to_reference()), opts(4));
  int compared = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].arm != kControl) continue;
    for (int k = 0; k < 4; ++k)
      for (int v = 0; v <= 3; ++v) {
        EXPECT_EQ(j2r.value(k, i, v), mar.value(k, i, v));
        compared += j2r.cell(i, v).kind == CellProvenance::Kind::Imputed;
      }
  }
  EXPECT_GT(compared, 0);
}

TEST(Impute, JumpToReferenceMovesExperimentalTowardReference) {
  auto c = dropout_scenario(200);
  c.hazards = {{IceCause::AeNormal, IceKind::Discontinuation, -1.2, 0.0, 0.0, 1.0, {}}};
  c.extra_missingness.assign(4, 0.0);
  const auto data = dataset(c);
  const auto mar = impute(data, uniform_plan(EstimandStrategy::cdh(), ImputationMethod::mar()), opts(20));
  const auto j2r = impute(data, uniform_plan(EstimandStrategy::nth(), ImputationMethod::jump_to_reference()), opts(20));
  double mar_sum = 0.0, j2r_sum = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data[i].arm == kExperimental && mar.cell(i, 3).kind == CellProvenance::Kind::Imputed)
      for (int k = 0; k < 20; ++k) {
        mar_sum += mar.value(k, i, 3);
        j2r_sum += j2r.value(k, i, 3);
        ++n;
      }
  ASSERT_GT(n, 0);
  // control means sit about one unit above the experimental ones at the final visit
  EXPECT_GT(j2r_sum / n - mar_sum / n, 0.5);
}

TEST(Impute, ArmLabelsDoNotMatter) {
  const auto data = dataset(dropout_scenario());
  auto swapped = data;
  for (auto& p : swapped) p.arm = 1 - p.arm;
  auto plan = uniform_plan(EstimandStrategy::nth(), ImputationMethod::jump_to_reference());
  auto plan_swapped = plan;
  plan_swapped.reference_arm = kExperimental;
  const auto a = impute(data, plan, opts(3));
  const auto b = impute(swapped, plan_swapped, opts(3));
  EXPECT_EQ(a.copies, b.copies);
}

TEST(Impute, RetrievedDropoutWithoutDonorsFails) {
  auto c = dropout_scenario();
  c.hazards = {{IceCause::AeNormal, IceKind::Discontinuation, -1.0, 0.0, 0.0, 1.0, {}}};
  const auto data = dataset(c);
  auto plan = uniform_plan(EstimandStrategy::pth(), ImputationMethod::retrieved_dropout());
  plan.strategies.by_cause[IceCause::AeNormal] = EstimandStrategy::treatment_policy();
  try {
    impute(data, plan, opts(2));
    FAIL();
  } catch (const ImputationError& e) {
    EXPECT_NE(std::string(e.what()).find("no retrieved dropouts for cause AeNormal"), std::string::npos);
  }
}

TEST(Impute, RetrievedDropoutUsesOffTreatmentFollowUp) {
  auto c = dropout_scenario(300);
  c.washout = 0.0;
  c.hazards = {{IceCause::AeNormal, IceKind::Discontinuation, -1.5, 0.0, 0.0, 0.4, {}}};
  c.extra_missingness.assign(4, 0.0);
  const auto data = dataset(c);
  const auto set =
      impute(data, uniform_plan(EstimandStrategy::treatment_policy(), ImputationMethod::retrieved_dropout()), opts(20));
  // withdrawn AE patients are imputed from retrieved dropouts, whose off-drug mean is 0
  double sum = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data[i].arm == kExperimental && set.cell(i, 3).kind == CellProvenance::Kind::Imputed)
      for (int k = 0; k < 20; ++k) {
        sum += set.value(k, i, 3);
        ++n;
      }
  ASSERT_GT(n, 0);
  EXPECT_GT(sum / n, -0.9);
}

TEST(Impute, SpecialPatternNeedsDonors) {
  auto c = dropout_scenario();
  c.hazards = {{IceCause::AdminLostToFollowUp, IceKind::Discontinuation, -1.5, 0.0, 0.0, 1.0, {}}};
  const auto data = dataset(c);
  auto plan = uniform_plan(EstimandStrategy::cdh(), ImputationMethod::special_pattern(IceCause::LackOfEfficacy));
  try {
    impute(data, plan, opts(2));
    FAIL();
  } catch (const ImputationError& e) {
    EXPECT_NE(std::string(e.what()).find("special pattern LackOfEfficacy"), std::string::npos);
  }
}

TEST(Impute, ForceMethodOverridesThePlan) {
  const auto data = dataset(dropout_scenario());
  auto o = opts(2);
  o.force_method = ImputationMethod::copy_reference();
  const auto set = impute(data, uniform_plan(EstimandStrategy::cdh(), ImputationMethod::mar()), o);
  for (const auto& row : set.provenance)
    for (const auto& cell : row) {
      if (cell.kind == CellProvenance::Kind::Imputed) {
        EXPECT_EQ(cell.method, ImputationMethod::copy_reference());
      }
    }
}

TEST(Impute, DeathDeltaIsAddedAfterTheDraw) {
  auto c = dropout_scenario();
  c.hazards = {{IceCause::AeNormal, IceKind::Death, -2.0, 0.0, 0.0, 0.0, {}}};
  c.extra_missingness.assign(4, 0.0);
  const auto data = dataset(c);
  auto plan = uniform_plan(EstimandStrategy::cdh(), ImputationMethod::mar());
  const auto plain = impute(data, plan, opts(3));
  plan.delta.by_kind[IceKind::Death] = 2.5;
  const auto shifted = impute(data, plan, opts(3));
  int n = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    for (int v = 1; v <= 3; ++v) {
      const bool imputed = plain.cell(i, v).kind == CellProvenance::Kind::Imputed;
      for (int k = 0; k < 3; ++k) {
        if (imputed) {
          EXPECT_EQ(shifted.value(k, i, v), plain.value(k, i, v) + 2.5);
          ++n;
        } else {
          EXPECT_EQ(shifted.value(k, i, v), plain.value(k, i, v));
        }
      }
    }
  EXPECT_GT(n, 0);
}

TEST(Delta, ZeroIsIdentityAndOnlyImputedCellsQualify) {
  const auto data = dataset(dropout_scenario());
  const auto set = impute(data, uniform_plan(EstimandStrategy::cdh(), ImputationMethod::mar()), opts(3));
  std::vector<CellRef> targets;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (set.cell(i, 3).kind == CellProvenance::Kind::Imputed) targets.push_back({i, 3});
  EXPECT_EQ(apply_delta(set, 0.0, targets).copies, set.copies);
  std::size_t observed = 0;
  while (set.cell(observed, 3).kind != CellProvenance::Kind::Observed) ++observed;
  EXPECT_THROW(apply_delta(set, 1.0, {{observed, 3}}), ImputationError);
}

TEST(Delta, ShiftIsLinearInEveryCopy) {
  const auto data = dataset(dropout_scenario());
  const auto set = impute(data, uniform_plan(EstimandStrategy::cdh(), ImputationMethod::mar()), opts(4));
  std::vector<std::size_t> arm1;
  std::vector<CellRef> targets;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data[i].arm == kExperimental) {
      arm1.push_back(i);
      if (set.cell(i, 3).kind == CellProvenance::Kind::Imputed && targets.size() < 7) targets.push_back({i, 3});
    }
  ASSERT_EQ(targets.size(), 7u);
  const double d = -0.8;
  const auto shifted = apply_delta(set, d, targets);
  const double n = static_cast<double>(arm1.size());
  for (int k = 0; k < set.m(); ++k) {
    double before = 0.0, after = 0.0;
    for (auto i : arm1) {
      before += set.value(k, i, 3);
      after += shifted.value(k, i, 3);
    }
    EXPECT_NEAR(after / n - before / n, d * 7 / n, 1e-12);
  }
  // more shift never lowers the mean
  const auto more = apply_delta(set, 2 * d, targets);
  for (int k = 0; k < set.m(); ++k) {
    double a = 0.0, b = 0.0;
    for (auto i : arm1) {
      a += shifted.value(k, i, 3);
      b += more.value(k, i, 3);
    }
    EXPECT_LT(b, a);
  }
}

TEST(Delta, EqualShiftInBothArmsCancels) {
  const auto data = dataset(dropout_scenario());
  const auto set = impute(data, uniform_plan(EstimandStrategy::cdh(), ImputationMethod::mar()), opts(3));
  std::array<std::vector<std::size_t>, 2> arms;
  for (std::size_t i = 0; i < data.size(); ++i) arms[static_cast<std::size_t>(data[i].arm)].push_back(i);
  ASSERT_EQ(arms[0].size(), arms[1].size());
  std::vector<CellRef> targets;
  for (int a = 0; a < 2; ++a) {
    int k = 0;
    for (auto i : arms[static_cast<std::size_t>(a)])
      if (set.cell(i, 3).kind == CellProvenance::Kind::Imputed && k < 5) {
        targets.push_back({i, 3});
        ++k;
      }
  }
  ASSERT_EQ(targets.size(), 10u);
  const auto shifted = apply_delta(set, 1.25, targets);
  auto diff = [&](const ImputedDatasetSet& s) {
    std::vector<CopyEstimate> est;
    for (int k = 0; k < s.m(); ++k) {
      double m1 = 0.0, m0 = 0.0;
      for (auto i : arms[1]) m1 += s.value(k, i, 3);
      for (auto i : arms[0]) m0 += s.value(k, i, 3);
      est.push_back({m1 / arms[1].size() - m0 / arms[0].size(), 1.0});
    }
    return pool(est).point;
  };
  EXPECT_NEAR(diff(shifted), diff(set), 1e-12);
}

TEST(ImputedCsv, LongFormat) {
  auto c = dropout_scenario(5);
  c.hazards.clear();
  c.extra_missingness.assign(4, 0.0);
  const auto data = dataset(c);
  const auto set = impute(data, uniform_plan(EstimandStrategy::cdh(), ImputationMethod::mar()), opts(2));
  std::ostringstream os;
  write_imputed_csv(os, 3, set);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "replicate,copy,patient,visit,value,provenance,method");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(line.substr(0, 2), "3,");
  }
  EXPECT_EQ(rows, 2 * 10 * 4);
}
