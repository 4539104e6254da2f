#pragma once

#include "icelab/plan/spec.hpp"

namespace icelab {

/// Cause-based road map from ICE category to strategy and imputation method.
/// Alternates are carried as named sensitivity analyses.
inline EstimandSpec default_plan() {
  using S = EstimandStrategy;
  using M = ImputationMethod;
  EstimandSpec p;
  p.population = Population::all();
  p.endpoint = Endpoint::continuous();
  p.reference_arm = kControl;

  auto& st = p.strategies.by_cause;
  st[IceCause::AeNormal] = S::nth();
  st[IceCause::AePandemic] = S::cdh();
  st[IceCause::LackOfEfficacy] = S::cdh();
  st[IceCause::AdminDocumented] = S::cdh();
  st[IceCause::AdminLostToFollowUp] = S::cdh();
  st[IceCause::PandemicControl] = S::cdh();

  auto& im = p.imputation.by_cause;
  im[IceCause::AeNormal] = M::return_to_baseline();
  im[IceCause::AePandemic] = M::mar();
  im[IceCause::LackOfEfficacy] = M::mar();
  im[IceCause::AdminDocumented] = M::mar();
  im[IceCause::AdminLostToFollowUp] = M::special_pattern(IceCause::LackOfEfficacy);
  im[IceCause::PandemicControl] = M::mar();
  p.non_ice = M::mar();

  Sensitivity ae_pth{"ae_partial_hypothetical", {}, {}, std::nullopt, {}};
  ae_pth.strategy.by_cause[IceCause::AeNormal] = S::pth();
  ae_pth.imputation.by_cause[IceCause::AeNormal] = M::retrieved_dropout();

  Sensitivity ae_rd{"ae_retrieved_dropout", {}, {}, std::nullopt, {}};
  ae_rd.imputation.by_cause[IceCause::AeNormal] = M::retrieved_dropout();

  Sensitivity death_down{"death_delta_minus", {}, {}, std::nullopt, {}};
  death_down.delta.by_kind[IceKind::Death] = -1.0;
  Sensitivity death_up{"death_delta_plus", {}, {}, std::nullopt, {}};
  death_up.delta.by_kind[IceKind::Death] = 1.0;

  Sensitivity loe{"loe_special_pattern", {}, {}, std::nullopt, {}};
  loe.imputation.by_cause[IceCause::LackOfEfficacy] = M::special_pattern(IceCause::LackOfEfficacy);

  p.sensitivities = {ae_pth, ae_rd, death_down, death_up, loe};
  return p;
}

}  // namespace icelab
