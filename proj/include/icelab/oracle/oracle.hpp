#pragma once

// True estimand values by direct evaluation over simulated counterfactuals.
//
// For each oracle patient and each arm, the potential outcome of interest is
// selected by the strategy of the first intercurrent event on that arm's
// counterfactual ICE process:
//   none -> ActualPolicy (equal to AssignedFull unless regimen events occurred)
//   CDH  -> AssignedFull(a)       NTH -> NoTreatment
//   PTH  -> PartialUntil(a, T(a)) TreatmentPolicy -> ActualPolicy(a)
//   DTR(delta) -> DynamicRule(a, delta)
// Later events on the same arm are subsumed by the regimen the first one
// selects. Residuals are shared across regimens, so a patient's continuous
// contrast is an exact mean difference.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "icelab/oracle/target.hpp"
#include "icelab/sim/simulator.hpp"
#include "icelab/util/parallel.hpp"
#include "icelab/util/summary_stats.hpp"

namespace icelab::oracle {

inline constexpr long kDefaultOracleN = 1'000'000;

struct TrueEstimand {
  std::string label;
  double value = 0.0;
  double mc_se = 0.0;
  long n_oracle = 0;   // patients generated
  long n_used = 0;     // patients in the target population
  std::optional<double> stratum_prevalence;
};

struct OracleOptions {
  std::uint64_t seed = 1;
  unsigned jobs = 1;
};

/// Threshold of an assignment that maps every cause to the same DTR. A pure
/// rule-based estimand puts every patient on the rule, with or without an ICE.
inline std::optional<double> uniform_dtr(const StrategyAssignment& assign) {
  std::optional<double> delta;
  auto check = [&](const EstimandStrategy& s) {
    if (s.kind != EstimandStrategy::Kind::DTR || (delta && *delta != s.param)) return false;
    delta = s.param;
    return true;
  };
  if (assign.by_cause.size() != kAllCauses.size()) return std::nullopt;
  for (const auto& [c, s] : assign.by_cause)
    if (!check(s)) return std::nullopt;
  for (const auto& [k, s] : assign.by_kind)
    if (!check(s)) return std::nullopt;
  return delta;
}

/// Regimen whose outcome defines the estimand for `arm`.
inline Regimen target_regimen(const PatientRecord& p, int arm, const StrategyAssignment& assign) {
  const IceEvent* first = nullptr;
  for (const auto& e : p.events(arm))
    if (!assign.in_regimen(e)) {
      first = &e;
      break;
    }
  if (!first) {
    if (auto d = uniform_dtr(assign)) return Regimen::dynamic_rule(arm, *d);
    return Regimen::actual_policy(arm);
  }
  auto s = assign.strategy_for(*first);
  if (!s) throw OracleError(std::string("no strategy for ICE cause ") + std::string(to_string(first->cause)));
  using K = EstimandStrategy::Kind;
  switch (s->kind) {
    case K::CDH: return Regimen::assigned_full(arm);
    case K::NTH: return Regimen::no_treatment();
    case K::PTH: return Regimen::partial_until(arm, first->visit);
    case K::TreatmentPolicy: return Regimen::actual_policy(arm);
    case K::DTR: return Regimen::dynamic_rule(arm, s->param);
    case K::Composite:
      throw OracleError("composite is an endpoint definition, not an ICE strategy");
    case K::PrincipalStratum:
      throw OracleError("a principal stratum defines a population, not an ICE strategy");
  }
  return Regimen::assigned_full(arm);
}

struct PatientContrast {
  bool included = false;
  bool in_stratum = true;
  double contrast = 0.0;
};

inline PatientContrast patient_contrast(const sim::ScenarioConfig& c, const PatientRecord& p, const EstimandTarget& t) {
  PatientContrast out;
  if (t.population.kind == Population::Kind::PrincipalStratum) {
    out.in_stratum = p.ps_variable > t.population.threshold;
    if (!out.in_stratum) return out;
  } else if (!t.population.admits_baseline(p.baseline_covariate)) {
    return out;
  }
  out.included = true;
  const auto T = static_cast<std::size_t>(c.final_visit);
  std::array<double, 2> final_mean{};
  std::array<double, 2> final_value{};
  for (int a = 0; a < 2; ++a) {
    const Regimen r = target_regimen(p, a, t.assignment);
    const auto* stored = p.find(r);
    const auto mean = stored ? stored->mean : sim::regimen_mean(c, p, r);
    final_mean[static_cast<std::size_t>(a)] = mean[T];
    final_value[static_cast<std::size_t>(a)] = mean[T] + p.residual[T];
  }
  if (t.endpoint.is_composite()) {
    const int s1 = composite_success(final_value[1], p.events(kExperimental), t.endpoint.composite);
    const int s0 = composite_success(final_value[0], p.events(kControl), t.endpoint.composite);
    out.contrast = static_cast<double>(s1 - s0);
  } else {
    out.contrast = final_mean[1] - final_mean[0];
  }
  return out;
}

/// Evaluates several targets over one shared oracle sample.
inline std::vector<TrueEstimand> evaluate(const sim::ScenarioConfig& c, const std::vector<EstimandTarget>& targets,
                                          long n_oracle, const OracleOptions& opt = {}) {
  if (n_oracle < 1) throw OracleError("n_oracle must be >= 1");
  const auto chol = sim::residual_factor(c);
  const auto N = static_cast<std::size_t>(n_oracle);
  const std::size_t K = targets.size();
  std::vector<double> contrast(N * K, std::numeric_limits<double>::quiet_NaN());
  std::vector<unsigned char> in_stratum(N * K, 0);

  constexpr std::size_t kBlock = 4096;
  const std::size_t blocks = (N + kBlock - 1) / kBlock;
  parallel_for(blocks, opt.jobs, [&](std::size_t b) {
    const std::size_t lo = b * kBlock, hi = std::min(N, lo + kBlock);
    for (std::size_t i = lo; i < hi; ++i) {
      auto g = rng::stream(opt.seed, rng::Purpose::OraclePatient, {i});
      const auto p = sim::generate_patient(c, chol, g, static_cast<int>(i), static_cast<int>(i % 2));
      for (std::size_t k = 0; k < K; ++k) {
        const auto pc = patient_contrast(c, p, targets[k]);
        in_stratum[i * K + k] = pc.in_stratum ? 1 : 0;
        if (pc.included) contrast[i * K + k] = pc.contrast;
      }
    }
  });

  std::vector<TrueEstimand> out;
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<double> xs;
    xs.reserve(N);
    std::size_t stratum = 0;
    for (std::size_t i = 0; i < N; ++i) {
      stratum += in_stratum[i * K + k];
      if (!std::isnan(contrast[i * K + k])) xs.push_back(contrast[i * K + k]);
    }
    TrueEstimand te;
    te.label = targets[k].label;
    te.n_oracle = n_oracle;
    te.n_used = static_cast<long>(xs.size());
    if (targets[k].population.kind == Population::Kind::PrincipalStratum) {
      te.stratum_prevalence = static_cast<double>(stratum) / static_cast<double>(N);
      if (stratum == 0)
        throw OracleError("stratum prevalence zero at threshold c = " + format_param(targets[k].population.threshold));
    }
    if (xs.empty()) throw OracleError("target population '" + to_string(targets[k].population) + "' is empty");
    const auto ms = stats::mean_sd(xs);
    te.value = ms.mean;
    te.mc_se = ms.sd / std::sqrt(static_cast<double>(xs.size()));
    out.push_back(std::move(te));
  }
  return out;
}

inline TrueEstimand evaluate(const sim::ScenarioConfig& c, const EstimandTarget& t, long n_oracle,
                             const OracleOptions& opt = {}) {
  return evaluate(c, std::vector<EstimandTarget>{t}, n_oracle, opt).front();
}

inline EstimandTarget single_strategy_target(const EstimandStrategy& s, Endpoint endpoint = Endpoint::continuous()) {
  EstimandTarget t;
  t.label = to_string(s);
  t.endpoint = std::move(endpoint);
  if (s.kind == EstimandStrategy::Kind::PrincipalStratum) {
    t.assignment = StrategyAssignment::uniform(s.inner_strategy());
    t.population = Population::principal_stratum(s.param);
  } else {
    t.assignment = StrategyAssignment::uniform(s);
  }
  return t;
}

inline OracleOptions default_options(const sim::ScenarioConfig& c) { return {c.seed, 1}; }

inline TrueEstimand true_cdh(const sim::ScenarioConfig& c, long n = kDefaultOracleN) {
  return evaluate(c, single_strategy_target(EstimandStrategy::cdh()), n, default_options(c));
}

inline TrueEstimand true_nth(const sim::ScenarioConfig& c, long n = kDefaultOracleN) {
  return evaluate(c, single_strategy_target(EstimandStrategy::nth()), n, default_options(c));
}

inline TrueEstimand true_pth(const sim::ScenarioConfig& c, long n = kDefaultOracleN) {
  return evaluate(c, single_strategy_target(EstimandStrategy::pth()), n, default_options(c));
}

inline TrueEstimand true_treatment_policy(const sim::ScenarioConfig& c, long n = kDefaultOracleN) {
  return evaluate(c, single_strategy_target(EstimandStrategy::treatment_policy()), n, default_options(c));
}

inline TrueEstimand true_dtr(const sim::ScenarioConfig& c, double delta, long n = kDefaultOracleN) {
  return evaluate(c, single_strategy_target(EstimandStrategy::dtr(delta)), n, default_options(c));
}

inline TrueEstimand true_principal_stratum(const sim::ScenarioConfig& c, double threshold, const EstimandStrategy& inner,
                                           long n = kDefaultOracleN) {
  return evaluate(c, single_strategy_target(EstimandStrategy::principal_stratum(threshold, inner)), n,
                  default_options(c));
}

/// Difference in success proportions on each arm's actual course.
inline TrueEstimand true_composite(const sim::ScenarioConfig& c, const CompositeEndpoint& endpoint,
                                   long n = kDefaultOracleN) {
  auto t = single_strategy_target(EstimandStrategy::treatment_policy(), Endpoint::make_composite(endpoint));
  t.label = "Composite";
  return evaluate(c, t, n, default_options(c));
}

/// Closed form forced by the linear model: mu_1(T) - mu_0(T).
inline double closed_form_cdh(const sim::ScenarioConfig& c) {
  const auto T = static_cast<std::size_t>(c.final_visit);
  return c.arm_means(kExperimental)[T] - c.arm_means(kControl)[T];
}

}  // namespace icelab::oracle
