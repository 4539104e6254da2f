#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icelab/plan/spec.hpp"
#include "icelab/sim/scenario.hpp"

namespace icelab {

struct Diagnostic {
  std::string rule;     // R0..R5, S1, P1, M1, C1
  std::string context;  // "primary" or "sensitivity.<name>"
  std::string message;

  bool operator==(const Diagnostic&) const = default;
};

struct ValidationReport {
  std::vector<Diagnostic> errors;
  std::vector<Diagnostic> warnings;
  EstimandSpec resolved_plan;

  bool ok() const { return errors.empty(); }
  bool clean() const { return errors.empty() && warnings.empty(); }
};

/// Strategy/method pairings that match the method's assumption.
inline bool compatible(EstimandStrategy::Kind s, ImputationMethod::Kind m) {
  using S = EstimandStrategy::Kind;
  using M = ImputationMethod::Kind;
  switch (s) {
    case S::CDH: return m == M::MarMI || m == M::SpecialPattern;
    case S::NTH: return m == M::ReturnToBaseline || m == M::RetrievedDropout || m == M::JumpToReference;
    case S::PTH: return m == M::RetrievedDropout || m == M::CopyReference;
    case S::TreatmentPolicy:
    case S::DTR: return m == M::RetrievedDropout || m == M::MarMI;
    default: return false;
  }
}

namespace detail {

inline std::string key_name(IceCause c) { return std::string(to_string(c)); }
inline std::string key_name(IceKind k) { return std::string(to_string(k)); }

inline void check_plan(const EstimandSpec& p, const std::string& ctx, const std::optional<sim::ScenarioConfig>& scenario,
                       bool loe_sensitivity, ValidationReport& r) {
  using S = EstimandStrategy::Kind;
  using M = ImputationMethod::Kind;
  auto error = [&](std::string rule, std::string msg) { r.errors.push_back({std::move(rule), ctx, std::move(msg)}); };
  auto warn = [&](std::string rule, std::string msg) { r.warnings.push_back({std::move(rule), ctx, std::move(msg)}); };
  const auto& sa = p.strategies;

  for (IceCause c : sa.regimen_causes)
    if (sa.by_cause.count(c))
      error("R0", key_name(c) + " is declared part of the treatment regimen and also given an ICE strategy; "
                                "only deviations from the regimen are intercurrent events");
  for (IceKind k : sa.regimen_kinds)
    if (sa.by_kind.count(k))
      error("R0", key_name(k) + " is declared part of the treatment regimen and also given an ICE strategy; "
                                "only deviations from the regimen are intercurrent events");

  for (IceCause c : kAllCauses)
    if (!sa.regimen_causes.count(c) && !sa.by_cause.count(c))
      error("S1", "no strategy for ICE cause " + key_name(c));

  auto check_strategy = [&](const std::string& who, const EstimandStrategy& s, bool pandemic) {
    if (s.kind == S::Composite)
      error("R3", who + ": Composite is not an ICE strategy; redefine the endpoint instead "
                        "(endpoint = composite with the event listed under [composite] failure)");
    if (s.kind == S::PrincipalStratum)
      error("P1", who + ": PrincipalStratum defines the population, not an ICE strategy; "
                        "use population = principal_stratum(c)");
    if (s.kind == S::TreatmentPolicy) {
      if (pandemic)
        error("R1", who + ": the treatment policy strategy should not be applied to pandemic-related ICEs");
      else if (!p.pragmatic)
        warn("R2", who + ": the treatment policy strategy should generally be avoided outside pragmatic trials");
    }
  };
  for (const auto& [c, s] : sa.by_cause) check_strategy(key_name(c), s, is_pandemic(c));
  for (const auto& [k, s] : sa.by_kind) {
    bool pandemic = false;
    for (IceCause c : kAllCauses)
      if (is_pandemic(c) && !sa.regimen_causes.count(c)) pandemic = true;
    check_strategy(key_name(k), s, pandemic);
  }

  for (IceCause c : kAllCauses)
    if (!sa.regimen_causes.count(c) && !p.imputation.by_cause.count(c))
      error("M1", "no imputation method for ICE cause " + key_name(c));
  if (!p.non_ice) error("M1", "no imputation method for NonIce missingness");
  else if (p.non_ice->kind != M::MarMI)
    warn("C1", "NonIce missingness is random; " + to_string(*p.non_ice) + " does not match a MAR mechanism");

  // Pairing check over every (cause, kind) event the plan can meet.
  std::vector<std::string> seen;
  for (IceCause c : kAllCauses)
    for (IceKind k : kAllKinds) {
      IceEvent e{c, 1, k, false};
      if (sa.in_regimen(e)) continue;
      auto s = sa.strategy_for(e);
      const auto* m = p.method_for(e);
      if (!s || !m || s->kind == S::Composite || s->kind == S::PrincipalStratum) continue;
      if (m->kind == M::SpecialPattern && sa.regimen_causes.count(m->pattern))
        error("M2", key_name(c) + ": SpecialPattern donor cause " + key_name(m->pattern) +
                        " is part of the regimen and never an ICE");
      if (compatible(s->kind, m->kind)) continue;
      const std::string who = p.imputation.by_kind.count(k) || sa.by_kind.count(k) ? key_name(k) : key_name(c);
      std::string msg = who + ": " + to_string(*m) + " does not match the assumption of strategy " + to_string(*s);
      if (std::find(seen.begin(), seen.end(), msg) != seen.end()) continue;
      seen.push_back(msg);
      warn("C1", msg);
    }

  if (scenario) {
    for (IceCause c : kAllCauses) {
      bool uses_rd = false;
      for (IceKind k : kAllKinds) {
        IceEvent e{c, 1, k, false};
        if (sa.in_regimen(e)) continue;
        const auto* m = p.method_for(e);
        if (m && m->kind == M::RetrievedDropout) uses_rd = true;
      }
      if (!uses_rd) continue;
      bool donors_possible = false;
      for (const auto& h : scenario->hazards)
        if (h.cause == c && h.kind != IceKind::Death && h.withdraw_prob < 1.0 && std::isfinite(h.intercept))
          donors_possible = true;
      if (!donors_possible)
        warn("R4", key_name(c) + ": RetrievedDropout configured but the scenario never observes patients after "
                                 "this ICE; imputation will fail with no retrieved dropouts");
    }
  }

  if (!sa.regimen_causes.count(IceCause::LackOfEfficacy)) {
    auto it = sa.by_cause.find(IceCause::LackOfEfficacy);
    if (it != sa.by_cause.end() && it->second.kind == S::CDH && !p.loe_prior_visits_collected && !loe_sensitivity)
      warn("R5", "LackOfEfficacy handled by CDH without guaranteed collection of the visits before the ICE; "
                 "add a special-pattern or delta sensitivity for LackOfEfficacy");
  }
}

inline bool has_loe_sensitivity(const EstimandSpec& s) {
  auto covers = [](const EventMap<ImputationMethod>& im, const EventMap<double>& d) {
    auto it = im.by_cause.find(IceCause::LackOfEfficacy);
    if (it != im.by_cause.end() && it->second.kind == ImputationMethod::Kind::SpecialPattern) return true;
    return d.by_cause.count(IceCause::LackOfEfficacy) > 0;
  };
  if (covers(s.imputation, s.delta)) return true;
  for (const auto& sens : s.sensitivities)
    if (covers(sens.imputation, sens.delta)) return true;
  return false;
}

inline EstimandSpec normalize(EstimandSpec s) {
  std::sort(s.sensitivities.begin(), s.sensitivities.end(),
            [](const Sensitivity& a, const Sensitivity& b) { return a.name < b.name; });
  auto& f = s.endpoint.composite.failure_events;
  std::sort(f.begin(), f.end(), [](const FailureEvent& a, const FailureEvent& b) {
    if (a.kind != b.kind) return a.kind < b.kind;
    return a.cause < b.cause;
  });
  f.erase(std::unique(f.begin(), f.end()), f.end());
  if (!s.endpoint.is_composite()) s.endpoint.composite = {};
  return s;
}

}  // namespace detail

/// Checks the primary plan and every sensitivity's effective plan. A
/// sensitivity only reports findings its primary plan does not already have.
inline ValidationReport validate_spec(const EstimandSpec& spec,
                                      const std::optional<sim::ScenarioConfig>& scenario = std::nullopt) {
  ValidationReport r;
  const bool loe_sens = detail::has_loe_sensitivity(spec);
  detail::check_plan(spec, "primary", scenario, loe_sens, r);
  for (const auto& s : spec.sensitivities) {
    ValidationReport sub;
    detail::check_plan(apply_sensitivity(spec, s), "sensitivity." + s.name, scenario, true, sub);
    auto fresh = [&](const Diagnostic& d, const std::vector<Diagnostic>& base) {
      for (const auto& b : base)
        if (b.rule == d.rule && b.message == d.message) return false;
      return true;
    };
    for (auto& d : sub.errors)
      if (fresh(d, r.errors)) r.errors.push_back(d);
    for (auto& d : sub.warnings)
      if (fresh(d, r.warnings)) r.warnings.push_back(d);
  }
  r.resolved_plan = detail::normalize(spec);
  return r;
}

inline nlohmann::json to_json(const Diagnostic& d) {
  return {{"rule", d.rule}, {"context", d.context}, {"message", d.message}};
}

/// Per-cause table of the resolved plan, for reports.
inline nlohmann::json plan_table(const EstimandSpec& p) {
  nlohmann::json rows = nlohmann::json::array();
  for (IceCause c : kAllCauses) {
    nlohmann::json row{{"cause", std::string(to_string(c))}};
    if (p.strategies.regimen_causes.count(c)) {
      row["strategy"] = "regimen";
    } else {
      auto s = p.strategies.by_cause.find(c);
      row["strategy"] = s == p.strategies.by_cause.end() ? nlohmann::json() : nlohmann::json(to_string(s->second));
      auto m = p.imputation.by_cause.find(c);
      row["imputation"] = m == p.imputation.by_cause.end() ? nlohmann::json() : nlohmann::json(to_string(m->second));
      if (auto d = p.delta.by_cause.find(c); d != p.delta.by_cause.end()) row["delta"] = d->second;
    }
    rows.push_back(row);
  }
  for (IceKind k : kAllKinds) {
    nlohmann::json row{{"kind", std::string(to_string(k))}};
    bool any = false;
    if (p.strategies.regimen_kinds.count(k)) {
      row["strategy"] = "regimen";
      any = true;
    }
    if (auto s = p.strategies.by_kind.find(k); s != p.strategies.by_kind.end()) {
      row["strategy"] = to_string(s->second);
      any = true;
    }
    if (auto m = p.imputation.by_kind.find(k); m != p.imputation.by_kind.end()) {
      row["imputation"] = to_string(m->second);
      any = true;
    }
    if (auto d = p.delta.by_kind.find(k); d != p.delta.by_kind.end()) {
      row["delta"] = d->second;
      any = true;
    }
    if (any) rows.push_back(row);
  }
  rows.push_back({{"cause", "NonIce"}, {"imputation", p.non_ice ? nlohmann::json(to_string(*p.non_ice)) : nlohmann::json()}});
  return rows;
}

inline nlohmann::json to_json(const ValidationReport& r) {
  nlohmann::json j;
  j["ok"] = r.ok();
  j["errors"] = nlohmann::json::array();
  j["warnings"] = nlohmann::json::array();
  for (const auto& d : r.errors) j["errors"].push_back(to_json(d));
  for (const auto& d : r.warnings) j["warnings"].push_back(to_json(d));
  j["resolved_plan"] = plan_table(r.resolved_plan);
  nlohmann::json sens = nlohmann::json::array();
  for (const auto& s : r.resolved_plan.sensitivities)
    sens.push_back({{"name", s.name}, {"plan", plan_table(apply_sensitivity(r.resolved_plan, s))}});
  j["sensitivities"] = sens;
  return j;
}

inline std::string to_text(const ValidationReport& r) {
  std::string out;
  for (const auto& d : r.errors) out += "error [" + d.rule + "] (" + d.context + "): " + d.message + "\n";
  for (const auto& d : r.warnings) out += "warning [" + d.rule + "] (" + d.context + "): " + d.message + "\n";
  out += std::to_string(r.errors.size()) + " error(s), " + std::to_string(r.warnings.size()) + " warning(s)\n";
  return out;
}

}  // namespace icelab
