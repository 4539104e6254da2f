#pragma once

// Estimand spec: the five estimand attributes, the ICE strategy map,
// per-event imputation methods, delta shifts and named sensitivity variants.

#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "icelab/oracle/target.hpp"

namespace icelab {

struct ImputationMethod {
  enum class Kind { MarMI, ReturnToBaseline, RetrievedDropout, JumpToReference, CopyReference, SpecialPattern };
  Kind kind = Kind::MarMI;
  IceCause pattern = IceCause::LackOfEfficacy;  // SpecialPattern donor cause

  static ImputationMethod mar() { return {Kind::MarMI}; }
  static ImputationMethod return_to_baseline() { return {Kind::ReturnToBaseline}; }
  static ImputationMethod retrieved_dropout() { return {Kind::RetrievedDropout}; }
  static ImputationMethod jump_to_reference() { return {Kind::JumpToReference}; }
  static ImputationMethod copy_reference() { return {Kind::CopyReference}; }
  static ImputationMethod special_pattern(IceCause c) { return {Kind::SpecialPattern, c}; }

  bool operator==(const ImputationMethod& o) const {
    return kind == o.kind && (kind != Kind::SpecialPattern || pattern == o.pattern);
  }
};

inline std::string to_string(ImputationMethod::Kind k) {
  using K = ImputationMethod::Kind;
  switch (k) {
    case K::MarMI: return "MarMI";
    case K::ReturnToBaseline: return "ReturnToBaseline";
    case K::RetrievedDropout: return "RetrievedDropout";
    case K::JumpToReference: return "JumpToReference";
    case K::CopyReference: return "CopyReference";
    case K::SpecialPattern: return "SpecialPattern";
  }
  return "?";
}

inline std::string to_string(const ImputationMethod& m) {
  if (m.kind == ImputationMethod::Kind::SpecialPattern)
    return "SpecialPattern(" + std::string(to_string(m.pattern)) + ")";
  return to_string(m.kind);
}

/// Values keyed by ICE cause or by ICE kind; a kind entry overrides the cause entry.
template <class V>
struct EventMap {
  std::map<IceCause, V> by_cause;
  std::map<IceKind, V> by_kind;

  const V* lookup(const IceEvent& e) const {
    if (auto it = by_kind.find(e.kind); it != by_kind.end()) return &it->second;
    if (auto it = by_cause.find(e.cause); it != by_cause.end()) return &it->second;
    return nullptr;
  }
  bool empty() const { return by_cause.empty() && by_kind.empty(); }
  void merge_from(const EventMap& o) {
    for (const auto& [k, v] : o.by_cause) by_cause[k] = v;
    for (const auto& [k, v] : o.by_kind) by_kind[k] = v;
  }
  bool operator==(const EventMap&) const = default;
};

struct Sensitivity {
  std::string name;
  EventMap<EstimandStrategy> strategy;
  EventMap<ImputationMethod> imputation;
  std::optional<ImputationMethod> non_ice;
  EventMap<double> delta;

  bool operator==(const Sensitivity&) const = default;
};

struct EstimandSpec {
  Population population;
  Endpoint endpoint;
  int reference_arm = kControl;
  bool pragmatic = false;
  bool loe_prior_visits_collected = false;
  StrategyAssignment strategies;  // also holds the regimen declaration
  EventMap<ImputationMethod> imputation;
  std::optional<ImputationMethod> non_ice;
  EventMap<double> delta;
  std::vector<Sensitivity> sensitivities;

  bool operator==(const EstimandSpec&) const = default;

  const ImputationMethod* method_for(const IceEvent& e) const { return imputation.lookup(e); }
  std::optional<double> delta_for(const IceEvent& e) const {
    if (const double* d = delta.lookup(e)) return *d;
    return std::nullopt;
  }
};

/// The plan a sensitivity analysis runs: the primary spec with the
/// sensitivity's entries laid over it. The result has no sensitivities.
inline EstimandSpec apply_sensitivity(const EstimandSpec& spec, const Sensitivity& s) {
  EstimandSpec out = spec;
  out.sensitivities.clear();
  for (const auto& [k, v] : s.strategy.by_cause) out.strategies.by_cause[k] = v;
  for (const auto& [k, v] : s.strategy.by_kind) out.strategies.by_kind[k] = v;
  out.imputation.merge_from(s.imputation);
  if (s.non_ice) out.non_ice = s.non_ice;
  out.delta.merge_from(s.delta);
  return out;
}

inline const Sensitivity& find_sensitivity(const EstimandSpec& spec, const std::string& name) {
  for (const auto& s : spec.sensitivities)
    if (s.name == name) return s;
  throw PlanError("no sensitivity named '" + name + "'");
}

/// Oracle target of the plan's strategy map, population and endpoint.
inline EstimandTarget to_target(const EstimandSpec& spec, std::string label) {
  return {std::move(label), spec.strategies, spec.population, spec.endpoint};
}

// ---------------------------------------------------------------------------
// Canonical text form; parse_spec(serialize(s)) == s.

namespace detail {

template <class V, class F>
void write_event_map(std::ostream& os, const EventMap<V>& m, const std::string& prefix, F fmt) {
  for (const auto& [k, v] : m.by_cause) os << prefix << to_string(k) << " = " << fmt(v) << '\n';
  for (const auto& [k, v] : m.by_kind) os << prefix << to_string(k) << " = " << fmt(v) << '\n';
}

inline std::string strategy_text(const EstimandStrategy& s) {
  if (s.kind == EstimandStrategy::Kind::PrincipalStratum)
    return "PrincipalStratum(" + format_param(s.param) + ", " + to_string(s.inner_strategy()) + ")";
  return to_string(s);
}

}  // namespace detail

inline std::string to_string(CompositeEndpoint::Direction d) {
  return d == CompositeEndpoint::Direction::AtMost ? "at_most" : "at_least";
}

inline std::string serialize(const EstimandSpec& s) {
  std::ostringstream os;
  auto yes_no = [](bool b) { return b ? "true" : "false"; };
  os << "[estimand]\n";
  os << "population = " << to_string(s.population) << '\n';
  os << "endpoint = " << (s.endpoint.is_composite() ? "composite" : "continuous") << '\n';
  os << "reference_arm = " << s.reference_arm << '\n';
  os << "pragmatic = " << yes_no(s.pragmatic) << '\n';
  os << "loe_prior_visits_collected = " << yes_no(s.loe_prior_visits_collected) << '\n';

  if (s.endpoint.is_composite()) {
    const auto& c = s.endpoint.composite;
    os << "\n[composite]\n";
    os << "threshold = " << format_param(c.threshold) << '\n';
    os << "success = " << to_string(c.direction) << '\n';
    os << "failure =";
    for (std::size_t i = 0; i < c.failure_events.size(); ++i)
      os << (i ? ", " : " ") << to_string(c.failure_events[i]);
    os << '\n';
  }

  os << "\n[regimen]\ninclude =";
  bool first = true;
  for (IceKind k : s.strategies.regimen_kinds) {
    os << (first ? " " : ", ") << to_string(k);
    first = false;
  }
  for (IceCause c : s.strategies.regimen_causes) {
    os << (first ? " " : ", ") << to_string(c);
    first = false;
  }
  os << '\n';

  os << "\n[strategy]\n";
  for (const auto& [k, v] : s.strategies.by_cause) os << to_string(k) << " = " << detail::strategy_text(v) << '\n';
  for (const auto& [k, v] : s.strategies.by_kind) os << to_string(k) << " = " << detail::strategy_text(v) << '\n';

  auto method = [](const ImputationMethod& m) { return to_string(m); };
  auto number = [](double d) { return format_param(d); };
  os << "\n[imputation]\n";
  detail::write_event_map(os, s.imputation, "", method);
  if (s.non_ice) os << "NonIce = " << to_string(*s.non_ice) << '\n';

  if (!s.delta.empty()) {
    os << "\n[delta]\n";
    detail::write_event_map(os, s.delta, "", number);
  }

  for (const auto& sens : s.sensitivities) {
    os << "\n[sensitivity." << sens.name << "]\n";
    detail::write_event_map(os, sens.strategy, "strategy.", detail::strategy_text);
    detail::write_event_map(os, sens.imputation, "imputation.", method);
    if (sens.non_ice) os << "imputation.NonIce = " << to_string(*sens.non_ice) << '\n';
    detail::write_event_map(os, sens.delta, "delta.", number);
  }
  return os.str();
}

}  // namespace icelab
