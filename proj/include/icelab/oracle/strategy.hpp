#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "icelab/core/model.hpp"
#include "icelab/core/observed.hpp"

namespace icelab {

/// ICE-handling strategy. DTR carries its threshold in `param`; a principal
/// stratum carries c in `param` and wraps one non-PS inner strategy.
struct EstimandStrategy {
  enum class Kind { CDH, NTH, PTH, TreatmentPolicy, DTR, Composite, PrincipalStratum };

  Kind kind = Kind::CDH;
  double param = 0.0;
  Kind inner = Kind::CDH;
  double inner_param = 0.0;

  static EstimandStrategy cdh() { return {Kind::CDH}; }
  static EstimandStrategy nth() { return {Kind::NTH}; }
  static EstimandStrategy pth() { return {Kind::PTH}; }
  static EstimandStrategy treatment_policy() { return {Kind::TreatmentPolicy}; }
  static EstimandStrategy dtr(double delta) { return {Kind::DTR, delta}; }
  static EstimandStrategy composite() { return {Kind::Composite}; }
  static EstimandStrategy principal_stratum(double c, const EstimandStrategy& in) {
    if (in.kind == Kind::PrincipalStratum) throw Error("a principal stratum wraps exactly one non-stratum strategy");
    return {Kind::PrincipalStratum, c, in.kind, in.param};
  }

  EstimandStrategy inner_strategy() const { return {inner, inner_param}; }
  bool is_hypothetical() const { return kind == Kind::CDH || kind == Kind::NTH || kind == Kind::PTH; }

  bool operator==(const EstimandStrategy& o) const {
    if (kind != o.kind) return false;
    if (kind == Kind::DTR) return param == o.param;
    if (kind == Kind::PrincipalStratum)
      return param == o.param && inner == o.inner && (inner != Kind::DTR || inner_param == o.inner_param);
    return true;
  }
};

inline std::string to_string(EstimandStrategy::Kind k) {
  using K = EstimandStrategy::Kind;
  switch (k) {
    case K::CDH: return "CDH";
    case K::NTH: return "NTH";
    case K::PTH: return "PTH";
    case K::TreatmentPolicy: return "TreatmentPolicy";
    case K::DTR: return "DTR";
    case K::Composite: return "Composite";
    case K::PrincipalStratum: return "PrincipalStratum";
  }
  return "?";
}

inline std::string format_param(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return format_double(x);
}

inline std::string to_string(const EstimandStrategy& s) {
  using K = EstimandStrategy::Kind;
  switch (s.kind) {
    case K::DTR: return "DTR(" + format_param(s.param) + ")";
    case K::PrincipalStratum: return "PrincipalStratum(" + format_param(s.param) + "," + to_string(s.inner_strategy()) + ")";
    default: return to_string(s.kind);
  }
}

/// Which strategy handles which event. Kind-level entries override the
/// cause-level entry; events named in the regimen sets are part of the
/// treatment regimen and are not intercurrent events.
struct StrategyAssignment {
  std::map<IceCause, EstimandStrategy> by_cause;
  std::map<IceKind, EstimandStrategy> by_kind;
  std::set<IceKind> regimen_kinds;
  std::set<IceCause> regimen_causes;

  static StrategyAssignment uniform(const EstimandStrategy& s) {
    StrategyAssignment a;
    for (IceCause c : kAllCauses) a.by_cause[c] = s;
    return a;
  }

  bool in_regimen(const IceEvent& e) const { return regimen_kinds.count(e.kind) || regimen_causes.count(e.cause); }

  std::optional<EstimandStrategy> strategy_for(const IceEvent& e) const {
    if (auto it = by_kind.find(e.kind); it != by_kind.end()) return it->second;
    if (auto it = by_cause.find(e.cause); it != by_cause.end()) return it->second;
    return std::nullopt;
  }

  bool operator==(const StrategyAssignment&) const = default;
};

}  // namespace icelab
