#pragma once

// Domain vocabulary shared by every module: visit schedules, treatment
// regimens, intercurrent events, potential-outcome trajectories and the
// per-patient record that bundles them.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "icelab/error.hpp"

namespace icelab {

inline constexpr int kControl = 0;
inline constexpr int kExperimental = 1;

inline void require_arm(int arm) {
  if (arm != kControl && arm != kExperimental) throw Error("arm must be 0 or 1, got " + std::to_string(arm));
}

// ---------------------------------------------------------------------------
// Visit schedule

/// Discrete visits 0..T; visit 0 is baseline.
class VisitSchedule {
public:
  explicit VisitSchedule(int final_visit) : final_visit_(final_visit) {
    if (final_visit < 1) throw ConfigError("schedule needs baseline plus at least one post-baseline visit");
  }

  int final_visit() const noexcept { return final_visit_; }
  int size() const noexcept { return final_visit_ + 1; }

  std::vector<int> times() const {
    std::vector<int> t(static_cast<std::size_t>(size()));
    for (int v = 0; v < size(); ++v) t[static_cast<std::size_t>(v)] = v;
    return t;
  }

  bool operator==(const VisitSchedule&) const = default;

private:
  int final_visit_;
};

// ---------------------------------------------------------------------------
// Regimens

struct Regimen {
  enum class Kind { AssignedFull, NoTreatment, PartialUntil, ActualPolicy, DynamicRule };

  Kind kind = Kind::AssignedFull;
  int arm = kControl;        // unused for NoTreatment
  int stop_visit = 0;        // PartialUntil only
  double threshold = 0.0;    // DynamicRule only

  static Regimen assigned_full(int arm) { return {Kind::AssignedFull, arm, 0, 0.0}; }
  static Regimen no_treatment() { return {Kind::NoTreatment, kControl, 0, 0.0}; }
  static Regimen partial_until(int arm, int stop) { return {Kind::PartialUntil, arm, stop, 0.0}; }
  static Regimen actual_policy(int arm) { return {Kind::ActualPolicy, arm, 0, 0.0}; }
  static Regimen dynamic_rule(int arm, double delta) { return {Kind::DynamicRule, arm, 0, delta}; }

  bool operator==(const Regimen& o) const {
    if (kind != o.kind) return false;
    switch (kind) {
      case Kind::NoTreatment: return true;
      case Kind::PartialUntil: return arm == o.arm && stop_visit == o.stop_visit;
      case Kind::DynamicRule: return arm == o.arm && threshold == o.threshold;
      default: return arm == o.arm;
    }
  }
};

inline std::string to_string(const Regimen& r) {
  switch (r.kind) {
    case Regimen::Kind::AssignedFull: return "AssignedFull(" + std::to_string(r.arm) + ")";
    case Regimen::Kind::NoTreatment: return "NoTreatment";
    case Regimen::Kind::PartialUntil:
      return "PartialUntil(" + std::to_string(r.arm) + "," + std::to_string(r.stop_visit) + ")";
    case Regimen::Kind::ActualPolicy: return "ActualPolicy(" + std::to_string(r.arm) + ")";
    case Regimen::Kind::DynamicRule:
      return "DynamicRule(" + std::to_string(r.arm) + "," + std::to_string(r.threshold) + ")";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Intercurrent events

enum class IceCause : std::uint8_t {
  AeNormal,
  AePandemic,
  LackOfEfficacy,
  AdminDocumented,
  AdminLostToFollowUp,
  PandemicControl,
};

inline constexpr std::array<IceCause, 6> kAllCauses = {
    IceCause::AeNormal,        IceCause::AePandemic,          IceCause::LackOfEfficacy,
    IceCause::AdminDocumented, IceCause::AdminLostToFollowUp, IceCause::PandemicControl,
};

inline std::string_view to_string(IceCause c) {
  switch (c) {
    case IceCause::AeNormal: return "AeNormal";
    case IceCause::AePandemic: return "AePandemic";
    case IceCause::LackOfEfficacy: return "LackOfEfficacy";
    case IceCause::AdminDocumented: return "AdminDocumented";
    case IceCause::AdminLostToFollowUp: return "AdminLostToFollowUp";
    case IceCause::PandemicControl: return "PandemicControl";
  }
  return "?";
}

inline std::optional<IceCause> parse_cause(std::string_view s) {
  for (IceCause c : kAllCauses)
    if (to_string(c) == s) return c;
  return std::nullopt;
}

inline bool is_pandemic(IceCause c) { return c == IceCause::AePandemic || c == IceCause::PandemicControl; }

enum class IceKind : std::uint8_t { Discontinuation, RescueStart, Death, ProlongedInterruption };

inline constexpr std::array<IceKind, 4> kAllKinds = {
    IceKind::Discontinuation, IceKind::RescueStart, IceKind::Death, IceKind::ProlongedInterruption};

inline std::string_view to_string(IceKind k) {
  switch (k) {
    case IceKind::Discontinuation: return "Discontinuation";
    case IceKind::RescueStart: return "RescueStart";
    case IceKind::Death: return "Death";
    case IceKind::ProlongedInterruption: return "ProlongedInterruption";
  }
  return "?";
}

inline std::optional<IceKind> parse_kind(std::string_view s) {
  for (IceKind k : kAllKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

/// An event dated `visit` happens after the assessment at visit-1 and
/// affects the outcome from `visit` onward.
struct IceEvent {
  IceCause cause = IceCause::AeNormal;
  int visit = 1;
  IceKind kind = IceKind::Discontinuation;
  bool withdrawal = false;  // patient leaves the study: no data from `visit` on

  bool stops_data() const { return withdrawal || kind == IceKind::Death; }
  bool operator==(const IceEvent&) const = default;
};

// ---------------------------------------------------------------------------
// Trajectories and observed data

/// Outcome path under one regimen. `values = mean + residual`, with the
/// residual shared by every regimen of the patient.
struct PotentialTrajectory {
  Regimen regimen;
  std::vector<double> mean;
  std::vector<double> values;

  double final_value() const { return values.back(); }
  double final_mean() const { return mean.back(); }
};

struct MissingReason {
  enum class Kind : std::uint8_t { None, NonIce, Ice };
  Kind kind = Kind::None;
  IceCause cause = IceCause::AeNormal;
  IceKind ice_kind = IceKind::Discontinuation;

  static MissingReason none() { return {}; }
  static MissingReason non_ice() { return {Kind::NonIce, IceCause::AeNormal, IceKind::Discontinuation}; }
  static MissingReason from_event(const IceEvent& e) { return {Kind::Ice, e.cause, e.kind}; }

  bool operator==(const MissingReason& o) const {
    if (kind != o.kind) return false;
    return kind != Kind::Ice || (cause == o.cause && ice_kind == o.ice_kind);
  }
};

/// "" for observed cells, "NonIce", or "<Cause>/<Kind>".
inline std::string to_string(const MissingReason& r) {
  switch (r.kind) {
    case MissingReason::Kind::None: return "";
    case MissingReason::Kind::NonIce: return "NonIce";
    case MissingReason::Kind::Ice:
      return std::string(to_string(r.cause)) + "/" + std::string(to_string(r.ice_kind));
  }
  return "";
}

inline std::optional<MissingReason> parse_missing_reason(std::string_view s) {
  if (s.empty()) return MissingReason::none();
  if (s == "NonIce") return MissingReason::non_ice();
  auto slash = s.find('/');
  if (slash == std::string_view::npos) return std::nullopt;
  auto c = parse_cause(s.substr(0, slash));
  auto k = parse_kind(s.substr(slash + 1));
  if (!c || !k) return std::nullopt;
  return MissingReason{MissingReason::Kind::Ice, *c, *k};
}

struct ObservedCell {
  std::optional<double> value;
  MissingReason reason;

  bool missing() const { return !value.has_value(); }
};

struct PatientRecord {
  int id = 0;
  double baseline_covariate = 0.0;  // the visit-0 outcome
  int assigned_arm = kControl;
  std::vector<double> residual;     // shared by every regimen
  std::vector<PotentialTrajectory> trajectories;
  std::array<std::vector<IceEvent>, 2> ice_history;
  std::array<std::vector<double>, 2> intermediate;  // Z(a): on-treatment values at visits 1..T
  double ps_variable = 0.0;                          // S(1,1)
  std::vector<ObservedCell> observed;
  std::vector<double> nonice_draws;                  // uniforms consumed by the observation model

  const PotentialTrajectory* find(const Regimen& r) const {
    auto it = std::find_if(trajectories.begin(), trajectories.end(),
                           [&](const PotentialTrajectory& t) { return t.regimen == r; });
    return it == trajectories.end() ? nullptr : &*it;
  }

  const PotentialTrajectory& trajectory(const Regimen& r) const {
    const auto* t = find(r);
    if (!t) throw Error("patient " + std::to_string(id) + " has no trajectory for " + to_string(r));
    return *t;
  }

  const std::vector<IceEvent>& events(int arm) const {
    require_arm(arm);
    return ice_history[static_cast<std::size_t>(arm)];
  }
};

/// Delta_i(a): 1 iff the patient has at least one event under `arm`.
inline int ice_indicator(const PatientRecord& p, int arm) { return p.events(arm).empty() ? 0 : 1; }

/// T_i(a): visit of the first event under `arm`.
inline std::optional<int> first_ice_visit(const PatientRecord& p, int arm) {
  const auto& ev = p.events(arm);
  if (ev.empty()) return std::nullopt;
  return ev.front().visit;
}

// ---------------------------------------------------------------------------
// Missingness mechanisms

enum class MissingnessClass : std::uint8_t { MNAR, MAR, CovMAR, MCAR };

inline std::string_view to_string(MissingnessClass m) {
  switch (m) {
    case MissingnessClass::MNAR: return "MNAR";
    case MissingnessClass::MAR: return "MAR";
    case MissingnessClass::CovMAR: return "CovMAR";
    case MissingnessClass::MCAR: return "MCAR";
  }
  return "?";
}

/// Lattice MCAR ⊂ CovMAR ⊂ MAR; MNAR is only a special case of itself.
inline bool is_special_case_of(MissingnessClass narrow, MissingnessClass wide) {
  if (narrow == wide) return true;
  if (narrow == MissingnessClass::MNAR || wide == MissingnessClass::MNAR) return false;
  auto rank = [](MissingnessClass m) {
    return m == MissingnessClass::MCAR ? 0 : m == MissingnessClass::CovMAR ? 1 : 2;
  };
  return rank(narrow) <= rank(wide);
}

// ---------------------------------------------------------------------------
// Composite endpoint

struct FailureEvent {
  IceKind kind = IceKind::RescueStart;
  std::optional<IceCause> cause;  // any cause when empty

  bool matches(const IceEvent& e) const { return e.kind == kind && (!cause || *cause == e.cause); }
  bool operator==(const FailureEvent&) const = default;
};

inline std::string to_string(const FailureEvent& f) {
  std::string s(to_string(f.kind));
  if (f.cause) s += ":" + std::string(to_string(*f.cause));
  return s;
}

struct CompositeEndpoint {
  enum class Direction { AtMost, AtLeast };

  double threshold = 0.0;
  Direction direction = Direction::AtMost;
  std::vector<FailureEvent> failure_events;

  bool meets_threshold(double final_value) const {
    return direction == Direction::AtMost ? final_value <= threshold : final_value >= threshold;
  }

  bool has_failure(const std::vector<IceEvent>& events) const {
    for (const auto& e : events)
      for (const auto& f : failure_events)
        if (f.matches(e)) return true;
    return false;
  }

  bool operator==(const CompositeEndpoint&) const = default;
};

/// Success on an explicit final value: outcome criterion met and no failure event.
inline int composite_success(double final_value, const std::vector<IceEvent>& events,
                             const CompositeEndpoint& endpoint) {
  if (endpoint.has_failure(events)) return 0;
  return endpoint.meets_threshold(final_value) ? 1 : 0;
}

/// Success on the patient's observed data under the assigned arm.
inline int composite_success(const PatientRecord& p, const CompositeEndpoint& endpoint) {
  const auto& events = p.events(p.assigned_arm);
  if (endpoint.has_failure(events)) return 0;
  if (p.observed.empty() || p.observed.back().missing())
    throw AnalysisError("patient " + std::to_string(p.id) +
                        ": final value missing, composite success requires imputation first");
  return endpoint.meets_threshold(*p.observed.back().value) ? 1 : 0;
}

}  // namespace icelab
