#pragma once

// Per-visit handling of one patient's observed record. Several ICEs are
// handled in combination: a hypothetical strategy (CDH, NTH) discards every
// value from its ICE onward and nothing reinstates them. Cells to fill take
// the method of the earliest intercurrent event at or before the visit, so a
// patient who discontinued for an AE and later started rescue is imputed like
// an AE discontinuer who never started rescue.

#include <optional>
#include <vector>

#include "icelab/core/observed.hpp"
#include "icelab/plan/spec.hpp"

namespace icelab {

struct CellDecision {
  enum class Kind { UseObserved, DiscardAndImpute, DeadCell };
  Kind kind = Kind::UseObserved;
  ImputationMethod method;
  std::optional<IceEvent> governing;  // earliest ICE at or before this visit
  bool death = false;                 // at or after a death
  double delta = 0.0;                 // sensitivity shift for the imputed value

  bool imputed() const { return kind == Kind::DiscardAndImpute; }
  bool operator==(const CellDecision&) const = default;
};

inline std::string to_string(const CellDecision& d) {
  switch (d.kind) {
    case CellDecision::Kind::UseObserved: return "UseObserved";
    case CellDecision::Kind::DiscardAndImpute: return "DiscardAndImpute(" + to_string(d.method) + ")";
    case CellDecision::Kind::DeadCell: return "DeadCell";
  }
  return "?";
}

inline std::vector<CellDecision> resolve_patient_strategy(const ObservedPatient& p, const EstimandSpec& spec) {
  using S = EstimandStrategy::Kind;
  const int T = p.final_visit();
  if (T < 1 || p.cells.front().missing()) throw PlanError("patient " + std::to_string(p.id) + ": baseline missing");

  std::vector<const IceEvent*> ices;
  for (const auto& e : p.events)
    if (!spec.strategies.in_regimen(e)) ices.push_back(&e);

  int discard_from = T + 1;
  const IceEvent* discarder = nullptr;  // the hypothetical ICE that removes data from discard_from on
  for (const auto* e : ices) {
    auto s = spec.strategies.strategy_for(*e);
    if (!s)
      throw PlanError("patient " + std::to_string(p.id) + ": ICE cause " + std::string(to_string(e->cause)) +
                      " has no strategy");
    if ((s->kind == S::CDH || s->kind == S::NTH) && e->visit < discard_from) {
      discard_from = e->visit;
      discarder = e;
    }
    if (s->kind == S::Composite || s->kind == S::PrincipalStratum)
      throw PlanError(to_string(*s) + " is not an ICE strategy");
  }

  int dead_from = T + 1;
  if (spec.endpoint.is_composite())
    for (const auto& e : p.events)
      for (const auto& f : spec.endpoint.composite.failure_events)
        if (f.matches(e)) dead_from = std::min(dead_from, e.visit);

  std::optional<int> death_visit;
  for (const auto& e : p.events)
    if (e.kind == IceKind::Death) death_visit = e.visit;

  std::vector<CellDecision> out(static_cast<std::size_t>(T + 1));
  for (int t = 1; t <= T; ++t) {
    auto& d = out[static_cast<std::size_t>(t)];
    if (t >= dead_from) {
      d.kind = CellDecision::Kind::DeadCell;
      continue;
    }
    const bool missing = p.cells[static_cast<std::size_t>(t)].missing();
    if (!missing && t < discard_from) continue;
    d.kind = CellDecision::Kind::DiscardAndImpute;
    if (discarder && t >= discard_from) {
      d.governing = *discarder;
    } else {
      for (const auto* e : ices)
        if (e->visit <= t) {
          d.governing = *e;
          break;
        }
    }
    if (d.governing) {
      const auto* m = spec.method_for(*d.governing);
      if (!m)
        throw PlanError("patient " + std::to_string(p.id) + ": no imputation method for " +
                        std::string(to_string(d.governing->cause)));
      d.method = *m;
      if (auto delta = spec.delta_for(*d.governing)) d.delta = *delta;
    } else {
      if (!spec.non_ice) throw PlanError("no imputation method for NonIce missingness");
      d.method = *spec.non_ice;
    }
    if (death_visit && t >= *death_visit) {
      d.death = true;
      if (auto it = spec.delta.by_kind.find(IceKind::Death); it != spec.delta.by_kind.end()) d.delta = it->second;
    }
  }
  return out;
}

}  // namespace icelab
