#pragma once

#include <string>

#include "icelab/oracle/strategy.hpp"

namespace icelab {

struct Population {
  enum class Kind { AllRandomized, BaselineAbove, BaselineBelow, PrincipalStratum };
  Kind kind = Kind::AllRandomized;
  double threshold = 0.0;

  static Population all() { return {}; }
  static Population baseline_above(double x) { return {Kind::BaselineAbove, x}; }
  static Population baseline_below(double x) { return {Kind::BaselineBelow, x}; }
  static Population principal_stratum(double c) { return {Kind::PrincipalStratum, c}; }

  /// Membership from baseline only; principal strata need S(1,1).
  bool admits_baseline(double baseline) const {
    switch (kind) {
      case Kind::BaselineAbove: return baseline > threshold;
      case Kind::BaselineBelow: return baseline < threshold;
      default: return true;
    }
  }

  bool operator==(const Population&) const = default;
};

inline std::string to_string(const Population& p) {
  switch (p.kind) {
    case Population::Kind::AllRandomized: return "all";
    case Population::Kind::BaselineAbove: return "baseline_above(" + format_param(p.threshold) + ")";
    case Population::Kind::BaselineBelow: return "baseline_below(" + format_param(p.threshold) + ")";
    case Population::Kind::PrincipalStratum: return "principal_stratum(" + format_param(p.threshold) + ")";
  }
  return "?";
}

struct Endpoint {
  enum class Kind { Continuous, Composite };
  Kind kind = Kind::Continuous;
  CompositeEndpoint composite;

  static Endpoint continuous() { return {}; }
  static Endpoint make_composite(CompositeEndpoint c) { return {Kind::Composite, std::move(c)}; }
  bool is_composite() const { return kind == Kind::Composite; }

  bool operator==(const Endpoint& o) const {
    return kind == o.kind && (kind == Kind::Continuous || composite == o.composite);
  }
};

/// Everything the oracle needs to evaluate one estimand.
struct EstimandTarget {
  std::string label;
  StrategyAssignment assignment;
  Population population;
  Endpoint endpoint;
};

}  // namespace icelab
