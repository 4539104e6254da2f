#pragma once

// Line-oriented spec grammar:
//
//   # comment
//   [section]
//   key = value
//
// Sections: estimand, composite, regimen, strategy, imputation, delta and any
// number of sensitivity.<name>. Every error carries a 1-based line/column.

#include <cctype>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "icelab/plan/spec.hpp"

namespace icelab {

namespace parse_detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

struct Loc {
  std::size_t line;
  std::size_t column;
};

[[noreturn]] inline void fail(const std::string& msg, Loc at) { throw ParseError(msg, at.line, at.column); }

inline double number(std::string_view s, Loc at) {
  s = trim(s);
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  try {
    double x = parse_double(s);
    if (std::isnan(x)) fail("malformed number '" + std::string(s) + "'", at);
    return x;
  } catch (const ParseError&) {
    throw;
  } catch (const Error&) {
    fail("malformed number '" + std::string(s) + "'", at);
  }
}

/// "Name(args)" -> {"Name", "args"}; no parentheses -> {"Name", nullopt}.
inline std::pair<std::string_view, std::optional<std::string_view>> call(std::string_view s, Loc at) {
  s = trim(s);
  auto open = s.find('(');
  if (open == std::string_view::npos) return {s, std::nullopt};
  if (s.back() != ')') fail("expected ')' in '" + std::string(s) + "'", at);
  return {trim(s.substr(0, open)), s.substr(open + 1, s.size() - open - 2)};
}

inline std::vector<std::string_view> list(std::string_view s) {
  std::vector<std::string_view> out;
  s = trim(s);
  if (s.empty()) return out;
  std::size_t depth = 0, start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(') ++depth;
    if (s[i] == ')' && depth) --depth;
    if (s[i] == ',' && depth == 0) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  out.push_back(trim(s.substr(start)));
  return out;
}

inline EstimandStrategy strategy(std::string_view text, Loc at) {
  using S = EstimandStrategy;
  auto [name, args] = call(text, at);
  auto no_args = [&, name = name, args = args](S s) {
    if (args) fail("strategy " + std::string(name) + " takes no arguments", at);
    return s;
  };
  if (name == "CDH") return no_args(S::cdh());
  if (name == "NTH") return no_args(S::nth());
  if (name == "PTH") return no_args(S::pth());
  if (name == "TreatmentPolicy") return no_args(S::treatment_policy());
  if (name == "Composite") return no_args(S::composite());
  if (name == "DTR") {
    if (!args) fail("DTR needs a threshold: DTR(delta)", at);
    return S::dtr(number(*args, at));
  }
  if (name == "PrincipalStratum") {
    if (!args) fail("PrincipalStratum needs (c, strategy)", at);
    auto parts = list(*args);
    if (parts.size() != 2) fail("PrincipalStratum needs (c, strategy)", at);
    auto inner = strategy(parts[1], at);
    if (inner.kind == S::Kind::PrincipalStratum) fail("PrincipalStratum cannot be nested", at);
    return S::principal_stratum(number(parts[0], at), inner);
  }
  fail("unknown strategy '" + std::string(trim(text)) + "'", at);
}

inline ImputationMethod method(std::string_view text, Loc at) {
  using M = ImputationMethod;
  auto [name, args] = call(text, at);
  if (name == "SpecialPattern") {
    if (!args) fail("SpecialPattern needs a donor cause: SpecialPattern(Cause)", at);
    auto c = parse_cause(trim(*args));
    if (!c) fail("unknown ICE cause '" + std::string(trim(*args)) + "'", at);
    return M::special_pattern(*c);
  }
  if (args) fail("method " + std::string(name) + " takes no arguments", at);
  if (name == "MarMI") return M::mar();
  if (name == "ReturnToBaseline") return M::return_to_baseline();
  if (name == "RetrievedDropout") return M::retrieved_dropout();
  if (name == "JumpToReference") return M::jump_to_reference();
  if (name == "CopyReference") return M::copy_reference();
  fail("unknown imputation method '" + std::string(trim(text)) + "'", at);
}

inline bool boolean(std::string_view s, Loc at) {
  s = trim(s);
  if (s == "true") return true;
  if (s == "false") return false;
  fail("expected true or false, got '" + std::string(s) + "'", at);
}

inline Population population(std::string_view text, Loc at) {
  auto [name, args] = call(text, at);
  if (name == "all") {
    if (args) fail("population 'all' takes no arguments", at);
    return Population::all();
  }
  if (!args) fail("population " + std::string(name) + " needs a threshold", at);
  const double x = number(*args, at);
  if (name == "baseline_above") return Population::baseline_above(x);
  if (name == "baseline_below") return Population::baseline_below(x);
  if (name == "principal_stratum") return Population::principal_stratum(x);
  fail("unknown population '" + std::string(trim(text)) + "'", at);
}

inline FailureEvent failure(std::string_view s, Loc at) {
  FailureEvent f;
  auto colon = s.find(':');
  auto k = parse_kind(trim(s.substr(0, colon)));
  if (!k) fail("unknown ICE kind '" + std::string(trim(s.substr(0, colon))) + "'", at);
  f.kind = *k;
  if (colon != std::string_view::npos) {
    auto c = parse_cause(trim(s.substr(colon + 1)));
    if (!c) fail("unknown ICE cause '" + std::string(trim(s.substr(colon + 1))) + "'", at);
    f.cause = *c;
  }
  return f;
}

/// Inserts into an event map; duplicates are caught by the caller's key set.
template <class V>
bool put_event(EventMap<V>& m, std::string_view key, V v) {
  if (auto c = parse_cause(key)) {
    m.by_cause[*c] = std::move(v);
    return true;
  }
  if (auto k = parse_kind(key)) {
    m.by_kind[*k] = std::move(v);
    return true;
  }
  return false;
}

}  // namespace parse_detail

inline EstimandSpec parse_spec(std::string_view text) {
  using namespace parse_detail;
  EstimandSpec spec;
  std::set<std::string> seen_sections;
  std::set<std::string> seen_keys;
  std::string section;
  Sensitivity* sens = nullptr;
  bool composite_threshold = false, composite_success = false;
  std::optional<Loc> composite_at;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    std::string_view line = trim(raw);
    if (line.empty()) continue;
    const std::size_t indent = static_cast<std::size_t>(line.data() - raw.data()) + 1;

    if (line.front() == '[') {
      if (line.back() != ']') fail("expected ']' to close the section header", {line_no, indent + line.size()});
      section = std::string(trim(line.substr(1, line.size() - 2)));
      const bool known = section == "estimand" || section == "composite" || section == "regimen" ||
                         section == "strategy" || section == "imputation" || section == "delta" ||
                         (section.rfind("sensitivity.", 0) == 0 && section.size() > 12);
      if (!known) fail("unknown section '" + section + "'", {line_no, indent + 1});
      if (!seen_sections.insert(section).second) fail("duplicate section [" + section + "]", {line_no, indent});
      sens = nullptr;
      if (section.rfind("sensitivity.", 0) == 0) {
        spec.sensitivities.push_back({section.substr(12), {}, {}, std::nullopt, {}});
        sens = &spec.sensitivities.back();
      }
      if (section == "composite") composite_at = Loc{line_no, indent};
      continue;
    }

    auto eq = line.find('=');
    if (eq == std::string_view::npos) fail("expected 'key = value'", {line_no, indent});
    std::string_view key = trim(line.substr(0, eq));
    std::string_view value_raw = line.substr(eq + 1);
    std::string_view value = trim(value_raw);
    const Loc key_at{line_no, indent};
    const Loc val_at{line_no, indent + eq + 1 + static_cast<std::size_t>(value.data() - value_raw.data())};
    if (section.empty()) fail("key outside of any section", key_at);
    if (key.empty()) fail("empty key", key_at);
    if (!seen_keys.insert(section + "\x1f" + std::string(key)).second)
      fail("duplicate key '" + std::string(key) + "' in [" + section + "]", key_at);
    auto unknown = [&] { fail("unknown key '" + std::string(key) + "' in [" + section + "]", key_at); };

    if (section == "estimand") {
      if (key == "population") spec.population = population(value, val_at);
      else if (key == "endpoint") {
        if (value == "continuous") spec.endpoint.kind = Endpoint::Kind::Continuous;
        else if (value == "composite") spec.endpoint.kind = Endpoint::Kind::Composite;
        else fail("endpoint must be continuous or composite", val_at);
      } else if (key == "reference_arm") {
        if (value == "0") spec.reference_arm = kControl;
        else if (value == "1") spec.reference_arm = kExperimental;
        else fail("reference_arm must be 0 or 1", val_at);
      } else if (key == "pragmatic") spec.pragmatic = boolean(value, val_at);
      else if (key == "loe_prior_visits_collected") spec.loe_prior_visits_collected = boolean(value, val_at);
      else if (key == "summary") {
        if (value != "difference") fail("summary must be 'difference'", val_at);
      } else unknown();
    } else if (section == "composite") {
      auto& c = spec.endpoint.composite;
      if (key == "threshold") {
        c.threshold = number(value, val_at);
        composite_threshold = true;
      } else if (key == "success") {
        if (value == "at_most") c.direction = CompositeEndpoint::Direction::AtMost;
        else if (value == "at_least") c.direction = CompositeEndpoint::Direction::AtLeast;
        else fail("success must be at_most or at_least", val_at);
        composite_success = true;
      } else if (key == "failure") {
        for (auto item : list(value)) c.failure_events.push_back(failure(item, val_at));
      } else unknown();
    } else if (section == "regimen") {
      if (key != "include") unknown();
      for (auto item : list(value)) {
        if (auto k = parse_kind(item)) spec.strategies.regimen_kinds.insert(*k);
        else if (auto c = parse_cause(item)) spec.strategies.regimen_causes.insert(*c);
        else fail("unknown ICE kind or cause '" + std::string(item) + "'", val_at);
      }
    } else if (section == "strategy") {
      auto s = strategy(value, val_at);
      if (auto c = parse_cause(key)) spec.strategies.by_cause[*c] = s;
      else if (auto k = parse_kind(key)) spec.strategies.by_kind[*k] = s;
      else unknown();
    } else if (section == "imputation") {
      auto m = method(value, val_at);
      if (key == "NonIce") spec.non_ice = m;
      else if (!put_event(spec.imputation, key, m)) unknown();
    } else if (section == "delta") {
      if (!put_event(spec.delta, key, number(value, val_at))) unknown();
    } else if (sens) {
      auto dot = key.find('.');
      if (dot == std::string_view::npos) unknown();
      auto group = key.substr(0, dot);
      auto sub = key.substr(dot + 1);
      bool ok = false;
      if (group == "strategy") ok = put_event(sens->strategy, sub, strategy(value, val_at));
      else if (group == "imputation") {
        if (sub == "NonIce") {
          sens->non_ice = method(value, val_at);
          ok = true;
        } else {
          ok = put_event(sens->imputation, sub, method(value, val_at));
        }
      } else if (group == "delta") ok = put_event(sens->delta, sub, number(value, val_at));
      if (!ok) unknown();
    }
  }

  if (spec.endpoint.is_composite() && !(composite_threshold && composite_success))
    fail("composite endpoint needs [composite] threshold and success", composite_at.value_or(Loc{line_no, 1}));
  if (!spec.endpoint.is_composite() && composite_at)
    fail("[composite] given but endpoint is continuous", *composite_at);
  return spec;
}

inline EstimandSpec load_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open spec file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_spec(ss.str());
}

}  // namespace icelab
