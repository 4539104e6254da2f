#pragma once

// YAML front end for ScenarioConfig. Schema (documented in README.md):
//
//   n_per_arm, final_visit, seed, baseline_mean
//   means: {control: [...], experimental: [...], no_treatment: [...]}   (visits 1..T)
//   residual: {cov: [[...]]} | {sd: [...], ar1: rho} | {sd: [...], exchangeable: rho}
//             | {random_walk: {baseline_var: x, step_var: [...]}}
//   washout, rescue_effect, dtr_threshold, extra_missingness (scalar or list of T)
//   principal_stratum: {threshold, visit}
//   pandemic_window: [v1, v2]
//   interruption: {length, prolonged_threshold}
//   hazards: [{cause, kind, intercept, outcome, arm, withdraw, visits}]
//
// Unknown keys are errors.

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "icelab/sim/scenario.hpp"

namespace icelab::sim {

namespace detail {

inline std::string where(const YAML::Node& n) {
  const auto m = n.Mark();
  if (m.line < 0) return "";
  return " (line " + std::to_string(m.line + 1) + ", column " + std::to_string(m.column + 1) + ")";
}

[[noreturn]] inline void yaml_fail(const YAML::Node& n, const std::string& msg) { throw ConfigError(msg + where(n)); }

inline void check_keys(const YAML::Node& map, const std::set<std::string>& allowed, const std::string& ctx) {
  if (!map.IsMap()) yaml_fail(map, ctx + " must be a mapping");
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) yaml_fail(kv.first, "unknown key '" + key + "' in " + ctx);
  }
}

template <class T>
T scalar(const YAML::Node& n, const std::string& what) {
  if (!n.IsScalar()) yaml_fail(n, what + " must be a scalar");
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    yaml_fail(n, "malformed value for " + what);
  }
}

inline std::vector<double> number_list(const YAML::Node& n, const std::string& what) {
  if (!n.IsSequence()) yaml_fail(n, what + " must be a list");
  std::vector<double> out;
  for (const auto& e : n) out.push_back(scalar<double>(e, what));
  return out;
}

}  // namespace detail

inline ScenarioConfig scenario_from_yaml(const YAML::Node& root) {
  using namespace detail;
  check_keys(root,
             {"n_per_arm", "final_visit", "seed", "baseline_mean", "means", "residual", "washout", "rescue_effect",
              "dtr_threshold", "extra_missingness", "principal_stratum", "pandemic_window", "interruption", "hazards"},
             "scenario");
  ScenarioConfig c;
  auto required = [&](const char* key) {
    if (!root[key]) yaml_fail(root, std::string("missing required key '") + key + "'");
    return root[key];
  };
  c.n_per_arm = scalar<int>(required("n_per_arm"), "n_per_arm");
  c.final_visit = scalar<int>(required("final_visit"), "final_visit");
  if (c.final_visit < 1) yaml_fail(root["final_visit"], "final_visit must be >= 1");
  if (root["seed"]) c.seed = scalar<std::uint64_t>(root["seed"], "seed");
  if (root["baseline_mean"]) c.baseline_mean = scalar<double>(root["baseline_mean"], "baseline_mean");
  const auto T = static_cast<std::size_t>(c.final_visit);

  const auto means = required("means");
  check_keys(means, {"control", "experimental", "no_treatment"}, "means");
  auto post = [&](const char* key) {
    if (!means[key]) yaml_fail(means, std::string("means.") + key + " is required");
    auto v = number_list(means[key], std::string("means.") + key);
    if (v.size() != T) yaml_fail(means[key], std::string("means.") + key + " needs " + std::to_string(T) + " values");
    v.insert(v.begin(), c.baseline_mean);
    return v;
  };
  c.on_treatment_means[0] = post("control");
  c.on_treatment_means[1] = post("experimental");
  c.no_treatment_means = post("no_treatment");

  const auto res = required("residual");
  check_keys(res, {"cov", "sd", "ar1", "exchangeable", "random_walk"}, "residual");
  if (res["cov"]) {
    const auto rows = res["cov"];
    if (!rows.IsSequence() || rows.size() != T + 1) yaml_fail(rows, "residual.cov needs " + std::to_string(T + 1) + " rows");
    c.residual_cov.resize(static_cast<Eigen::Index>(T + 1), static_cast<Eigen::Index>(T + 1));
    for (std::size_t i = 0; i <= T; ++i) {
      auto row = number_list(rows[i], "residual.cov row");
      if (row.size() != T + 1) yaml_fail(rows[i], "residual.cov rows need " + std::to_string(T + 1) + " values");
      for (std::size_t j = 0; j <= T; ++j)
        c.residual_cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
  } else if (res["random_walk"]) {
    const auto rw = res["random_walk"];
    check_keys(rw, {"baseline_var", "step_var"}, "residual.random_walk");
    auto steps = number_list(rw["step_var"], "residual.random_walk.step_var");
    if (steps.size() != T) yaml_fail(rw, "random_walk.step_var needs " + std::to_string(T) + " values");
    c.residual_cov = random_walk_covariance(scalar<double>(rw["baseline_var"], "baseline_var"), steps);
  } else {
    if (!res["sd"]) yaml_fail(res, "residual needs cov, random_walk, or sd");
    auto sd = number_list(res["sd"], "residual.sd");
    if (sd.size() != T + 1) yaml_fail(res["sd"], "residual.sd needs " + std::to_string(T + 1) + " values");
    if (res["ar1"] && res["exchangeable"]) yaml_fail(res, "residual: choose ar1 or exchangeable, not both");
    if (res["exchangeable"])
      c.residual_cov = exchangeable_covariance(sd, scalar<double>(res["exchangeable"], "exchangeable"));
    else
      c.residual_cov = ar1_covariance(sd, res["ar1"] ? scalar<double>(res["ar1"], "ar1") : 0.0);
  }

  if (root["washout"]) c.washout = scalar<double>(root["washout"], "washout");
  if (root["rescue_effect"]) c.rescue_effect = scalar<double>(root["rescue_effect"], "rescue_effect");
  if (root["dtr_threshold"]) c.dtr_threshold = scalar<double>(root["dtr_threshold"], "dtr_threshold");

  c.extra_missingness.assign(T + 1, 0.0);
  if (const auto em = root["extra_missingness"]) {
    if (em.IsScalar()) {
      const double p = scalar<double>(em, "extra_missingness");
      for (std::size_t v = 1; v <= T; ++v) c.extra_missingness[v] = p;
    } else {
      auto v = number_list(em, "extra_missingness");
      if (v.size() != T) yaml_fail(em, "extra_missingness list needs " + std::to_string(T) + " values");
      for (std::size_t i = 0; i < T; ++i) c.extra_missingness[i + 1] = v[i];
    }
  }

  if (const auto ps = root["principal_stratum"]) {
    check_keys(ps, {"threshold", "visit"}, "principal_stratum");
    if (ps["threshold"]) c.ps_threshold = scalar<double>(ps["threshold"], "principal_stratum.threshold");
    if (ps["visit"]) c.ps_visit = scalar<int>(ps["visit"], "principal_stratum.visit");
  }

  if (const auto pw = root["pandemic_window"]) {
    if (!pw.IsSequence() || pw.size() != 2) yaml_fail(pw, "pandemic_window must be [v1, v2]");
    c.pandemic_window = std::make_pair(scalar<int>(pw[0], "pandemic_window"), scalar<int>(pw[1], "pandemic_window"));
  }

  if (const auto in = root["interruption"]) {
    check_keys(in, {"length", "prolonged_threshold"}, "interruption");
    if (in["length"]) c.interruption_length = scalar<int>(in["length"], "interruption.length");
    if (in["prolonged_threshold"])
      c.prolonged_threshold = scalar<int>(in["prolonged_threshold"], "interruption.prolonged_threshold");
  }

  if (const auto hz = root["hazards"]) {
    if (!hz.IsSequence()) yaml_fail(hz, "hazards must be a list");
    for (const auto& h : hz) {
      check_keys(h, {"cause", "kind", "intercept", "outcome", "arm", "withdraw", "visits"}, "hazard");
      HazardSpec s;
      if (!h["cause"] || !h["kind"]) yaml_fail(h, "hazard needs cause and kind");
      const auto cause = parse_cause(scalar<std::string>(h["cause"], "cause"));
      if (!cause) yaml_fail(h["cause"], "unknown ICE cause '" + h["cause"].as<std::string>() + "'");
      const auto kind = parse_kind(scalar<std::string>(h["kind"], "kind"));
      if (!kind) yaml_fail(h["kind"], "unknown ICE kind '" + h["kind"].as<std::string>() + "'");
      s.cause = *cause;
      s.kind = *kind;
      if (h["intercept"]) s.intercept = scalar<double>(h["intercept"], "intercept");
      if (h["outcome"]) s.outcome_coef = scalar<double>(h["outcome"], "outcome");
      if (h["arm"]) s.arm_coef = scalar<double>(h["arm"], "arm");
      s.withdraw_prob = s.cause == IceCause::AdminLostToFollowUp ? 1.0 : 0.0;
      if (h["withdraw"]) s.withdraw_prob = scalar<double>(h["withdraw"], "withdraw");
      if (h["visits"]) {
        for (double v : number_list(h["visits"], "visits")) s.active_visits.push_back(static_cast<int>(v));
      }
      c.hazards.push_back(std::move(s));
    }
  }

  validate(c);
  return c;
}

inline ScenarioConfig parse_scenario(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(std::string("scenario YAML: ") + e.what());
  }
  return scenario_from_yaml(root);
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

}  // namespace icelab::sim
