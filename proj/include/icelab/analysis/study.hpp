#pragma once

// Simulation-study harness: simulate -> resolve -> impute -> analyze each
// copy -> pool -> compare with the oracle truth, for the primary plan and
// every sensitivity variant, then reduce in replicate order.

#include <atomic>
#include <cmath>
#include <mutex>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icelab/analysis/ancova.hpp"
#include "icelab/mi/engine.hpp"
#include "icelab/mi/pool.hpp"
#include "icelab/oracle/oracle.hpp"
#include "icelab/plan/validate.hpp"
#include "icelab/sim/simulator.hpp"

namespace icelab {

struct StudyOptions {
  int replicates = 1000;
  int m = 20;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  long n_oracle = oracle::kDefaultOracleN;
  double failure_budget = 0.01;  // fraction of replicates allowed to fail
  double alpha = 0.05;
};

struct NamedPlan {
  std::string name;
  EstimandSpec plan;
};

/// "primary" followed by each sensitivity's effective plan.
inline std::vector<NamedPlan> analysis_plans(const EstimandSpec& spec) {
  std::vector<NamedPlan> out{{"primary", spec}};
  out.front().plan.sensitivities.clear();
  for (const auto& s : spec.sensitivities) out.push_back({s.name, apply_sensitivity(spec, s)});
  return out;
}

/// Compact strategy map, e.g. "AeNormal=NTH;LackOfEfficacy=CDH".
inline std::string strategy_text(const EstimandSpec& p) {
  std::string s;
  auto add = [&](std::string_view key, const std::string& v) {
    if (!s.empty()) s += ';';
    s += std::string(key) + "=" + v;
  };
  for (const auto& [c, st] : p.strategies.by_cause) add(to_string(c), to_string(st));
  for (const auto& [k, st] : p.strategies.by_kind) add(to_string(k), to_string(st));
  for (IceCause c : p.strategies.regimen_causes) add(to_string(c), "regimen");
  for (IceKind k : p.strategies.regimen_kinds) add(to_string(k), "regimen");
  return s;
}

struct ReplicateResult {
  std::size_t replicate = 0;
  bool ok = false;
  std::string error;
  PooledEstimate estimate;
  bool covers = false;
  bool reject = false;
  std::vector<std::string> warnings;
};

struct EstimandSummary {
  std::string name;
  std::string strategy;
  oracle::TrueEstimand truth;
  int n_ok = 0;
  int n_failed = 0;
  double mean_estimate = 0.0;
  double bias = 0.0;
  double bias_mc_se = 0.0;
  double empirical_se = 0.0;
  double model_se = 0.0;
  double coverage = 0.0;
  double rejection_rate = 0.0;
};

struct StudyResult {
  int replicates = 0;
  int m = 0;
  bool aborted = false;
  std::string abort_reason;
  std::vector<EstimandSummary> summaries;
  std::vector<std::vector<ReplicateResult>> per_replicate;  // [analysis][replicate]
};

/// One replicate of one analysis plan.
inline ReplicateResult run_replicate(const std::vector<ObservedPatient>& data, const EstimandSpec& plan, double truth,
                                     std::size_t r, const StudyOptions& opt) {
  ReplicateResult out;
  out.replicate = r;
  ImputeOptions io;
  io.m = opt.m;
  io.seed = opt.seed;
  io.replicate = r;
  const auto set = impute(data, plan, io);
  std::vector<CopyEstimate> est;
  double nu_com = std::numeric_limits<double>::infinity();
  for (int k = 0; k < set.m(); ++k) {
    auto a = analyze_copy(set, k, plan.endpoint, plan.population);
    for (auto& w : a.warnings)
      if (std::find(out.warnings.begin(), out.warnings.end(), w) == out.warnings.end()) out.warnings.push_back(w);
    est.push_back({a.point, a.variance});
    nu_com = a.df_complete;
  }
  out.estimate = pool(est, nu_com);
  out.covers = out.estimate.ci_low <= truth && truth <= out.estimate.ci_high;
  const double se = out.estimate.se();
  if (se > 0.0) out.reject = stats::t_two_sided_p(out.estimate.point / se, out.estimate.df) < opt.alpha;
  else out.reject = out.estimate.point != 0.0;
  out.ok = true;
  return out;
}

inline EstimandSummary summarize(const std::string& name, const EstimandSpec& plan, const oracle::TrueEstimand& truth,
                                 const std::vector<ReplicateResult>& rs) {
  EstimandSummary s;
  s.name = name;
  s.strategy = strategy_text(plan);
  s.truth = truth;
  std::vector<double> points, ses;
  int covers = 0, rejects = 0;
  for (const auto& r : rs) {
    if (!r.ok) {
      ++s.n_failed;
      continue;
    }
    points.push_back(r.estimate.point);
    ses.push_back(r.estimate.se());
    covers += r.covers;
    rejects += r.reject;
  }
  s.n_ok = static_cast<int>(points.size());
  if (s.n_ok == 0) return s;
  const auto ms = stats::mean_sd(points);
  const double n = static_cast<double>(s.n_ok);
  s.mean_estimate = ms.mean;
  s.bias = ms.mean - truth.value;
  s.empirical_se = ms.sd;
  s.bias_mc_se = ms.sd / std::sqrt(n);
  s.model_se = stats::mean_sd(ses).mean;
  s.coverage = covers / n;
  s.rejection_rate = rejects / n;
  return s;
}

/// Runs the study. Truths come from one oracle pass over all analyses.
/// Exceeding the failure budget stops scheduling new replicates and returns
/// with `aborted` set; summaries are then omitted.
inline StudyResult run_study(sim::ScenarioConfig config, const EstimandSpec& spec, const StudyOptions& opt) {
  if (opt.replicates < 1) throw Error("replicates must be >= 1");
  if (opt.m < 2) throw ImputationError("pooling needs m >= 2 imputations");
  config.seed = opt.seed;
  sim::validate(config);
  const auto report = validate_spec(spec, config);
  if (!report.ok()) throw PlanError("spec has errors:\n" + to_text(report));
  if (spec.population.kind == Population::Kind::PrincipalStratum)
    throw AnalysisError("no estimator for principal-stratum populations; use the truth subcommand");

  const auto plans = analysis_plans(spec);
  std::vector<EstimandTarget> targets;
  for (const auto& p : plans) targets.push_back(to_target(p.plan, p.name));
  const auto truths = oracle::evaluate(config, targets, opt.n_oracle, {opt.seed, opt.jobs});

  StudyResult res;
  res.replicates = opt.replicates;
  res.m = opt.m;
  const auto R = static_cast<std::size_t>(opt.replicates);
  res.per_replicate.assign(plans.size(), std::vector<ReplicateResult>(R));
  const int allowed = static_cast<int>(std::floor(opt.failure_budget * opt.replicates));
  std::vector<std::atomic<int>> failures(plans.size());
  std::atomic<bool> stop{false};
  std::vector<unsigned char> done(R, 0);

  parallel_for(R, opt.jobs, [&](std::size_t r) {
    if (stop.load()) return;
    std::vector<ObservedPatient> data;
    std::string gen_error;
    try {
      data = observe(sim::generate_replicate(config, r));
    } catch (const Error& e) {
      gen_error = e.what();
    }
    for (std::size_t a = 0; a < plans.size(); ++a) {
      auto& slot = res.per_replicate[a][r];
      slot.replicate = r;
      try {
        if (!gen_error.empty()) throw Error(gen_error);
        slot = run_replicate(data, plans[a].plan, truths[a].value, r, opt);
      } catch (const Error& e) {
        slot.ok = false;
        slot.error = e.what();
        if (++failures[a] > allowed) stop.store(true);
      }
    }
    done[r] = 1;
  });

  for (std::size_t a = 0; a < plans.size(); ++a) {
    if (failures[a].load() > allowed) {
      res.aborted = true;
      std::size_t first = R;
      for (std::size_t r = 0; r < R && first == R; ++r)
        if (done[r] && !res.per_replicate[a][r].ok) first = r;
      res.abort_reason = "failure budget exceeded for '" + plans[a].name + "': more than " + std::to_string(allowed) +
                         " of " + std::to_string(R) + " replicates failed; first failure at replicate " +
                         std::to_string(first) + ": " + res.per_replicate[a][first].error;
      break;
    }
  }
  if (res.aborted) {
    for (auto& v : res.per_replicate) {
      std::vector<ReplicateResult> kept;
      for (std::size_t r = 0; r < R; ++r)
        if (done[r]) kept.push_back(v[r]);
      v = std::move(kept);
    }
    return res;
  }
  for (std::size_t a = 0; a < plans.size(); ++a)
    res.summaries.push_back(summarize(plans[a].name, plans[a].plan, truths[a], res.per_replicate[a]));
  return res;
}

// ---------------------------------------------------------------------------
// Output formats

inline nlohmann::json to_json(const oracle::TrueEstimand& t) {
  nlohmann::json j{{"strategy", t.label}, {"value", t.value}, {"mc_se", t.mc_se}, {"n_oracle", t.n_oracle},
                   {"n_used", t.n_used}};
  if (t.stratum_prevalence) j["stratum_prevalence"] = *t.stratum_prevalence;
  return j;
}

inline nlohmann::json to_json(const EstimandSummary& s) {
  return {{"estimand", s.name},
          {"strategy", s.strategy},
          {"truth", s.truth.value},
          {"truth_mc_se", s.truth.mc_se},
          {"n_ok", s.n_ok},
          {"n_failed", s.n_failed},
          {"mean_estimate", s.mean_estimate},
          {"bias", s.bias},
          {"bias_mc_se", s.bias_mc_se},
          {"empirical_se", s.empirical_se},
          {"model_se", s.model_se},
          {"coverage", s.coverage},
          {"rejection_rate", s.rejection_rate}};
}

inline nlohmann::json summary_json(const StudyResult& r, const std::string& scenario) {
  nlohmann::json j{{"scenario", scenario}, {"replicates", r.replicates}, {"imputations", r.m}};
  j["estimands"] = nlohmann::json::array();
  for (const auto& s : r.summaries) j["estimands"].push_back(to_json(s));
  return j;
}

inline constexpr const char* kSummaryHeader =
    "scenario,estimand,strategy,truth,truth_mc_se,mean_estimate,bias,bias_mc_se,empirical_se,model_se,coverage,"
    "rejection_rate,n_ok,n_failed";

inline void write_summary_csv(std::ostream& os, const StudyResult& r, const std::string& scenario) {
  os << kSummaryHeader << '\n';
  for (const auto& s : r.summaries)
    os << scenario << ',' << s.name << ',' << s.strategy << ',' << format_double(s.truth.value) << ','
       << format_double(s.truth.mc_se) << ',' << format_double(s.mean_estimate) << ',' << format_double(s.bias) << ','
       << format_double(s.bias_mc_se) << ',' << format_double(s.empirical_se) << ',' << format_double(s.model_se)
       << ',' << format_double(s.coverage) << ',' << format_double(s.rejection_rate) << ',' << s.n_ok << ','
       << s.n_failed << '\n';
}

inline constexpr const char* kReplicateHeader = "replicate,estimand,status,point,se,df,ci_low,ci_high,covers,reject,error";

inline void write_replicates_csv(std::ostream& os, const StudyResult& r, const std::vector<std::string>& names) {
  os << kReplicateHeader << '\n';
  for (std::size_t a = 0; a < r.per_replicate.size(); ++a)
    for (const auto& x : r.per_replicate[a]) {
      os << x.replicate << ',' << names[a] << ',' << (x.ok ? "ok" : "failed") << ',';
      if (x.ok) {
        const auto& e = x.estimate;
        os << format_double(e.point) << ',' << format_double(e.se()) << ',' << format_double(e.df) << ','
           << format_double(e.ci_low) << ',' << format_double(e.ci_high) << ',' << (x.covers ? 1 : 0) << ','
           << (x.reject ? 1 : 0) << ',';
      } else {
        std::string msg = x.error;
        for (auto& ch : msg)
          if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
        os << ",,,,,,," << msg;
      }
      os << '\n';
    }
}

}  // namespace icelab
