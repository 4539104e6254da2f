#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "icelab/core/model.hpp"
#include "icelab/error.hpp"

namespace icelab::sim {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Discrete-time logistic hazard for one (cause, kind) pair:
/// P(event dated v | at risk) = logit^-1(intercept + outcome_coef * y(v-1) + arm_coef * arm).
struct HazardSpec {
  IceCause cause = IceCause::AdminDocumented;
  IceKind kind = IceKind::Discontinuation;
  double intercept = -kInf;
  double outcome_coef = 0.0;
  double arm_coef = 0.0;
  double withdraw_prob = 0.0;
  std::vector<int> active_visits;  // empty: every visit 1..T

  bool active_at(int visit) const {
    if (active_visits.empty()) return true;
    for (int v : active_visits)
      if (v == visit) return true;
    return false;
  }

  double probability(double latent, int arm) const {
    const double eta = intercept + outcome_coef * latent + arm_coef * static_cast<double>(arm);
    if (std::isnan(eta)) return 0.0;
    return 1.0 / (1.0 + std::exp(-eta));
  }

  bool depends_on_outcome() const { return outcome_coef != 0.0; }
  bool depends_on_arm() const { return arm_coef != 0.0; }
  bool operator==(const HazardSpec&) const = default;
};

struct ScenarioConfig {
  int n_per_arm = 100;
  int final_visit = 1;
  std::uint64_t seed = 1;

  double baseline_mean = 0.0;
  // Length T+1; element 0 equals baseline_mean.
  std::array<std::vector<double>, 2> on_treatment_means;
  std::vector<double> no_treatment_means;

  Eigen::MatrixXd residual_cov;  // (T+1) x (T+1)

  double washout = 0.0;  // lambda: fraction of the on-treatment effect retained per visit off drug
  double rescue_effect = 0.0;
  std::vector<HazardSpec> hazards;
  std::optional<std::pair<int, int>> pandemic_window;
  std::vector<double> extra_missingness;  // length T+1, element 0 unused

  double dtr_threshold = kInf;
  double ps_threshold = -kInf;
  int ps_visit = 1;

  int interruption_length = 1;
  std::optional<int> prolonged_threshold;

  VisitSchedule schedule() const { return VisitSchedule(final_visit); }
  int visits() const { return final_visit + 1; }

  const std::vector<double>& arm_means(int arm) const {
    require_arm(arm);
    return on_treatment_means[static_cast<std::size_t>(arm)];
  }

  bool pandemic_active(int visit) const {
    return pandemic_window && visit >= pandemic_window->first && visit <= pandemic_window->second;
  }

  /// Hazard probability for `h` at event visit `visit` given y(visit-1).
  double hazard_probability(const HazardSpec& h, int visit, double latent, int arm) const {
    if (!h.active_at(visit)) return 0.0;
    if (is_pandemic(h.cause) && !pandemic_active(visit)) return 0.0;
    return h.probability(latent, arm);
  }

  bool interruptions_are_ices() const {
    return prolonged_threshold && interruption_length >= *prolonged_threshold;
  }
};

/// Lower Cholesky factor of the residual covariance; throws on a non-PD matrix.
inline Eigen::MatrixXd residual_factor(const ScenarioConfig& c) {
  Eigen::LLT<Eigen::MatrixXd> llt(c.residual_cov);
  if (llt.info() != Eigen::Success) throw ConfigError("residual covariance is not positive definite");
  Eigen::MatrixXd L = llt.matrixL();
  for (int i = 0; i < L.rows(); ++i)
    if (!(L(i, i) > 0.0)) throw ConfigError("residual covariance is not positive definite");
  return L;
}

inline void validate(const ScenarioConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (c.n_per_arm < 1) fail("n_per_arm must be >= 1");
  (void)c.schedule();
  const auto n = static_cast<std::size_t>(c.visits());
  for (int a = 0; a < 2; ++a) {
    const auto& m = c.on_treatment_means[static_cast<std::size_t>(a)];
    if (m.size() != n) fail("arm " + std::to_string(a) + " means must have " + std::to_string(n - 1) + " post-baseline values");
    if (m[0] != c.baseline_mean) fail("arm means at visit 0 must equal the baseline mean");
  }
  if (c.no_treatment_means.size() != n) fail("no-treatment means must have " + std::to_string(n - 1) + " post-baseline values");
  if (c.no_treatment_means[0] != c.baseline_mean) fail("no-treatment mean at visit 0 must equal the baseline mean");
  for (const auto* v : {&c.on_treatment_means[0], &c.on_treatment_means[1], &c.no_treatment_means})
    for (double x : *v)
      if (!std::isfinite(x)) fail("means must be finite");
  if (c.residual_cov.rows() != static_cast<Eigen::Index>(n) || c.residual_cov.cols() != static_cast<Eigen::Index>(n))
    fail("residual covariance must be " + std::to_string(n) + "x" + std::to_string(n));
  if (!c.residual_cov.isApprox(c.residual_cov.transpose(), 1e-12)) fail("residual covariance must be symmetric");
  (void)residual_factor(c);
  if (!(c.washout >= 0.0 && c.washout <= 1.0)) fail("washout must lie in [0, 1]");
  if (!std::isfinite(c.rescue_effect)) fail("rescue_effect must be finite");
  if (c.extra_missingness.size() != n) fail("extra_missingness must have one probability per post-baseline visit");
  for (double p : c.extra_missingness)
    if (!(p >= 0.0 && p <= 1.0)) fail("extra_missingness probabilities must lie in [0, 1]");
  if (c.pandemic_window) {
    auto [lo, hi] = *c.pandemic_window;
    if (lo < 1 || hi > c.final_visit || lo > hi) fail("pandemic_window must satisfy 1 <= v1 <= v2 <= final_visit");
  }
  if (c.ps_visit < 1 || c.ps_visit > c.final_visit) fail("principal_stratum.visit must lie in [1, final_visit]");
  if (std::isnan(c.ps_threshold) || std::isnan(c.dtr_threshold)) fail("thresholds must not be NaN");
  if (c.interruption_length < 1) fail("interruption.length must be >= 1");
  for (const auto& h : c.hazards) {
    const std::string who = std::string(to_string(h.cause)) + "/" + std::string(to_string(h.kind));
    if (std::isnan(h.intercept) || !std::isfinite(h.outcome_coef) || !std::isfinite(h.arm_coef))
      fail("hazard " + who + ": coefficients must be numbers (intercept may be +/-inf)");
    if (!(h.withdraw_prob >= 0.0 && h.withdraw_prob <= 1.0)) fail("hazard " + who + ": withdraw must lie in [0, 1]");
    for (int v : h.active_visits)
      if (v < 1 || v > c.final_visit) fail("hazard " + who + ": active visit " + std::to_string(v) + " out of range");
    if (h.kind == IceKind::Death && h.cause != IceCause::AeNormal && h.cause != IceCause::AePandemic)
      fail("hazard " + who + ": death is only modeled as an adverse-event outcome");
    if (h.cause == IceCause::AdminLostToFollowUp && h.withdraw_prob != 1.0)
      fail("hazard " + who + ": loss to follow-up always stops data collection (withdraw must be 1)");
    if (h.kind == IceKind::ProlongedInterruption && !c.prolonged_threshold)
      fail("hazard " + who + ": interruption.prolonged_threshold must be configured");
    if (h.kind == IceKind::ProlongedInterruption && h.withdraw_prob != 0.0)
      fail("hazard " + who + ": interruptions cannot withdraw the patient");
  }
  for (std::size_t i = 0; i < c.hazards.size(); ++i)
    for (std::size_t j = i + 1; j < c.hazards.size(); ++j)
      if (c.hazards[i].cause == c.hazards[j].cause && c.hazards[i].kind == c.hazards[j].kind)
        fail("duplicate hazard for " + std::string(to_string(c.hazards[i].cause)) + "/" +
             std::string(to_string(c.hazards[i].kind)));
}

/// Mechanism label for the data-stopping missingness the scenario induces.
/// Hazards see y(v-1), which is observed unless non-ICE missingness can hide it.
inline MissingnessClass label_mechanism(const ScenarioConfig& c) {
  bool outcome = false, arm = false;
  for (const auto& h : c.hazards) {
    const bool stops = h.withdraw_prob > 0.0 || h.kind == IceKind::Death;
    if (!stops) continue;
    outcome = outcome || h.depends_on_outcome();
    arm = arm || h.depends_on_arm();
  }
  bool extra = false;
  for (double p : c.extra_missingness) extra = extra || p > 0.0;
  if (outcome) return extra ? MissingnessClass::MNAR : MissingnessClass::MAR;
  if (arm) return MissingnessClass::CovMAR;
  return MissingnessClass::MCAR;
}

// Convenience builders used by tests and shipped scenarios.

inline Eigen::MatrixXd ar1_covariance(const std::vector<double>& sd, double rho) {
  const auto n = static_cast<Eigen::Index>(sd.size());
  Eigen::MatrixXd s(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      s(i, j) = sd[static_cast<std::size_t>(i)] * sd[static_cast<std::size_t>(j)] *
                std::pow(rho, static_cast<double>(std::abs(i - j)));
  return s;
}

inline Eigen::MatrixXd exchangeable_covariance(const std::vector<double>& sd, double rho) {
  const auto n = static_cast<Eigen::Index>(sd.size());
  Eigen::MatrixXd s(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      s(i, j) = sd[static_cast<std::size_t>(i)] * sd[static_cast<std::size_t>(j)] * (i == j ? 1.0 : rho);
  return s;
}

/// e_t = e_0 + u_t with independent u_t ~ N(0, step_var[t]): every post-baseline
/// residual scatters around the baseline residual, not around the previous visit.
inline Eigen::MatrixXd random_walk_covariance(double baseline_var, const std::vector<double>& step_var) {
  const auto n = static_cast<Eigen::Index>(step_var.size()) + 1;
  Eigen::MatrixXd s = Eigen::MatrixXd::Constant(n, n, baseline_var);
  for (Eigen::Index t = 1; t < n; ++t) s(t, t) += step_var[static_cast<std::size_t>(t - 1)];
  return s;
}

/// A complete, valid scenario with no intercurrent events.
inline ScenarioConfig make_basic_scenario(int final_visit, const std::vector<double>& control_post,
                                          const std::vector<double>& experimental_post,
                                          const std::vector<double>& no_treatment_post,
                                          double baseline_mean = 0.0) {
  ScenarioConfig c;
  c.final_visit = final_visit;
  c.baseline_mean = baseline_mean;
  auto with_baseline = [&](const std::vector<double>& post) {
    std::vector<double> v{baseline_mean};
    v.insert(v.end(), post.begin(), post.end());
    return v;
  };
  c.on_treatment_means[0] = with_baseline(control_post);
  c.on_treatment_means[1] = with_baseline(experimental_post);
  c.no_treatment_means = with_baseline(no_treatment_post);
  c.residual_cov = ar1_covariance(std::vector<double>(static_cast<std::size_t>(final_visit) + 1, 1.0), 0.5);
  c.extra_missingness.assign(static_cast<std::size_t>(final_visit) + 1, 0.0);
  return c;
}

}  // namespace icelab::sim
