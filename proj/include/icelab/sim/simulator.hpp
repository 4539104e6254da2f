#pragma once

// Potential-outcomes generator. Each patient gets one residual draw shared by
// every regimen (rank preservation) and one set of hazard uniforms shared by
// both arms' ICE processes. Means are kept separate from residuals so that
// contrasts between regimens are exact mean differences.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "icelab/core/model.hpp"
#include "icelab/sim/scenario.hpp"
#include "icelab/util/random.hpp"

namespace icelab::sim {

/// Mean between untreated and treated: `fraction` of the treatment effect retained.
inline double blend(double treated, double untreated, double fraction) {
  if (fraction == 1.0) return treated;
  if (fraction == 0.0) return untreated;
  return untreated + fraction * (treated - untreated);
}

/// Fraction of the effect left `visits_off` visits into a washout (>= 1).
inline double washout_fraction(double lambda, int visits_off) { return std::pow(lambda, visits_off); }

inline std::vector<double> assigned_full_mean(const ScenarioConfig& c, int arm) { return c.arm_means(arm); }

inline std::vector<double> no_treatment_mean(const ScenarioConfig& c) { return c.no_treatment_means; }

/// On treatment before `stop`; geometric decay toward the untreated mean from `stop` on.
inline std::vector<double> partial_until_mean(const ScenarioConfig& c, int arm, int stop) {
  if (stop < 1 || stop > c.final_visit)
    throw Error("PartialUntil stop visit " + std::to_string(stop) + " outside [1, " + std::to_string(c.final_visit) + "]");
  const auto& mu = c.arm_means(arm);
  std::vector<double> m(mu.size());
  for (int t = 0; t < c.visits(); ++t) {
    const auto i = static_cast<std::size_t>(t);
    m[i] = t < stop ? mu[i] : blend(mu[i], c.no_treatment_means[i], washout_fraction(c.washout, t - stop + 1));
  }
  return m;
}

/// First visit whose outcome carries rule-based rescue: the visit after the
/// first post-baseline intermediate value exceeding delta.
inline std::optional<int> dynamic_rule_trigger(const std::vector<double>& z, double delta, int final_visit) {
  for (int v = 2; v <= final_visit; ++v)
    if (z[static_cast<std::size_t>(v - 2)] > delta) return v;
  return std::nullopt;
}

inline std::vector<double> dynamic_rule_mean(const ScenarioConfig& c, int arm, const std::vector<double>& z, double delta) {
  std::vector<double> m = c.arm_means(arm);
  if (auto from = dynamic_rule_trigger(z, delta, c.final_visit))
    for (int t = *from; t <= c.final_visit; ++t) m[static_cast<std::size_t>(t)] += c.rescue_effect;
  return m;
}

inline std::vector<double> add_residual(const std::vector<double>& mean, const std::vector<double>& residual) {
  std::vector<double> v(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) v[i] = mean[i] + residual[i];
  return v;
}

namespace detail {

struct PatientDraws {
  std::vector<double> residual;
  // [visit-1][hazard]
  std::vector<std::vector<double>> event_u;
  std::vector<std::vector<double>> withdraw_u;
  std::vector<double> nonice_u;  // index = visit
};

inline PatientDraws draw_patient(const ScenarioConfig& c, const Eigen::MatrixXd& chol, rng::Engine& g) {
  PatientDraws d;
  const int n = c.visits();
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z(i) = rng::normal(g);
  Eigen::VectorXd e = chol * z;
  d.residual.assign(e.data(), e.data() + n);
  const auto K = c.hazards.size();
  d.event_u.assign(static_cast<std::size_t>(c.final_visit), std::vector<double>(K));
  d.withdraw_u.assign(static_cast<std::size_t>(c.final_visit), std::vector<double>(K));
  for (int v = 1; v <= c.final_visit; ++v)
    for (std::size_t k = 0; k < K; ++k) {
      d.event_u[static_cast<std::size_t>(v - 1)][k] = rng::uniform(g);
      d.withdraw_u[static_cast<std::size_t>(v - 1)][k] = rng::uniform(g);
    }
  d.nonice_u.assign(static_cast<std::size_t>(n), 1.0);
  for (int v = 1; v <= c.final_visit; ++v) d.nonice_u[static_cast<std::size_t>(v)] = rng::uniform(g);
  return d;
}

struct ArmPath {
  std::vector<IceEvent> events;
  std::vector<double> mean;
};

/// Runs one arm's actual course: hazards at visit v see y(v-1) on the
/// path realized so far; events change the mean from v onward.
inline ArmPath simulate_arm(const ScenarioConfig& c, int arm, const PatientDraws& d) {
  ArmPath path;
  const auto& mu = c.arm_means(arm);
  const auto& nt = c.no_treatment_means;
  path.mean.assign(static_cast<std::size_t>(c.visits()), 0.0);
  path.mean[0] = c.baseline_mean;

  bool in_study = true;
  std::optional<int> stopped;                  // treatment stopped for good at this visit
  std::optional<int> interrupt_start;
  int interrupt_end = -1;                      // exclusive
  bool rescued = false;
  std::vector<bool> fired_before(c.hazards.size(), false);
  const bool interruptions = c.interruptions_are_ices();

  for (int v = 1; v <= c.final_visit; ++v) {
    const auto vi = static_cast<std::size_t>(v);
    if (in_study) {
      const double y_prev = path.mean[vi - 1] + d.residual[vi - 1];
      const bool on_drug = !stopped && !(interrupt_start && v - 1 < interrupt_end);
      std::vector<std::size_t> fired;
      for (std::size_t k = 0; k < c.hazards.size(); ++k) {
        const auto& h = c.hazards[k];
        if (fired_before[k]) continue;
        bool eligible = true;
        switch (h.kind) {
          case IceKind::Discontinuation: eligible = !stopped.has_value(); break;
          case IceKind::RescueStart: eligible = !rescued; break;
          case IceKind::Death: break;
          case IceKind::ProlongedInterruption: eligible = interruptions && on_drug; break;
        }
        if (!eligible) continue;
        const double p = c.hazard_probability(h, v, y_prev, arm);
        if (d.event_u[vi - 1][k] < p) fired.push_back(k);
      }
      std::size_t death = c.hazards.size();
      for (std::size_t k : fired)
        if (c.hazards[k].kind == IceKind::Death) {
          death = k;
          break;
        }
      if (death < c.hazards.size()) {
        path.events.push_back({c.hazards[death].cause, v, IceKind::Death, true});
        in_study = false;
        if (!stopped) stopped = v;
      } else {
        for (std::size_t k : fired) {
          const auto& h = c.hazards[k];
          if (h.kind == IceKind::Discontinuation && stopped) continue;
          if (h.kind == IceKind::RescueStart && rescued) continue;
          if (h.kind == IceKind::ProlongedInterruption && (stopped || interrupt_start)) continue;
          IceEvent e{h.cause, v, h.kind, d.withdraw_u[vi - 1][k] < h.withdraw_prob};
          fired_before[k] = true;
          if (h.kind == IceKind::Discontinuation) stopped = v;
          if (h.kind == IceKind::RescueStart) rescued = true;
          if (h.kind == IceKind::ProlongedInterruption) {
            interrupt_start = v;
            interrupt_end = v + c.interruption_length;
          }
          if (e.withdrawal) {
            in_study = false;
            if (!stopped) stopped = v;
          }
          path.events.push_back(e);
          if (!in_study) break;
        }
      }
    }
    double fraction = 1.0;
    if (stopped && v >= *stopped)
      fraction = washout_fraction(c.washout, v - *stopped + 1);
    else if (interrupt_start && v >= *interrupt_start && v < interrupt_end)
      fraction = washout_fraction(c.washout, v - *interrupt_start + 1);
    double m = blend(mu[vi], nt[vi], fraction);
    if (rescued) m += c.rescue_effect;
    path.mean[vi] = m;
  }
  return path;
}

}  // namespace detail

/// Builds one patient's counterfactual bundle. `observed` is left empty;
/// apply_observation_model fills it for the assigned arm.
inline PatientRecord generate_patient(const ScenarioConfig& c, const Eigen::MatrixXd& chol, rng::Engine& g, int id,
                                      int assigned_arm) {
  require_arm(assigned_arm);
  const auto d = detail::draw_patient(c, chol, g);
  PatientRecord p;
  p.id = id;
  p.assigned_arm = assigned_arm;
  p.residual = d.residual;
  p.baseline_covariate = c.baseline_mean + d.residual[0];
  p.nonice_draws = d.nonice_u;

  auto add = [&](const Regimen& r, std::vector<double> mean) {
    PotentialTrajectory t{r, std::move(mean), {}};
    t.values = add_residual(t.mean, p.residual);
    p.trajectories.push_back(std::move(t));
  };
  add(Regimen::no_treatment(), no_treatment_mean(c));
  for (int a = 0; a < 2; ++a) {
    const auto ai = static_cast<std::size_t>(a);
    add(Regimen::assigned_full(a), assigned_full_mean(c, a));
    const auto& full = p.trajectories.back().values;
    p.intermediate[ai].assign(full.begin() + 1, full.end());
    auto path = detail::simulate_arm(c, a, d);
    p.ice_history[ai] = std::move(path.events);
    add(Regimen::actual_policy(a), std::move(path.mean));
    if (!p.ice_history[ai].empty()) {
      const int stop = p.ice_history[ai].front().visit;
      add(Regimen::partial_until(a, stop), partial_until_mean(c, a, stop));
    }
    add(Regimen::dynamic_rule(a, c.dtr_threshold), dynamic_rule_mean(c, a, p.intermediate[ai], c.dtr_threshold));
  }
  p.ps_variable = p.trajectory(Regimen::assigned_full(kExperimental)).values[static_cast<std::size_t>(c.ps_visit)];
  return p;
}

inline PatientRecord generate_patient(const ScenarioConfig& c, rng::Engine& g, int id = 0, int assigned_arm = kControl) {
  return generate_patient(c, residual_factor(c), g, id, assigned_arm);
}

/// Mean path of any regimen for an existing patient.
inline std::vector<double> regimen_mean(const ScenarioConfig& c, const PatientRecord& p, const Regimen& r) {
  switch (r.kind) {
    case Regimen::Kind::AssignedFull: return assigned_full_mean(c, r.arm);
    case Regimen::Kind::NoTreatment: return no_treatment_mean(c);
    case Regimen::Kind::PartialUntil: return partial_until_mean(c, r.arm, r.stop_visit);
    case Regimen::Kind::ActualPolicy: return p.trajectory(r).mean;
    case Regimen::Kind::DynamicRule:
      return dynamic_rule_mean(c, r.arm, p.intermediate[static_cast<std::size_t>(r.arm)], r.threshold);
  }
  return {};
}

/// Fills observed cells from the assigned arm's actual course: data stop at
/// the first withdrawal or death; otherwise non-ICE missingness at the
/// configured per-visit rate.
inline void apply_observation_model(std::vector<PatientRecord>& patients, const ScenarioConfig& c) {
  for (auto& p : patients) {
    const auto& actual = p.trajectory(Regimen::actual_policy(p.assigned_arm)).values;
    const auto& events = p.events(p.assigned_arm);
    const IceEvent* stop = nullptr;
    for (const auto& e : events)
      if (e.stops_data()) {
        stop = &e;
        break;
      }
    p.observed.assign(static_cast<std::size_t>(c.visits()), {});
    for (int v = 0; v <= c.final_visit; ++v) {
      auto& cell = p.observed[static_cast<std::size_t>(v)];
      if (v > 0 && stop && v >= stop->visit) {
        cell.reason = MissingReason::from_event(*stop);
      } else if (v > 0 && p.nonice_draws[static_cast<std::size_t>(v)] < c.extra_missingness[static_cast<std::size_t>(v)]) {
        cell.reason = MissingReason::non_ice();
      } else {
        cell.value = actual[static_cast<std::size_t>(v)];
      }
    }
  }
}

/// 1:1 allocation for one replicate, drawn from the replicate's own stream.
inline std::vector<int> allocate_arms(const ScenarioConfig& c, std::uint64_t seed, std::uint64_t replicate) {
  std::vector<int> arms(static_cast<std::size_t>(2 * c.n_per_arm));
  for (std::size_t i = 0; i < arms.size(); ++i) arms[i] = i < arms.size() / 2 ? kControl : kExperimental;
  auto g = rng::stream(seed, rng::Purpose::Allocation, {replicate});
  for (std::size_t i = arms.size() - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(arms[i], arms[pick(g)]);
  }
  return arms;
}

inline std::vector<PatientRecord> generate_replicate(const ScenarioConfig& c, std::uint64_t replicate) {
  const auto chol = residual_factor(c);
  const auto arms = allocate_arms(c, c.seed, replicate);
  std::vector<PatientRecord> out;
  out.reserve(arms.size());
  for (std::size_t i = 0; i < arms.size(); ++i) {
    auto g = rng::stream(c.seed, rng::Purpose::Patient, {replicate, i});
    out.push_back(generate_patient(c, chol, g, static_cast<int>(i), arms[i]));
  }
  apply_observation_model(out, c);
  return out;
}

}  // namespace icelab::sim
