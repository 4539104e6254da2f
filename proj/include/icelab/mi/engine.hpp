#pragma once

// Multiple imputation by Bayesian sequential regression.
//
// Per arm and visit v, Y_v | Y_0..Y_{v-1} is a normal linear regression fitted
// on the patients whose cells 0..v are all used as observed. Each copy draws
// (beta, sigma^2) from the flat-prior posterior and the visit means implied by
// the drawn parameters, mu(v) = alpha_v + beta_v' mu(<v). MAR, jump-to-reference
// and copy-reference then share one conditional form,
//
//   E[Y_t | history] = m*(t) + beta' (Y_<t - m*(<t)),
//
// differing only in which arm supplies beta, sigma^2 and the mean path m*.
//
// Random streams are keyed by the arm's role (reference or not) rather than
// its label, and by patient id, so relabelling arms leaves every draw intact.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <tuple>
#include <vector>

#include "icelab/mi/imputed.hpp"
#include "icelab/plan/resolve.hpp"
#include "icelab/util/random.hpp"
#include "icelab/util/regression.hpp"
#include "icelab/util/summary_stats.hpp"

namespace icelab {

struct ImputeOptions {
  int m = 20;
  std::uint64_t seed = 1;
  std::uint64_t replicate = 0;
  std::optional<ImputationMethod> force_method;  // overrides every cell's method
};

namespace mi_detail {

enum DrawKind : std::uint64_t { kMar = 1, kBaseline = 2, kReturn = 3, kRetrieved = 4, kPattern = 5 };

inline std::string arm_name(int arm) { return "arm " + std::to_string(arm); }

class Imputer {
public:
  Imputer(const std::vector<ObservedPatient>& ps, const std::vector<std::vector<CellDecision>>& dec,
          const EstimandSpec& plan, std::uint64_t seed, std::uint64_t replicate)
      : ps_(ps), dec_(dec), plan_(plan), seed_(seed), replicate_(replicate) {
    if (ps.empty()) throw ImputationError("empty dataset");
    T_ = ps.front().final_visit();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (ps[i].final_visit() != T_) throw ImputationError("patients have different visit schedules");
      require_arm(ps[i].arm);
      by_arm_[static_cast<std::size_t>(ps[i].arm)].push_back(i);
      first_ice_.push_back(first_ice(ps[i]));
    }
  }

  /// Fills every target cell for one copy; dead cells hold NaN.
  std::vector<std::vector<double>> draw_copy(int copy) {
    copy_ = copy;
    params_ = {};
    std::vector<std::vector<double>> out(ps_.size());
    for (std::size_t i = 0; i < ps_.size(); ++i) {
      const auto& p = ps_[i];
      auto& y = out[i];
      y.assign(static_cast<std::size_t>(T_ + 1), std::numeric_limits<double>::quiet_NaN());
      y[0] = p.baseline();
      rng::Engine noise;
      bool noise_ready = false;
      std::optional<int> first_j2r, first_pattern;
      for (int t = 1; t <= T_; ++t) {
        const auto& d = dec_[i][static_cast<std::size_t>(t)];
        const auto ti = static_cast<std::size_t>(t);
        if (d.kind == CellDecision::Kind::UseObserved) {
          y[ti] = *p.cells[ti].value;
          continue;
        }
        if (d.kind == CellDecision::Kind::DeadCell) continue;
        if (!noise_ready) {
          noise = rng::stream(seed_, rng::Purpose::CellDraw, {replicate_, static_cast<std::uint64_t>(copy),
                                                              static_cast<std::uint64_t>(p.id)});
          noise_ready = true;
        }
        const double z = rng::normal(noise);
        const auto [mean, var] = conditional(i, t, d, y, first_j2r, first_pattern);
        y[ti] = mean + std::sqrt(var) * z;
      }
      // Deltas shift the finished draws; later visits were drawn from unshifted history.
      for (int t = 1; t <= T_; ++t) {
        const auto& d = dec_[i][static_cast<std::size_t>(t)];
        if (d.imputed()) y[static_cast<std::size_t>(t)] += d.delta;
      }
    }
    return out;
  }

private:
  using Kind = ImputationMethod::Kind;

  struct ArmDraws {
    std::map<int, stats::PosteriorDraw> mar;
    std::map<int, double> mu;
    std::map<int, double> sigma2_return;
    std::map<std::pair<int, int>, stats::PosteriorDraw> retrieved;  // (cause, visit)
    std::map<int, stats::PosteriorDraw> pattern;                     // cause
  };

  struct RetrievedFit {
    stats::LinearFit fit;
    std::vector<int> levels;  // ICE visits; first is the reference level
  };

  std::optional<IceEvent> first_ice(const ObservedPatient& p) const {
    for (const auto& e : p.events)
      if (!plan_.strategies.in_regimen(e)) return e;
    return std::nullopt;
  }

  bool used(std::size_t i, int t) const {
    return t == 0 || dec_[i][static_cast<std::size_t>(t)].kind == CellDecision::Kind::UseObserved;
  }

  int role(int arm) const { return arm == plan_.reference_arm ? 0 : 1; }

  rng::Engine model_stream(int arm, DrawKind kind, std::uint64_t a, std::uint64_t b = 0) const {
    return rng::stream(seed_, rng::Purpose::ModelDraw,
                       {replicate_, static_cast<std::uint64_t>(copy_), static_cast<std::uint64_t>(role(arm)),
                        static_cast<std::uint64_t>(kind), a, b});
  }

  ArmDraws& draws(int arm) { return params_[static_cast<std::size_t>(arm)]; }

  // --- replicate-level fits ------------------------------------------------

  const stats::LinearFit& mar_fit(int arm, int v) {
    auto key = std::make_pair(arm, v);
    if (auto it = mar_fits_.find(key); it != mar_fits_.end()) return it->second;
    std::vector<std::size_t> rows;
    for (std::size_t i : by_arm_[static_cast<std::size_t>(arm)]) {
      bool ok = true;
      for (int s = 1; s <= v && ok; ++s) ok = used(i, s);
      if (ok) rows.push_back(i);
    }
    const int p = v + 1;
    if (static_cast<int>(rows.size()) < p + 2)
      throw ImputationError("MAR model for " + arm_name(arm) + " visit " + std::to_string(v) + ": " +
                            std::to_string(rows.size()) + " complete cases, need at least " + std::to_string(p + 2));
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), p);
    Eigen::VectorXd yv(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& pt = ps_[rows[r]];
      const auto ri = static_cast<Eigen::Index>(r);
      X(ri, 0) = 1.0;
      for (int s = 0; s < v; ++s) X(ri, s + 1) = *pt.cells[static_cast<std::size_t>(s)].value;
      yv(ri) = *pt.cells[static_cast<std::size_t>(v)].value;
    }
    auto f = stats::fit_ols(X, yv);
    if (!f)
      throw ImputationError("MAR model for " + arm_name(arm) + " visit " + std::to_string(v) + ": design is rank deficient");
    return mar_fits_.emplace(key, std::move(*f)).first->second;
  }

  const stats::LinearFit& return_fit(int arm, int t) {
    auto key = std::make_pair(arm, t);
    if (auto it = return_fits_.find(key); it != return_fits_.end()) return it->second;
    std::vector<std::size_t> rows;
    for (std::size_t i : by_arm_[static_cast<std::size_t>(arm)])
      if (used(i, t)) rows.push_back(i);
    if (rows.size() < 4)
      throw ImputationError("return-to-baseline variance for " + arm_name(arm) + " visit " + std::to_string(t) + ": " +
                            std::to_string(rows.size()) + " observed values, need at least 4");
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), 2);
    Eigen::VectorXd yv(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto ri = static_cast<Eigen::Index>(r);
      X(ri, 0) = 1.0;
      X(ri, 1) = ps_[rows[r]].baseline();
      yv(ri) = *ps_[rows[r]].cells[static_cast<std::size_t>(t)].value;
    }
    auto f = stats::fit_ols(X, yv);
    if (!f) throw ImputationError("return-to-baseline variance for " + arm_name(arm) + ": baseline is constant");
    return return_fits_.emplace(key, std::move(*f)).first->second;
  }

  const RetrievedFit& retrieved_fit(int arm, IceCause cause, int t) {
    auto key = std::make_tuple(arm, static_cast<int>(cause), t);
    if (auto it = retrieved_fits_.find(key); it != retrieved_fits_.end()) return it->second;
    const std::string cname(to_string(cause));
    std::vector<std::size_t> rows;
    std::vector<int> s_of;
    for (std::size_t i : by_arm_[static_cast<std::size_t>(arm)]) {
      const auto& e = first_ice_[i];
      if (!e || e->cause != cause || e->visit > t) continue;
      if (ps_[i].cells[static_cast<std::size_t>(t)].missing()) continue;
      bool rescued = false;
      for (const auto& r : ps_[i].events)
        if (r.kind == IceKind::RescueStart && r.visit <= t && !plan_.strategies.in_regimen(r)) rescued = true;
      if (rescued) continue;
      rows.push_back(i);
      s_of.push_back(e->visit);
    }
    if (rows.empty()) throw ImputationError("no retrieved dropouts for cause " + cname);
    RetrievedFit rf;
    rf.levels = s_of;
    std::sort(rf.levels.begin(), rf.levels.end());
    rf.levels.erase(std::unique(rf.levels.begin(), rf.levels.end()), rf.levels.end());
    const int p = 1 + static_cast<int>(rf.levels.size());
    if (static_cast<int>(rows.size()) < p + 2)
      throw ImputationError("too few retrieved dropouts for cause " + cname + " in " + arm_name(arm) + " at visit " +
                            std::to_string(t) + ": " + std::to_string(rows.size()) + ", need at least " +
                            std::to_string(p + 2));
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), p);
    Eigen::VectorXd yv(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto ri = static_cast<Eigen::Index>(r);
      X(ri, 0) = 1.0;
      X(ri, 1) = ps_[rows[r]].baseline();
      auto lv = std::find(rf.levels.begin(), rf.levels.end(), s_of[r]) - rf.levels.begin();
      if (lv > 0) X(ri, 1 + lv) = 1.0;
      yv(ri) = *ps_[rows[r]].cells[static_cast<std::size_t>(t)].value;
    }
    auto f = stats::fit_ols(X, yv);
    if (!f)
      throw ImputationError("retrieved-dropout model for cause " + cname + " in " + arm_name(arm) + " at visit " +
                            std::to_string(t) + " is rank deficient");
    rf.fit = std::move(*f);
    return retrieved_fits_.emplace(key, std::move(rf)).first->second;
  }

  const stats::LinearFit& pattern_fit(int arm, IceCause cause) {
    auto key = std::make_pair(arm, static_cast<int>(cause));
    if (auto it = pattern_fits_.find(key); it != pattern_fits_.end()) return it->second;
    std::vector<std::pair<double, double>> xy;
    for (std::size_t i : by_arm_[static_cast<std::size_t>(arm)]) {
      const auto& e = first_ice_[i];
      if (!e || e->cause != cause) continue;
      const auto& last = ps_[i].cells[static_cast<std::size_t>(e->visit - 1)];
      if (last.missing()) continue;
      xy.emplace_back(ps_[i].baseline(), *last.value);
    }
    const std::string cname(to_string(cause));
    if (xy.size() < 4)
      throw ImputationError("special pattern " + cname + " in " + arm_name(arm) + ": " + std::to_string(xy.size()) +
                            " donors, need at least 4");
    Eigen::MatrixXd X(static_cast<Eigen::Index>(xy.size()), 2);
    Eigen::VectorXd yv(static_cast<Eigen::Index>(xy.size()));
    for (std::size_t r = 0; r < xy.size(); ++r) {
      const auto ri = static_cast<Eigen::Index>(r);
      X(ri, 0) = 1.0;
      X(ri, 1) = xy[r].first;
      yv(ri) = xy[r].second;
    }
    auto f = stats::fit_ols(X, yv);
    if (!f) throw ImputationError("special pattern " + cname + " in " + arm_name(arm) + ": baseline is constant");
    return pattern_fits_.emplace(key, std::move(*f)).first->second;
  }

  std::pair<double, double> baseline_moments(int arm) {
    auto& cached = baseline_[static_cast<std::size_t>(arm)];
    if (cached) return *cached;
    std::vector<double> y0;
    for (std::size_t i : by_arm_[static_cast<std::size_t>(arm)]) y0.push_back(ps_[i].baseline());
    if (y0.size() < 2) throw ImputationError(arm_name(arm) + " has fewer than 2 patients");
    auto ms = stats::mean_sd(y0);
    cached = std::make_pair(ms.mean, ms.sd / std::sqrt(static_cast<double>(y0.size())));
    return *cached;
  }

  // --- per-copy parameter draws --------------------------------------------

  const stats::PosteriorDraw& mar_draw(int arm, int v) {
    auto& m = draws(arm).mar;
    if (auto it = m.find(v); it != m.end()) return it->second;
    const auto& f = mar_fit(arm, v);
    auto g = model_stream(arm, kMar, static_cast<std::uint64_t>(v));
    return m.emplace(v, stats::draw_posterior(f, g)).first->second;
  }

  double mu(int arm, int v) {
    auto& m = draws(arm).mu;
    if (auto it = m.find(v); it != m.end()) return it->second;
    double value;
    if (v == 0) {
      auto [mean, se] = baseline_moments(arm);
      auto g = model_stream(arm, kBaseline, 0);
      value = mean + se * rng::normal(g);
    } else {
      const auto& d = mar_draw(arm, v);
      value = d.beta(0);
      for (int s = 0; s < v; ++s) value += d.beta(s + 1) * mu(arm, s);
    }
    return m.emplace(v, value).first->second;
  }

  std::pair<double, double> mean_deviation(int coef_arm, int t, const std::vector<double>& y,
                                           const std::vector<double>& m_star) {
    const auto& d = mar_draw(coef_arm, t);
    double mean = m_star[static_cast<std::size_t>(t)];
    for (int s = 0; s < t; ++s)
      mean += d.beta(s + 1) * (y[static_cast<std::size_t>(s)] - m_star[static_cast<std::size_t>(s)]);
    return {mean, d.sigma2};
  }

  std::pair<double, double> conditional(std::size_t i, int t, const CellDecision& d, const std::vector<double>& y,
                                        std::optional<int>& first_j2r, std::optional<int>& first_pattern) {
    const auto& p = ps_[i];
    const int own = p.arm;
    const int ref = plan_.reference_arm;
    const ImputationMethod& method = d.method;
    std::vector<double> m_star(static_cast<std::size_t>(t + 1));
    switch (method.kind) {
      case Kind::MarMI: {
        for (int s = 0; s <= t; ++s) m_star[static_cast<std::size_t>(s)] = mu(own, s);
        return mean_deviation(own, t, y, m_star);
      }
      case Kind::JumpToReference: {
        if (!first_j2r) first_j2r = t;
        for (int s = 0; s <= t; ++s) m_star[static_cast<std::size_t>(s)] = s < *first_j2r ? mu(own, s) : mu(ref, s);
        return mean_deviation(ref, t, y, m_star);
      }
      case Kind::CopyReference: {
        for (int s = 0; s <= t; ++s) m_star[static_cast<std::size_t>(s)] = mu(ref, s);
        return mean_deviation(ref, t, y, m_star);
      }
      case Kind::ReturnToBaseline: {
        auto& cache = draws(own).sigma2_return;
        auto it = cache.find(t);
        if (it == cache.end()) {
          const auto& f = return_fit(own, t);
          auto g = model_stream(own, kReturn, static_cast<std::uint64_t>(t));
          it = cache.emplace(t, stats::draw_posterior(f, g).sigma2).first;
        }
        return {y[0], it->second};
      }
      case Kind::RetrievedDropout: {
        if (!d.governing)
          throw ImputationError("patient " + std::to_string(p.id) + " visit " + std::to_string(t) +
                                ": RetrievedDropout needs an intercurrent event");
        const auto cause = d.governing->cause;
        const auto& rf = retrieved_fit(own, cause, t);
        auto lv = std::find(rf.levels.begin(), rf.levels.end(), d.governing->visit);
        if (lv == rf.levels.end())
          throw ImputationError("no retrieved dropouts for cause " + std::string(to_string(cause)) +
                                " with the ICE at visit " + std::to_string(d.governing->visit) + " (" + arm_name(own) +
                                ", visit " + std::to_string(t) + ")");
        auto key = std::make_pair(static_cast<int>(cause), t);
        auto& cache = draws(own).retrieved;
        auto it = cache.find(key);
        if (it == cache.end()) {
          auto g = model_stream(own, kRetrieved, static_cast<std::uint64_t>(cause), static_cast<std::uint64_t>(t));
          it = cache.emplace(key, stats::draw_posterior(rf.fit, g)).first;
        }
        const auto& b = it->second.beta;
        double mean = b(0) + b(1) * y[0];
        const auto level = lv - rf.levels.begin();
        if (level > 0) mean += b(1 + level);
        return {mean, it->second.sigma2};
      }
      case Kind::SpecialPattern: {
        if (first_pattern && *first_pattern < t) {
          for (int s = 0; s <= t; ++s) m_star[static_cast<std::size_t>(s)] = mu(own, s);
          return mean_deviation(own, t, y, m_star);
        }
        first_pattern = t;
        auto& cache = draws(own).pattern;
        const int c = static_cast<int>(method.pattern);
        auto it = cache.find(c);
        if (it == cache.end()) {
          const auto& f = pattern_fit(own, method.pattern);
          auto g = model_stream(own, kPattern, static_cast<std::uint64_t>(c));
          it = cache.emplace(c, stats::draw_posterior(f, g)).first;
        }
        return {it->second.beta(0) + it->second.beta(1) * y[0], it->second.sigma2};
      }
    }
    throw ImputationError("unknown imputation method");
  }

  const std::vector<ObservedPatient>& ps_;
  const std::vector<std::vector<CellDecision>>& dec_;
  const EstimandSpec& plan_;
  std::uint64_t seed_;
  std::uint64_t replicate_;
  int T_ = 0;
  int copy_ = 0;
  std::array<std::vector<std::size_t>, 2> by_arm_;
  std::vector<std::optional<IceEvent>> first_ice_;
  std::array<std::optional<std::pair<double, double>>, 2> baseline_;
  std::map<std::pair<int, int>, stats::LinearFit> mar_fits_;
  std::map<std::pair<int, int>, stats::LinearFit> return_fits_;
  std::map<std::tuple<int, int, int>, RetrievedFit> retrieved_fits_;
  std::map<std::pair<int, int>, stats::LinearFit> pattern_fits_;
  std::array<ArmDraws, 2> params_;
};

}  // namespace mi_detail

/// Resolves every patient under `plan` and draws opts.m completed copies.
inline ImputedDatasetSet impute(const std::vector<ObservedPatient>& patients, const EstimandSpec& plan,
                                const ImputeOptions& opts) {
  if (opts.m < 1) throw ImputationError("number of imputations must be at least 1");
  require_arm(plan.reference_arm);
  std::vector<std::vector<CellDecision>> dec;
  dec.reserve(patients.size());
  for (const auto& p : patients) {
    auto d = resolve_patient_strategy(p, plan);
    if (opts.force_method)
      for (auto& c : d)
        if (c.imputed()) c.method = *opts.force_method;
    dec.push_back(std::move(d));
  }

  ImputedDatasetSet set;
  set.source = patients;
  set.provenance.resize(patients.size());
  for (std::size_t i = 0; i < patients.size(); ++i) {
    auto& prov = set.provenance[i];
    prov.resize(dec[i].size());
    for (std::size_t v = 0; v < dec[i].size(); ++v) {
      const auto& d = dec[i][v];
      if (d.kind == CellDecision::Kind::DeadCell) prov[v].kind = CellProvenance::Kind::Dead;
      else if (d.imputed()) prov[v] = {CellProvenance::Kind::Imputed, d.method, d.delta};
    }
  }
  if (patients.empty()) return set;
  mi_detail::Imputer imp(patients, dec, plan, opts.seed, opts.replicate);
  for (int k = 0; k < opts.m; ++k) set.copies.push_back(imp.draw_copy(k));
  return set;
}

}  // namespace icelab
