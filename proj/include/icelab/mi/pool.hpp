#pragma once

// Rubin's rules with the Barnard-Rubin small-sample degrees of freedom.

#include <cmath>
#include <limits>
#include <vector>

#include "icelab/error.hpp"
#include "icelab/util/distributions.hpp"
#include "icelab/util/summary_stats.hpp"

namespace icelab {

struct CopyEstimate {
  double point = 0.0;
  double variance = 0.0;
};

struct PooledEstimate {
  double point = 0.0;
  double within_var = 0.0;   // W
  double between_var = 0.0;  // B
  double total_var = 0.0;    // T = W + (1 + 1/m) B
  double df = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int m = 0;

  double se() const { return std::sqrt(total_var); }
};

/// Barnard-Rubin degrees of freedom for m copies with complete-data df nu_com.
inline double barnard_rubin_df(int m, double W, double B, double nu_com) {
  const double mm = static_cast<double>(m);
  const double T = W + (1.0 + 1.0 / mm) * B;
  if (!(T > 0.0)) return nu_com;
  const double lambda = (1.0 + 1.0 / mm) * B / T;
  const double nu_obs = (nu_com + 1.0) / (nu_com + 3.0) * nu_com * (1.0 - lambda);
  if (lambda == 0.0) return nu_obs;
  const double nu_old = (mm - 1.0) / (lambda * lambda);
  if (!std::isfinite(nu_com)) return nu_old;
  return nu_old * nu_obs / (nu_old + nu_obs);
}

inline PooledEstimate pool(const std::vector<CopyEstimate>& est,
                           double nu_com = std::numeric_limits<double>::infinity(), double level = 0.95) {
  if (est.size() < 2) throw ImputationError("pooling needs m >= 2 imputations, got " + std::to_string(est.size()));
  PooledEstimate r;
  r.m = static_cast<int>(est.size());
  std::vector<double> points, vars;
  for (const auto& e : est) {
    points.push_back(e.point);
    vars.push_back(e.variance);
  }
  const auto pm = stats::mean_sd(points);
  r.point = pm.mean;
  r.within_var = stats::mean_sd(vars).mean;
  r.between_var = pm.var;
  r.total_var = r.within_var + (1.0 + 1.0 / r.m) * r.between_var;
  r.df = barnard_rubin_df(r.m, r.within_var, r.between_var, nu_com);
  const double q = stats::t_quantile(0.5 + level / 2.0, r.df);
  const double half = q * r.se();
  r.ci_low = r.point - half;
  r.ci_high = r.point + half;
  return r;
}

}  // namespace icelab
