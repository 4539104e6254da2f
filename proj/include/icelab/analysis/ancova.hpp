#pragma once

// Analysis of one completed copy: ANCOVA of the final value on baseline and
// arm for continuous endpoints, difference in success proportions for
// composite endpoints.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "icelab/mi/imputed.hpp"
#include "icelab/oracle/target.hpp"
#include "icelab/util/regression.hpp"

namespace icelab {

struct CopyAnalysis {
  double point = 0.0;
  double variance = 0.0;
  double df_complete = std::numeric_limits<double>::infinity();
  std::vector<std::string> warnings;
};

/// OLS of y on (1, baseline, arm); returns the arm coefficient. A constant
/// baseline is dropped from the design with a warning.
inline CopyAnalysis ancova(const std::vector<double>& baseline, const std::vector<double>& y, const std::vector<int>& arm) {
  const auto n = static_cast<Eigen::Index>(y.size());
  if (baseline.size() != y.size() || arm.size() != y.size()) throw AnalysisError("ancova: input lengths differ");
  int n1 = 0;
  for (int a : arm) n1 += a == kExperimental;
  if (n1 == 0 || n1 == n) throw AnalysisError("ancova needs patients in both arms");
  CopyAnalysis out;
  bool constant_baseline = true;
  for (double b : baseline) constant_baseline = constant_baseline && b == baseline.front();

  auto design = [&](bool with_baseline) {
    Eigen::MatrixXd X(n, with_baseline ? 3 : 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      X(i, 0) = 1.0;
      if (with_baseline) X(i, 1) = baseline[static_cast<std::size_t>(i)];
      X(i, X.cols() - 1) = arm[static_cast<std::size_t>(i)] == kExperimental ? 1.0 : 0.0;
    }
    return X;
  };
  Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  std::optional<stats::LinearFit> fit;
  if (!constant_baseline) fit = stats::fit_ols(design(true), yv);
  if (!fit) {
    out.warnings.push_back("baseline is constant; dropped from the analysis model");
    fit = stats::fit_ols(design(false), yv);
    if (!fit) throw AnalysisError("ancova design is rank deficient");
  }
  const auto p = fit->p;
  if (fit->df_resid() < 1) throw AnalysisError("ancova needs more patients than parameters");
  out.point = fit->beta(p - 1);
  out.variance = fit->sigma2_hat() * fit->xtx_inv(p - 1, p - 1);
  out.df_complete = static_cast<double>(fit->df_resid());
  return out;
}

/// Success proportion difference with binomial variance.
inline CopyAnalysis proportion_difference(const std::vector<int>& success, const std::vector<int>& arm) {
  std::array<double, 2> n{}, s{};
  for (std::size_t i = 0; i < success.size(); ++i) {
    n[static_cast<std::size_t>(arm[i])] += 1.0;
    s[static_cast<std::size_t>(arm[i])] += success[i];
  }
  if (n[0] == 0.0 || n[1] == 0.0) throw AnalysisError("proportion difference needs patients in both arms");
  const double p0 = s[0] / n[0], p1 = s[1] / n[1];
  CopyAnalysis out;
  out.point = p1 - p0;
  out.variance = p1 * (1.0 - p1) / n[1] + p0 * (1.0 - p0) / n[0];
  return out;
}

/// Analyzes copy `copy` of `set`. Baseline-defined populations are applied
/// here; principal strata have no estimator.
inline CopyAnalysis analyze_copy(const ImputedDatasetSet& set, int copy, const Endpoint& endpoint,
                                 const Population& population = Population::all()) {
  if (population.kind == Population::Kind::PrincipalStratum)
    throw AnalysisError("no estimator for principal-stratum populations; only true values are available");
  std::vector<double> b, y;
  std::vector<int> arm, success;
  for (std::size_t i = 0; i < set.patients(); ++i) {
    const auto& p = set.source[i];
    if (!population.admits_baseline(p.baseline())) continue;
    const int T = p.final_visit();
    const double final = set.value(copy, i, T);
    arm.push_back(p.arm);
    b.push_back(set.value(copy, i, 0));
    if (endpoint.is_composite()) {
      const bool dead = set.cell(i, T).kind == CellProvenance::Kind::Dead;
      const bool ok = !dead && !endpoint.composite.has_failure(p.events) && endpoint.composite.meets_threshold(final);
      success.push_back(ok ? 1 : 0);
    } else {
      if (std::isnan(final)) throw AnalysisError("patient " + std::to_string(p.id) + " has no final value");
      y.push_back(final);
    }
  }
  if (arm.empty()) throw AnalysisError("analysis population '" + to_string(population) + "' is empty");
  return endpoint.is_composite() ? proportion_difference(success, arm) : ancova(b, y, arm);
}

}  // namespace icelab
