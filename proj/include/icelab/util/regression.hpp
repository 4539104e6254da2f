#pragma once

// Least squares and the conjugate (flat-prior) posterior for the normal
// linear model: sigma^2 | y ~ SSR / chi2(n-p), beta | sigma^2, y ~
// N(beta_hat, sigma^2 (X'X)^{-1}).

#include <Eigen/Dense>
#include <optional>

#include "icelab/util/random.hpp"

namespace icelab::stats {

struct LinearFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd xtx_inv;
  Eigen::MatrixXd xtx_inv_chol;  // lower factor of (X'X)^{-1}
  double ssr = 0.0;
  int n = 0;
  int p = 0;

  int df_resid() const { return n - p; }
  double sigma2_hat() const { return df_resid() > 0 ? ssr / df_resid() : 0.0; }
};

/// Returns nothing when X is rank deficient or has fewer rows than columns.
inline std::optional<LinearFit> fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const auto n = X.rows();
  const auto p = X.cols();
  if (n < p || p == 0) return std::nullopt;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < p) return std::nullopt;
  LinearFit f;
  f.n = static_cast<int>(n);
  f.p = static_cast<int>(p);
  f.beta = qr.solve(y);
  Eigen::VectorXd r = y - X * f.beta;
  f.ssr = r.squaredNorm();
  Eigen::MatrixXd xtx = X.transpose() * X;
  f.xtx_inv = xtx.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  f.xtx_inv = 0.5 * (f.xtx_inv + f.xtx_inv.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(f.xtx_inv);
  if (llt.info() != Eigen::Success) return std::nullopt;
  f.xtx_inv_chol = llt.matrixL();
  return f;
}

struct PosteriorDraw {
  Eigen::VectorXd beta;
  double sigma2 = 0.0;
};

/// One proper posterior draw. Requires df_resid() >= 1.
inline PosteriorDraw draw_posterior(const LinearFit& f, rng::Engine& g) {
  PosteriorDraw d;
  const double df = static_cast<double>(f.df_resid());
  d.sigma2 = f.ssr > 0.0 ? f.ssr / rng::chi_squared(g, df) : 0.0;
  Eigen::VectorXd z(f.p);
  for (int j = 0; j < f.p; ++j) z(j) = rng::normal(g);
  d.beta = f.beta + std::sqrt(d.sigma2) * (f.xtx_inv_chol * z);
  return d;
}

}  // namespace icelab::stats
