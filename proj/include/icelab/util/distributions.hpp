#pragma once

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>

namespace icelab::stats {

inline double normal_cdf(double x, double mean = 0.0, double sd = 1.0) {
  return boost::math::cdf(boost::math::normal_distribution<double>(mean, sd), x);
}

/// Upper quantile of Student's t; falls back to the normal for huge or
/// infinite degrees of freedom.
inline double t_quantile(double p, double df) {
  if (!(df > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  if (!std::isfinite(df) || df > 1e7) return boost::math::quantile(boost::math::normal_distribution<double>(), p);
  return boost::math::quantile(boost::math::students_t_distribution<double>(df), p);
}

/// Two-sided p-value of a t statistic.
inline double t_two_sided_p(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  if (!std::isfinite(df) || df > 1e7)
    return 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal_distribution<double>(), std::fabs(t)));
  return 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<double>(df), std::fabs(t)));
}

}  // namespace icelab::stats
