#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace icelab::stats {

/// Pairwise sum; the result depends only on the order of `x`.
inline double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 16) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  std::size_t half = x.size() / 2;
  return pairwise_sum(x.subspan(0, half)) + pairwise_sum(x.subspan(half));
}

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
  double var = 0.0;
  std::size_t n = 0;
};

/// Mean and sample SD computed around the first element. Identical inputs
/// give exactly that value and SD 0.
inline MeanSd mean_sd(std::span<const double> x) {
  MeanSd r;
  r.n = x.size();
  if (x.empty()) return r;
  const double shift = x.front();
  std::vector<double> d(x.size()), d2(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    d[i] = x[i] - shift;
    d2[i] = d[i] * d[i];
  }
  const double s = pairwise_sum(d);
  const double n = static_cast<double>(x.size());
  r.mean = s == 0.0 ? shift : shift + s / n;
  if (x.size() > 1) {
    double ss = pairwise_sum(d2) - s * s / n;
    r.var = ss > 0.0 ? ss / (n - 1.0) : 0.0;
    r.sd = std::sqrt(r.var);
  }
  return r;
}

}  // namespace icelab::stats
