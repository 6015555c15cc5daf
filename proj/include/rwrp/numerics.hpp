#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

namespace rwrp {

inline constexpr double kOneMinusInvE = 1.0 - 0.36787944117144233;  // 1 - e^{-1}

// Pairwise summation in index order; the result depends only on the data.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t mid = xs.size() / 2;
  return pairwise_sum(xs.first(mid)) + pairwise_sum(xs.subspan(mid));
}

// x^k with 0^0 = 1.
inline double ipow(double x, int k) { return k == 0 ? 1.0 : std::pow(x, k); }

// Bernoulli product weight r^{zeros} (1-r)^{ones}.
inline double bernoulli_weight(double r, int zeros, int ones) { return ipow(r, zeros) * ipow(1.0 - r, ones); }

// The growth constant (1 + log 2d) / (-log(e^{-1} + (1 - e^{-1}) r)) bounding
// expected path-measure range per unit distance.
inline double range_constant(int d, double r) {
  return (1.0 + std::log(2.0 * d)) / -std::log(std::exp(-1.0) + kOneMinusInvE * r);
}

}  // namespace rwrp
