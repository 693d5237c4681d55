// Copyright 2026 The ResAct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace resact {

/// Student-t quantile for the two levels the tools need: 0.95 (one-sided
/// 95%) and 0.975 (two-sided 95%). Tabulated for df <= 30, interpolated in
/// 1/df towards the normal quantile beyond.
inline double student_t_quantile(double p, std::size_t df) {
  static constexpr std::array<double, 30> q95{6.3138, 2.9200, 2.3534, 2.1318, 2.0150, 1.9432, 1.8946, 1.8595,
                                              1.8331, 1.8125, 1.7959, 1.7823, 1.7709, 1.7613, 1.7531, 1.7459,
                                              1.7396, 1.7341, 1.7291, 1.7247, 1.7207, 1.7171, 1.7139, 1.7109,
                                              1.7081, 1.7056, 1.7033, 1.7011, 1.6991, 1.6973};
  static constexpr std::array<double, 30> q975{12.7062, 4.3027, 3.1824, 2.7764, 2.5706, 2.4469, 2.3646, 2.3060,
                                               2.2622,  2.2281, 2.2010, 2.1788, 2.1604, 2.1448, 2.1314, 2.1199,
                                               2.1098,  2.1009, 2.0930, 2.0860, 2.0796, 2.0739, 2.0687, 2.0639,
                                               2.0595,  2.0555, 2.0518, 2.0484, 2.0452, 2.0423};
  if (df == 0) throw std::invalid_argument("student_t_quantile: df must be >= 1");
  const std::array<double, 30>* table = nullptr;
  double z = 0.0;
  if (p == 0.95) {
    table = &q95;
    z = 1.6449;
  } else if (p == 0.975) {
    table = &q975;
    z = 1.9600;
  } else {
    throw std::invalid_argument("student_t_quantile: only p = 0.95 and 0.975 are tabulated");
  }
  if (df <= 30) return (*table)[df - 1];
  return z + ((*table)[29] - z) * 30.0 / static_cast<double>(df);
}

struct Summary {
  double mean = 0.0;
  double sd = 0.0;          // sample standard deviation (n - 1)
  double half_width = 0.0;  // two-sided 95% t interval; 0 for a single value
  std::size_t n = 0;
};

inline Summary summarize(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("summarize: no values");
  Summary s;
  s.n = xs.size();
  for (double x : xs) s.mean += x / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
    s.half_width = student_t_quantile(0.975, s.n - 1) * s.sd / std::sqrt(static_cast<double>(s.n));
  }
  return s;
}

/// One-sided 95% paired-t bounds on mean(a - b).
struct PairedBound {
  double mean_diff = 0.0;
  double lower = 0.0;  // a >= b with 95% confidence iff lower >= 0
  double upper = 0.0;  // a is not shown worse than b iff upper >= 0
};

inline PairedBound paired_bound(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("paired_bound: need >= 2 matched pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const Summary s = summarize(d);
  const double se = s.sd / std::sqrt(static_cast<double>(s.n));
  const double t = student_t_quantile(0.95, s.n - 1);
  return {s.mean, s.mean - t * se, s.mean + t * se};
}

}  // namespace resact
