// Copyright 2026 The ResAct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>

namespace resact {

/// Compares analytic gradients against central differences of `loss`.
/// `params` is perturbed in place and restored. Returns
/// max_i |analytic_i - numeric_i| / max(1e-8, |numeric_i|).
/// Entries whose numeric and analytic values are both below `abs_floor` are
/// skipped; at that scale the difference quotient is all rounding noise.
inline double finite_diff_check(const std::function<double()>& loss, std::span<double> params,
                                std::span<const double> analytic, double step,
                                double abs_floor = 0.0) {
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + step;
    const double up = loss();
    params[i] = saved - step;
    const double down = loss();
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    if (std::abs(numeric) < abs_floor && std::abs(analytic[i]) < abs_floor) continue;
    const double err = std::abs(analytic[i] - numeric) / std::max(1e-8, std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace resact
