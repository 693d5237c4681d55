// Copyright 2026 The ResAct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "resact/mlp.hpp"

namespace resact {

struct AdamState {
  MlpParams first_moment;
  MlpParams second_moment;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(const MlpParams& like)
      : first_moment(zeros_like(like)), second_moment(zeros_like(like)) {}
};

/// One bias-corrected Adam descent step. No gradient clipping; a non-finite
/// gradient aborts with NumericError before anything is modified.
inline void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state, double lr) {
  if (params.layers.size() != grads.layers.size() ||
      params.layers.size() != state.first_moment.layers.size()) {
    throw ShapeError("adam_step: parameter, gradient and state layer counts differ");
  }
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    if (!params.layers[li].weight.same_shape(grads.layers[li].weight) ||
        !params.layers[li].bias.same_shape(grads.layers[li].bias)) {
      throw ShapeError("adam_step: gradient shape mismatch at layer " + std::to_string(li));
    }
  }
  if (!grads.all_finite()) throw NumericError("adam_step: non-finite gradient");

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  auto update = [&](Tensor& p, const Tensor& g, Tensor& m, Tensor& v) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  };
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    auto& pl = params.layers[li];
    const auto& gl = grads.layers[li];
    auto& ml = state.first_moment.layers[li];
    auto& vl = state.second_moment.layers[li];
    update(pl.weight, gl.weight, ml.weight, vl.weight);
    update(pl.bias, gl.bias, ml.bias, vl.bias);
  }
}

}  // namespace resact
