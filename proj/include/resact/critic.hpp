// Copyright 2026 The ResAct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "resact/batch.hpp"
#include "resact/mlp.hpp"

namespace resact {

/// Twin critics concat(s_h, s_l, a) -> Q and their target copies.
struct CriticParams {
  MlpParams q1, q2;
  MlpParams q1_target, q2_target;

  friend bool operator==(const CriticParams&, const CriticParams&) = default;
};

inline MlpParams make_q_network(std::size_t state_dim, std::size_t action_dim,
                                const std::vector<std::size_t>& hidden, Rng& rng) {
  return make_mlp(state_dim + action_dim, hidden, 1, Activation::kIdentity, rng);
}

inline CriticParams make_critics(std::size_t state_dim, std::size_t action_dim,
                                 const std::vector<std::size_t>& hidden, Rng& rng) {
  CriticParams c;
  c.q1 = make_q_network(state_dim, action_dim, hidden, rng);
  c.q2 = make_q_network(state_dim, action_dim, hidden, rng);
  c.q1_target = c.q1;
  c.q2_target = c.q2;
  return c;
}

/// Q(s, a) for every row, returned as a length-B vector.
inline std::vector<double> q_values(const MlpParams& q, const StateBatch& s, const Tensor& actions,
                                    MlpCache* cache = nullptr) {
  const Tensor a = as_batch(actions);
  if (a.rows() != s.size()) throw ShapeError("q_values: state and action batch sizes differ");
  const Tensor out = mlp_forward(q, concat_cols({&s.h, &s.l, &a}), cache);
  return {out.values().begin(), out.values().end()};
}

inline double q_value(const CriticParams& c, const StateBatch& s, const Tensor& action, int which) {
  if (s.size() != 1) throw ShapeError("q_value: expects a single state");
  if (which != 1 && which != 2) throw std::invalid_argument("q_value: which must be 1 or 2");
  return q_values(which == 1 ? c.q1 : c.q2, s, action)[0];
}

/// y = r + gamma (1 - done) min(Q1'(s', a'), Q2'(s', a')).
inline std::vector<double> td_targets_from(const std::vector<double>& r, const std::vector<double>& done,
                                           const std::vector<double>& q1_next,
                                           const std::vector<double>& q2_next, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("td_targets: gamma must lie in [0,1)");
  if (done.size() != r.size() || q1_next.size() != r.size() || q2_next.size() != r.size()) {
    throw ShapeError("td_targets: batch sizes differ");
  }
  std::vector<double> y(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    y[i] = r[i];
    if (done[i] == 0.0) y[i] += gamma * std::min(q1_next[i], q2_next[i]);
  }
  return y;
}

/// Targets with next actions already chosen by the target policy.
inline std::vector<double> td_targets(const CriticParams& c, const TransitionBatch& b, const Tensor& next_actions,
                                      double gamma) {
  return td_targets_from(b.r, b.done, q_values(c.q1_target, b.s_next, next_actions),
                         q_values(c.q2_target, b.s_next, next_actions), gamma);
}

struct TdResult {
  double loss = 0.0;
  MlpParams grad;
  double mean_q = 0.0;
};

/// mean_b (Q(s_b, a_b) - y_b)^2 with y held constant.
inline TdResult td_loss_and_grads(const MlpParams& q, const StateBatch& s, const Tensor& actions,
                                  const std::vector<double>& y) {
  if (y.empty()) throw std::invalid_argument("td_loss: empty batch");
  MlpCache cache;
  const auto pred = q_values(q, s, actions, &cache);
  if (pred.size() != y.size()) throw ShapeError("td_loss: target count differs from batch size");
  const auto n = static_cast<double>(y.size());
  Tensor up = Tensor::matrix(y.size(), 1);
  TdResult out;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = pred[i] - y[i];
    out.loss += d * d / n;
    out.mean_q += pred[i] / n;
    up[i] = 2.0 * d / n;
  }
  out.grad = mlp_backward(q, cache, up).param_grads;
  return out;
}

/// target <- tau * live + (1 - tau) * target.
inline void soft_update(const MlpParams& live, MlpParams& target, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("soft_update: tau must lie in [0,1]");
  if (live.layers.size() != target.layers.size()) throw ShapeError("soft_update: layer count mismatch");
  for (std::size_t li = 0; li < live.layers.size(); ++li) {
    auto blend = [tau](const Tensor& src, Tensor& dst) {
      src.require_same_shape(dst, "soft_update");
      if (tau == 1.0) {
        dst = src;
        return;
      }
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = tau * src[i] + (1.0 - tau) * dst[i];
    };
    blend(live.layers[li].weight, target.layers[li].weight);
    blend(live.layers[li].bias, target.layers[li].bias);
  }
}

}  // namespace resact
