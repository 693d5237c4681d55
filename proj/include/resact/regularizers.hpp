// Copyright 2026 The ResAct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "resact/gaussian.hpp"
#include "resact/mlp.hpp"

namespace resact {

/// Family of the variational reward model o(r | z_h).
enum class RewardHead { kGaussian, kCategorical };

inline std::string_view to_string(RewardHead h) {
  return h == RewardHead::kGaussian ? "gaussian" : "categorical";
}

inline RewardHead reward_head_from_string(std::string_view s) {
  if (s == "gaussian") return RewardHead::kGaussian;
  if (s == "categorical") return RewardHead::kCategorical;
  throw std::invalid_argument("unknown reward head '" + std::string(s) + "' (expected gaussian or categorical)");
}

inline constexpr std::size_t kRewardClasses = 6;  // integer rewards 0..5

inline MlpParams make_reward_estimator(std::size_t zh_dim, const std::vector<std::size_t>& hidden, RewardHead head,
                                       Rng& rng) {
  const std::size_t out = head == RewardHead::kGaussian ? 1 : kRewardClasses;
  return make_mlp(zh_dim, hidden, out, Activation::kIdentity, rng);
}

struct ExpressivenessResult {
  double loss = 0.0;
  MlpParams grad_o;
  Tensor grad_z_h;
};

namespace detail {

inline std::size_t reward_class(double r) {
  const double k = std::round(r);
  if (std::abs(r - k) > 1e-9 || k < 0.0 || k >= static_cast<double>(kRewardClasses)) {
    throw std::invalid_argument("categorical reward head needs integer rewards in 0..5, got " + std::to_string(r));
  }
  return static_cast<std::size_t>(k);
}

}  // namespace detail

/// Cross-entropy between the observed reward and o(r | z_h), dropping
/// parameter-free constants. Gaussian head: mean_b 0.5 (r_b - o(z_b))^2.
/// Categorical head: mean_b -log softmax(o(z_b))[r_b].
inline ExpressivenessResult expressiveness_loss(const MlpParams& o, const Tensor& z_h, const std::vector<double>& r,
                                                RewardHead head = RewardHead::kGaussian) {
  if (r.empty()) throw std::invalid_argument("expressiveness_loss: empty batch");
  const Tensor z = as_batch(z_h);
  if (z.rows() != r.size()) throw ShapeError("expressiveness_loss: z_h and reward counts differ");
  MlpCache cache;
  const Tensor out = mlp_forward(o, z, &cache);
  const auto n = static_cast<double>(r.size());
  Tensor up = Tensor::zeros_like(out);
  ExpressivenessResult res;
  if (head == RewardHead::kGaussian) {
    if (out.cols() != 1) throw ShapeError("expressiveness_loss: gaussian head needs one output");
    for (std::size_t b = 0; b < r.size(); ++b) {
      const double d = out[b] - r[b];
      res.loss += 0.5 * d * d / n;
      up[b] = d / n;
    }
  } else {
    if (out.cols() != kRewardClasses) throw ShapeError("expressiveness_loss: categorical head needs 6 outputs");
    for (std::size_t b = 0; b < r.size(); ++b) {
      const std::size_t k = detail::reward_class(r[b]);
      auto logits = out.row(b);
      double mx = logits[0];
      for (double v : logits) mx = std::max(mx, v);
      double z_sum = 0.0;
      for (double v : logits) z_sum += std::exp(v - mx);
      const double log_norm = mx + std::log(z_sum);
      res.loss += (log_norm - logits[k]) / n;
      auto g = up.row(b);
      for (std::size_t j = 0; j < logits.size(); ++j) {
        g[j] = (std::exp(logits[j] - log_norm) - (j == k ? 1.0 : 0.0)) / n;
      }
    }
  }
  MlpBackward back = mlp_backward(o, cache, up);
  res.grad_o = std::move(back.param_grads);
  res.grad_z_h = std::move(back.input_grad);
  return res;
}

/// Point prediction of the reward model (the mean, or the expected class).
inline std::vector<double> predict_reward(const MlpParams& o, const Tensor& z_h, RewardHead head) {
  const Tensor out = mlp_forward(o, as_batch(z_h));
  std::vector<double> pred(out.rows());
  for (std::size_t b = 0; b < out.rows(); ++b) {
    if (head == RewardHead::kGaussian) {
      pred[b] = out.at(b, 0);
      continue;
    }
    auto logits = out.row(b);
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double z_sum = 0.0, e = 0.0;
    for (std::size_t j = 0; j < logits.size(); ++j) {
      const double w = std::exp(logits[j] - mx);
      z_sum += w;
      e += w * static_cast<double>(j);
    }
    pred[b] = e / z_sum;
  }
  return pred;
}

struct ConcisenessResult {
  double loss = 0.0;
  GaussianGrads grad;  // w.r.t. (mu_h, log_sigma_h)
};

/// mean_b KL(N(mu_b, sigma_b) || N(0, I)).
inline ConcisenessResult conciseness_loss(const DiagGaussian& posterior) {
  posterior.validate();
  if (posterior.batch() == 0) throw std::invalid_argument("conciseness_loss: empty batch");
  const double inv = 1.0 / static_cast<double>(posterior.batch());
  return {kl_to_standard_normal(posterior) * inv, kl_to_standard_normal_grad(posterior, inv)};
}

}  // namespace resact
