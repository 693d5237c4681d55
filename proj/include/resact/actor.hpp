// Copyright 2026 The ResAct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "resact/batch.hpp"
#include "resact/gaussian.hpp"
#include "resact/mlp.hpp"

namespace resact {

/// f_h: s_h -> (mu_h, log_sigma_h); f_l: s_l -> z_l; f_a: concat(z_h, z_l, a) -> residual.
struct ActorParams {
  MlpParams f_h;
  MlpParams f_l;
  MlpParams f_a;
  double rho_max = 0.5;

  [[nodiscard]] std::size_t zh_dim() const { return f_h.out_dim() / 2; }
  [[nodiscard]] std::size_t zl_dim() const { return f_l.out_dim(); }
  [[nodiscard]] std::size_t action_dim() const { return f_a.out_dim(); }

  friend bool operator==(const ActorParams&, const ActorParams&) = default;
};

struct ActorShape {
  std::size_t sh_dim = 4;
  std::size_t sl_dim = 8;
  std::size_t action_dim = 8;
  std::size_t zh_dim = 16;
  std::size_t zl_dim = 16;
  std::vector<std::size_t> hidden{64, 64};
  double rho_max = 0.5;
};

/// The residual head starts at zero, so the initial policy is the decoder.
inline ActorParams make_actor(const ActorShape& sh, Rng& rng) {
  ActorParams p;
  p.f_h = make_mlp(sh.sh_dim, sh.hidden, 2 * sh.zh_dim, Activation::kIdentity, rng);
  p.f_l = make_mlp(sh.sl_dim, sh.hidden, sh.zl_dim, Activation::kIdentity, rng);
  p.f_a = make_mlp(sh.zh_dim + sh.zl_dim + sh.action_dim, sh.hidden, sh.action_dim, Activation::kTanh, rng);
  zero_output_layer(p.f_a);
  p.rho_max = sh.rho_max;
  return p;
}

struct EncodedState {
  Tensor z_h;
  Tensor z_l;
  DiagGaussian posterior;  // (mu_h, log_sigma_h)
  Tensor noise;            // the draw behind z_h; zeros in evaluation mode
  MlpCache h_cache;
  MlpCache l_cache;
};

/// Training mode passes `noise`; evaluation mode (nullopt) uses z_h = mu_h.
inline EncodedState encode_state(const ActorParams& p, const StateBatch& s,
                                 const std::optional<Tensor>& noise = std::nullopt) {
  EncodedState e;
  e.posterior = DiagGaussian::from_head(mlp_forward(p.f_h, s.h, &e.h_cache));
  e.noise = noise ? as_batch(*noise) : Tensor::zeros_like(e.posterior.mean);
  e.z_h = gaussian_sample(e.posterior, e.noise);
  e.z_l = mlp_forward(p.f_l, s.l, &e.l_cache);
  return e;
}

struct ResidualForward {
  Tensor delta;
  MlpCache a_cache;
};

inline ResidualForward predict_residual_cached(const ActorParams& p, const EncodedState& enc,
                                               const Tensor& actions) {
  const Tensor a = as_batch(actions);
  if (a.cols() != p.action_dim()) {
    throw ShapeError("predict_residual: action has dim " + std::to_string(a.cols()) + ", expected " +
                     std::to_string(p.action_dim()));
  }
  ResidualForward f;
  f.delta = mlp_forward(p.f_a, concat_cols({&enc.z_h, &enc.z_l, &a}), &f.a_cache);
  f.delta *= p.rho_max;
  return f;
}

/// Delta = rho_max * tanh(...), each component within +-rho_max.
inline Tensor predict_residual(const ActorParams& p, const EncodedState& enc, const Tensor& actions) {
  return predict_residual_cached(p, enc, actions).delta;
}

inline Tensor clamp_actions(Tensor a) {
  for (double& v : a.values()) v = std::clamp(v, -1.0, 1.0);
  return a;
}

/// clamp(a_on + Delta, -1, 1) in evaluation mode.
inline Tensor improved_action(const ActorParams& p, const StateBatch& s, const Tensor& a_on) {
  const EncodedState enc = encode_state(p, s);
  Tensor out = as_batch(a_on);
  out += predict_residual(p, enc, out);
  return clamp_actions(std::move(out));
}

struct ActorGrads {
  MlpParams f_h;
  MlpParams f_l;
  MlpParams f_a;
  Tensor action_input;  // gradient w.r.t. the a fed into f_a
};

/// Extra upstream gradients that reach f_h without passing through f_a.
struct SessionUpstream {
  std::optional<Tensor> z_h;
  std::optional<Tensor> mean;
  std::optional<Tensor> log_std;
};

/// Backpropagates `d_delta` (gradient on Delta) plus optional direct
/// gradients on z_h / mu_h / log_sigma_h through the whole actor.
inline ActorGrads actor_backward(const ActorParams& p, const EncodedState& enc, const ResidualForward& fwd,
                                 const Tensor& d_delta, const SessionUpstream& extra = {}) {
  Tensor g = as_batch(d_delta);
  g *= p.rho_max;
  MlpBackward ba = mlp_backward(p.f_a, fwd.a_cache, g);
  ActorGrads out;
  out.f_a = std::move(ba.param_grads);
  Tensor d_zh = slice_cols(ba.input_grad, 0, p.zh_dim());
  const Tensor d_zl = slice_cols(ba.input_grad, p.zh_dim(), p.zl_dim());
  out.action_input = slice_cols(ba.input_grad, p.zh_dim() + p.zl_dim(), p.action_dim());
  if (extra.z_h) d_zh += *extra.z_h;

  GaussianGrads gg = gaussian_sample_backward(enc.posterior, enc.noise, d_zh);
  if (extra.mean) gg.mean += *extra.mean;
  if (extra.log_std) gg.log_std += *extra.log_std;
  out.f_h = mlp_backward(p.f_h, enc.h_cache, concat_cols({&gg.mean, &gg.log_std})).param_grads;
  out.f_l = mlp_backward(p.f_l, enc.l_cache, d_zl).param_grads;
  return out;
}

/// Gradients reaching f_h only (the regularizers never touch f_l or f_a).
inline MlpParams session_encoder_backward(const ActorParams& p, const EncodedState& enc,
                                          const SessionUpstream& up) {
  Tensor d_zh = up.z_h ? *up.z_h : Tensor::zeros_like(enc.z_h);
  GaussianGrads gg = gaussian_sample_backward(enc.posterior, enc.noise, d_zh);
  if (up.mean) gg.mean += *up.mean;
  if (up.log_std) gg.log_std += *up.log_std;
  return mlp_backward(p.f_h, enc.h_cache, concat_cols({&gg.mean, &gg.log_std})).param_grads;
}

}  // namespace resact
