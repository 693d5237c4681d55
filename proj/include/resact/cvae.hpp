// Copyright 2026 The ResAct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <vector>

#include "resact/gaussian.hpp"
#include "resact/mlp.hpp"
#include "resact/rng.hpp"

namespace resact {

/// Encoder: concat(s, a) -> (mean, log_std) over the latent c.
/// Decoder: concat(s, c) -> action in [-1, 1].
struct CvaeParams {
  MlpParams encoder;
  MlpParams decoder;

  [[nodiscard]] std::size_t latent_dim() const { return encoder.out_dim() / 2; }
  [[nodiscard]] std::size_t action_dim() const { return decoder.out_dim(); }
  [[nodiscard]] std::size_t state_dim() const { return decoder.in_dim() - latent_dim(); }

  friend bool operator==(const CvaeParams&, const CvaeParams&) = default;
};

inline CvaeParams make_cvae(std::size_t state_dim, std::size_t action_dim, std::size_t latent_dim,
                            const std::vector<std::size_t>& hidden, Rng& rng) {
  CvaeParams p;
  p.encoder = make_mlp(state_dim + action_dim, hidden, 2 * latent_dim, Activation::kIdentity, rng);
  p.decoder = make_mlp(state_dim + latent_dim, hidden, action_dim, Activation::kTanh, rng);
  return p;
}

inline DiagGaussian encode(const CvaeParams& p, const Tensor& states, const Tensor& actions,
                           MlpCache* cache = nullptr) {
  const Tensor s = as_batch(states);
  const Tensor a = as_batch(actions);
  if (s.rows() != a.rows()) throw ShapeError("encode: state and action batch sizes differ");
  return DiagGaussian::from_head(mlp_forward(p.encoder, concat_cols({&s, &a}), cache));
}

/// Decoder network applied to concat(s, c); shared by live and target copies.
inline Tensor decode_with(const MlpParams& decoder, const Tensor& states, const Tensor& latents,
                          MlpCache* cache = nullptr) {
  const Tensor s = as_batch(states);
  const Tensor c = as_batch(latents);
  if (s.cols() + c.cols() != decoder.in_dim()) {
    throw ShapeError("decode: state " + s.shape_string() + " and latent " + c.shape_string() +
                     " do not fit decoder input dim " + std::to_string(decoder.in_dim()));
  }
  if (s.rows() != c.rows()) throw ShapeError("decode: state and latent batch sizes differ");
  return mlp_forward(decoder, concat_cols({&s, &c}), cache);
}

inline Tensor decode(const CvaeParams& p, const Tensor& states, const Tensor& latents,
                     MlpCache* cache = nullptr) {
  if (as_batch(latents).cols() != p.latent_dim()) {
    throw ShapeError("decode: latent has dim " + std::to_string(as_batch(latents).cols()) + ", expected " +
                     std::to_string(p.latent_dim()));
  }
  return decode_with(p.decoder, states, latents, cache);
}

struct ReconResult {
  double loss = 0.0;
  double mse = 0.0;  // batch mean of the per-row mean squared error
  double kl = 0.0;   // batch mean KL
  MlpParams grad_encoder;
  MlpParams grad_decoder;
};

/// L = mean_b [ mean_j (D(s_b, c_b)_j - a_bj)^2 + KL(posterior_b || N(0, I)) ],
/// c_b = mu_b + sigma_b * noise_b.
inline ReconResult recon_loss(const CvaeParams& p, const Tensor& states, const Tensor& actions,
                              const Tensor& noise) {
  const Tensor s = as_batch(states);
  const Tensor a = as_batch(actions);
  if (s.rows() == 0) throw std::invalid_argument("recon_loss: empty batch");
  const auto batch = static_cast<double>(s.rows());
  const auto adim = static_cast<double>(a.cols());

  MlpCache enc_cache, dec_cache;
  const DiagGaussian post = encode(p, s, a, &enc_cache);
  const Tensor c = gaussian_sample(post, noise);
  const Tensor recon = decode(p, s, c, &dec_cache);
  recon.require_same_shape(a, "recon_loss reconstruction vs action");

  ReconResult out;
  Tensor d_recon = Tensor::zeros_like(recon);
  double se = 0.0;
  for (std::size_t i = 0; i < recon.size(); ++i) {
    const double diff = recon[i] - a[i];
    se += diff * diff;
    d_recon[i] = 2.0 * diff / (adim * batch);
  }
  out.mse = se / (adim * batch);
  out.kl = kl_to_standard_normal(post) / batch;
  out.loss = out.mse + out.kl;

  MlpBackward dec_back = mlp_backward(p.decoder, dec_cache, d_recon);
  out.grad_decoder = std::move(dec_back.param_grads);
  const Tensor d_c = slice_cols(dec_back.input_grad, s.cols(), p.latent_dim());

  GaussianGrads g = gaussian_sample_backward(post, as_batch(noise), d_c);
  const GaussianGrads gk = kl_to_standard_normal_grad(post, 1.0 / batch);
  g.mean += gk.mean;
  g.log_std += gk.log_std;
  const Tensor d_head = concat_cols({&g.mean, &g.log_std});
  out.grad_encoder = mlp_backward(p.encoder, enc_cache, d_head).param_grads;
  return out;
}

/// n decoder outputs for one state, each from an independent prior draw.
/// Latents are drawn candidate by candidate, so the first n of a longer list
/// from the same stream coincide with a list of length n.
inline std::vector<std::vector<double>> sample_estimators(const CvaeParams& p, const Tensor& state,
                                                          std::size_t n, Rng& rng) {
  if (n == 0) throw std::invalid_argument("sample_estimators: n must be >= 1");
  const Tensor s = as_batch(state);
  if (s.rows() != 1) throw ShapeError("sample_estimators: expects a single state");
  Tensor states = Tensor::matrix(n, s.cols());
  for (std::size_t i = 0; i < n; ++i) std::copy(s.row(0).begin(), s.row(0).end(), states.row(i).begin());
  const Tensor latents = rng.normal_matrix(n, p.latent_dim());
  const Tensor out = decode(p, states, latents);
  std::vector<std::vector<double>> actions;
  actions.reserve(n);
  for (std::size_t i = 0; i < n; ++i) actions.push_back(out.row_vector(i));
  return actions;
}

}  // namespace resact
