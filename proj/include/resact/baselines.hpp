// Copyright 2026 The ResAct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string_view>
#include <vector>

#include "resact/adam.hpp"
#include "resact/batch.hpp"
#include "resact/critic.hpp"
#include "resact/cvae.hpp"
#include "resact/policy.hpp"
#include "resact/trainer.hpp"

namespace resact {

enum class BaselineKind { kBc, kCvaeBc, kTd3Direct };

inline std::string_view to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::kBc: return "bc";
    case BaselineKind::kCvaeBc: return "cvae_bc";
    case BaselineKind::kTd3Direct: return "td3";
  }
  return "bc";
}

inline BaselineKind baseline_kind_from_string(std::string_view s) {
  if (s == "bc") return BaselineKind::kBc;
  if (s == "cvae_bc") return BaselineKind::kCvaeBc;
  if (s == "td3" || s == "td3_direct") return BaselineKind::kTd3Direct;
  throw std::invalid_argument("unknown baseline '" + std::string(s) + "' (expected bc, cvae_bc or td3)");
}

/// TD3 extras on top of TrainConfig.
struct Td3Config {
  double policy_noise = 0.2;  // target policy smoothing std
  double noise_clip = 0.5;
  std::size_t policy_delay = 2;
};

struct BaselinePolicy {
  BaselineKind kind = BaselineKind::kBc;
  MlpParams actor;  // bc / td3: s -> a (tanh head)
  CvaeParams cvae;  // cvae_bc
  CriticParams critic;  // td3 only
  ObsNormalizer normalizer;

  [[nodiscard]] Tensor act(const std::vector<const UserState*>& states) const {
    const StateBatch s = normalizer.apply(states_from(states));
    if (kind == BaselineKind::kCvaeBc) {
      return decode(cvae, s.joint(), Tensor::matrix(states.size(), cvae.latent_dim(), 0.0));
    }
    return mlp_forward(actor, s.joint());
  }

  [[nodiscard]] ActionFn action_fn() const {
    return [p = *this](const std::vector<const UserState*>& states) { return p.act(states); };
  }
};

struct BaselineResult {
  BaselinePolicy policy;
  std::vector<IterationMetrics> history;  // l_rec carries the imitation loss
};

namespace detail {

inline TransitionTable checked_table(const LoggedDataset& data, const char* who) {
  TransitionTable table(data);
  if (table.size() == 0) throw std::invalid_argument(std::string(who) + ": dataset has no transitions");
  return table;
}

inline ObsNormalizer fitted(const TransitionTable& t, const TrainConfig& cfg) {
  return cfg.normalize_observations ? ObsNormalizer::fit(t)
                                    : ObsNormalizer::identity(t[0].s.s_h.size(), t[0].s.s_l.size());
}

}  // namespace detail

/// Mean squared error between a tanh network and the logged action.
inline double bc_loss(const MlpParams& actor, const StateBatch& s, const Tensor& a, MlpParams* grad) {
  MlpCache cache;
  const Tensor out = mlp_forward(actor, s.joint(), &cache);
  Tensor up = Tensor::zeros_like(out);
  double loss = 0.0;
  const auto n = static_cast<double>(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = out[i] - a[i];
    loss += d * d / n;
    up[i] = 2.0 * d / n;
  }
  if (grad) *grad = mlp_backward(actor, cache, up).param_grads;
  return loss;
}

inline BaselineResult train_bc(const LoggedDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  const TransitionTable table = detail::checked_table(data, "train_bc");
  Rng init = Rng::derive(cfg.seed, 0), batches = Rng::derive(cfg.seed, 1);
  BaselineResult out;
  BaselinePolicy& p = out.policy;
  p.kind = BaselineKind::kBc;
  p.normalizer = detail::fitted(table, cfg);
  const std::size_t sdim = table[0].s.s_h.size() + table[0].s.s_l.size();
  p.actor = make_mlp(sdim, cfg.net.hidden, table[0].a.size(), Activation::kTanh, init);
  AdamState opt(p.actor);
  const std::size_t total = cfg.total_iterations(table.size());
  for (std::size_t k = 0; k < total; ++k) {
    const TransitionBatch b = p.normalizer.apply(table.sample(cfg.batch_size, batches));
    MlpParams g;
    IterationMetrics it;
    it.iteration = k + 1;
    it.l_rec = bc_loss(p.actor, b.s, b.a, &g);
    detail::check_finite(it, {&g});
    adam_step(p.actor, g, opt, cfg.actor_lr);
    out.history.push_back(it);
  }
  return out;
}

inline BaselineResult train_cvae_bc(const LoggedDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  const TransitionTable table = detail::checked_table(data, "train_cvae_bc");
  Rng init = Rng::derive(cfg.seed, 0), batches = Rng::derive(cfg.seed, 1), noise = Rng::derive(cfg.seed, 2);
  BaselineResult out;
  BaselinePolicy& p = out.policy;
  p.kind = BaselineKind::kCvaeBc;
  p.normalizer = detail::fitted(table, cfg);
  const std::size_t sdim = table[0].s.s_h.size() + table[0].s.s_l.size();
  p.cvae = make_cvae(sdim, table[0].a.size(), cfg.net.latent_dim, cfg.net.hidden, init);
  AdamState enc(p.cvae.encoder), dec(p.cvae.decoder);
  const std::size_t total = cfg.total_iterations(table.size());
  for (std::size_t k = 0; k < total; ++k) {
    const TransitionBatch b = p.normalizer.apply(table.sample(cfg.batch_size, batches));
    const ReconResult r = recon_loss(p.cvae, b.s.joint(), b.a, noise.normal_matrix(b.size(), p.cvae.latent_dim()));
    IterationMetrics it;
    it.iteration = k + 1;
    it.l_rec = r.loss;
    detail::check_finite(it, {&r.grad_encoder, &r.grad_decoder});
    adam_step(p.cvae.encoder, r.grad_encoder, enc, cfg.actor_lr);
    adam_step(p.cvae.decoder, r.grad_decoder, dec, cfg.actor_lr);
    out.history.push_back(it);
  }
  return out;
}

/// TD3 on the logged data with a direct actor s -> a: clipped double Q,
/// delayed actor and target updates, target policy smoothing.
inline BaselineResult train_td3_direct(const LoggedDataset& data, const TrainConfig& cfg, const Td3Config& td3 = {}) {
  cfg.validate();
  if (td3.policy_delay == 0) throw std::invalid_argument("train_td3_direct: policy_delay must be >= 1");
  const TransitionTable table = detail::checked_table(data, "train_td3_direct");
  Rng init = Rng::derive(cfg.seed, 0), batches = Rng::derive(cfg.seed, 1), noise = Rng::derive(cfg.seed, 2);
  BaselineResult out;
  BaselinePolicy& p = out.policy;
  p.kind = BaselineKind::kTd3Direct;
  p.normalizer = detail::fitted(table, cfg);
  const std::size_t sdim = table[0].s.s_h.size() + table[0].s.s_l.size();
  const std::size_t adim = table[0].a.size();
  p.actor = make_mlp(sdim, cfg.net.hidden, adim, Activation::kTanh, init);
  p.critic = make_critics(sdim, adim, cfg.net.hidden, init);
  MlpParams actor_target = p.actor;
  AdamState opt_actor(p.actor), opt_q1(p.critic.q1), opt_q2(p.critic.q2);

  const std::size_t total = cfg.total_iterations(table.size());
  for (std::size_t k = 0; k < total; ++k) {
    const TransitionBatch b = p.normalizer.apply(table.sample(cfg.batch_size, batches));
    Tensor next = mlp_forward(actor_target, b.s_next.joint());
    for (double& v : next.values()) {
      v = std::clamp(v + std::clamp(td3.policy_noise * noise.normal(), -td3.noise_clip, td3.noise_clip), -1.0, 1.0);
    }
    const auto y = td_targets(p.critic, b, next, cfg.gamma);
    TdResult r1 = td_loss_and_grads(p.critic.q1, b.s, b.a, y);
    TdResult r2 = td_loss_and_grads(p.critic.q2, b.s, b.a, y);
    IterationMetrics it;
    it.iteration = k + 1;
    it.l_td1 = r1.loss;
    it.l_td2 = r2.loss;
    it.mean_q = r1.mean_q;
    detail::check_finite(it, {&r1.grad, &r2.grad});
    adam_step(p.critic.q1, r1.grad, opt_q1, cfg.critic_lr);
    adam_step(p.critic.q2, r2.grad, opt_q2, cfg.critic_lr);

    if ((k + 1) % td3.policy_delay == 0) {
      // Ascend Q1(s, pi(s)).
      MlpCache a_cache, q_cache;
      const Tensor act = mlp_forward(p.actor, b.s.joint(), &a_cache);
      const auto q = q_values(p.critic.q1, b.s, act, &q_cache);
      double j = 0.0;
      for (double v : q) j += v / static_cast<double>(q.size());
      it.mean_q = j;
      const MlpBackward qb =
          mlp_backward(p.critic.q1, q_cache, Tensor::matrix(q.size(), 1, -1.0 / static_cast<double>(q.size())));
      const Tensor d_act = slice_cols(qb.input_grad, sdim, adim);
      const MlpParams g = mlp_backward(p.actor, a_cache, d_act).param_grads;
      detail::check_finite(it, {&g});
      adam_step(p.actor, g, opt_actor, cfg.actor_lr);
      soft_update(p.actor, actor_target, cfg.tau);
      soft_update(p.critic.q1, p.critic.q1_target, cfg.tau);
      soft_update(p.critic.q2, p.critic.q2_target, cfg.tau);
    }
    out.history.push_back(it);
  }
  return out;
}

}  // namespace resact
