// Copyright 2026 The ResAct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <initializer_list>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "resact/actor.hpp"
#include "resact/adam.hpp"
#include "resact/batch.hpp"
#include "resact/critic.hpp"
#include "resact/cvae.hpp"
#include "resact/regularizers.hpp"

namespace resact {

struct NetworkConfig {
  std::vector<std::size_t> hidden{64, 64};
  std::size_t latent_dim = 8;  // d_c
  std::size_t zh_dim = 16;
  std::size_t zl_dim = 16;
  double rho_max = 0.5;
};

struct TrainConfig {
  double gamma = 0.9;
  double tau = 1e-2;
  std::size_t n_estimators = 20;
  double actor_lr = 5e-6;
  double critic_lr = 5e-5;
  std::size_t batch_size = 4096;
  std::size_t epochs = 5;
  double w_exp = 5e-2;
  double w_con = 5e-1;
  bool normalize_observations = true;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;  // 0: epochs * transitions / batch_size
  std::size_t eval_interval = 250;
  RewardHead reward_head = RewardHead::kGaussian;
  NetworkConfig net;

  /// Full-size settings: large batches, 20 candidates, small learning rates.
  static TrainConfig full_profile() { return {}; }

  /// Small networks and batches that train in about a minute on one core.
  static TrainConfig desk_profile() {
    TrainConfig c;
    c.batch_size = 256;
    c.n_estimators = 5;
    c.iterations = 5000;
    c.actor_lr = 1e-4;
    c.critic_lr = 1e-3;
    return c;
  }

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("TrainConfig: gamma must lie in [0,1)");
    if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("TrainConfig: tau must lie in (0,1]");
    if (!(actor_lr > 0.0 && critic_lr > 0.0)) throw std::invalid_argument("TrainConfig: learning rates must be > 0");
    if (n_estimators == 0) throw std::invalid_argument("TrainConfig: n_estimators must be >= 1");
    if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (iterations == 0 && epochs == 0) throw std::invalid_argument("TrainConfig: no iterations requested");
    if (w_exp < 0.0 || w_con < 0.0) throw std::invalid_argument("TrainConfig: loss weights must be >= 0");
    if (eval_interval == 0) throw std::invalid_argument("TrainConfig: eval_interval must be >= 1");
    if (net.hidden.empty() || net.latent_dim == 0 || net.zh_dim == 0 || net.zl_dim == 0) {
      throw std::invalid_argument("TrainConfig: network sizes must be positive");
    }
    if (!(net.rho_max > 0.0)) throw std::invalid_argument("TrainConfig: rho_max must be > 0");
  }

  [[nodiscard]] std::size_t total_iterations(std::size_t transitions) const {
    if (iterations) return iterations;
    return std::max<std::size_t>(1, epochs * transitions / batch_size);
  }
};

struct Optimizers {
  AdamState encoder, decoder, f_h, f_l, f_a, q1, q2, reward_model;
};

/// Everything a ResAct run learns, plus what is needed to resume it.
struct ModelBundle {
  CvaeParams cvae;
  ActorParams actor;
  CriticParams critic;
  MlpParams reward_model;
  MlpParams decoder_target;
  ActorParams actor_target;
  ObsNormalizer normalizer;
  Optimizers opt;
  RewardHead reward_head = RewardHead::kGaussian;
  std::size_t iteration = 0;

  [[nodiscard]] std::size_t sh_dim() const { return actor.f_h.in_dim(); }
  [[nodiscard]] std::size_t sl_dim() const { return actor.f_l.in_dim(); }
  [[nodiscard]] std::size_t action_dim() const { return cvae.action_dim(); }
};

inline ModelBundle make_bundle(std::size_t sh_dim, std::size_t sl_dim, std::size_t action_dim,
                               const TrainConfig& cfg, Rng& rng) {
  const auto& net = cfg.net;
  ModelBundle b;
  b.cvae = make_cvae(sh_dim + sl_dim, action_dim, net.latent_dim, net.hidden, rng);
  b.actor = make_actor({sh_dim, sl_dim, action_dim, net.zh_dim, net.zl_dim, net.hidden, net.rho_max}, rng);
  b.critic = make_critics(sh_dim + sl_dim, action_dim, net.hidden, rng);
  b.reward_model = make_reward_estimator(net.zh_dim, net.hidden, cfg.reward_head, rng);
  b.decoder_target = b.cvae.decoder;
  b.actor_target = b.actor;
  b.normalizer = ObsNormalizer::identity(sh_dim, sl_dim);
  b.reward_head = cfg.reward_head;
  b.opt = {AdamState(b.cvae.encoder), AdamState(b.cvae.decoder), AdamState(b.actor.f_h),
           AdamState(b.actor.f_l),    AdamState(b.actor.f_a),     AdamState(b.critic.q1),
           AdamState(b.critic.q2),    AdamState(b.reward_model)};
  return b;
}

// ---------------------------------------------------------------------------
// Gradient taps

enum class ParamGroup { kEncoder, kDecoder, kSessionEncoder, kRequestEncoder, kResidualHead, kQ1, kQ2, kRewardModel };
enum class LossTerm { kRec, kJ, kExp, kCon, kTd };

inline std::string_view to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::kEncoder: return "theta_e";
    case ParamGroup::kDecoder: return "theta_d";
    case ParamGroup::kSessionEncoder: return "theta_h";
    case ParamGroup::kRequestEncoder: return "theta_l";
    case ParamGroup::kResidualHead: return "theta_a";
    case ParamGroup::kQ1: return "theta_q1";
    case ParamGroup::kQ2: return "theta_q2";
    case ParamGroup::kRewardModel: return "theta_o";
  }
  return "?";
}

inline std::string_view to_string(LossTerm l) {
  switch (l) {
    case LossTerm::kRec: return "L_rec";
    case LossTerm::kJ: return "J";
    case LossTerm::kExp: return "L_exp";
    case LossTerm::kCon: return "L_con";
    case LossTerm::kTd: return "L_td";
  }
  return "?";
}

/// Records the norm of every gradient contribution that reaches an
/// optimizer, keyed by (parameter group, loss term).
struct GradientTaps {
  std::map<std::pair<ParamGroup, LossTerm>, double> norms;

  void record(ParamGroup g, LossTerm l, const MlpParams& grad) {
    norms[{g, l}] += std::sqrt(grad.squared_norm());
  }
  [[nodiscard]] bool touched(ParamGroup g, LossTerm l) const {
    auto it = norms.find({g, l});
    return it != norms.end() && it->second > 0.0;
  }
};

// ---------------------------------------------------------------------------
// Actor-side objective

/// The random draws behind one actor-side evaluation, frozen so the
/// composite objective is a deterministic function of the parameters.
struct ActorNoise {
  Tensor encoder;  // [B, d_c] reparameterization of the CVAE posterior
  Tensor prior;    // [B, d_c] latent fed to the decoder for the policy action
  Tensor session;  // [B, d_zh] reparameterization of z_h

  static ActorNoise draw(std::size_t batch, std::size_t latent_dim, std::size_t zh_dim, Rng& rng) {
    ActorNoise n;
    n.encoder = rng.normal_matrix(batch, latent_dim);
    n.prior = rng.normal_matrix(batch, latent_dim);
    n.session = rng.normal_matrix(batch, zh_dim);
    return n;
  }
};

struct LossWeights {
  double w_exp = 0.0;
  double w_con = 0.0;
};

struct ActorStepGrads {
  double l_rec = 0.0;
  double j = 0.0;  // mean Q1(s, a~)
  double l_exp = 0.0;
  double l_con = 0.0;
  // Per-loss pieces; the update of each group is the sum of its pieces.
  MlpParams encoder_rec;
  MlpParams decoder_rec, decoder_j;
  MlpParams f_h_j, f_h_exp, f_h_con;
  MlpParams f_l_j, f_a_j;
  MlpParams reward_exp;
  Tensor policy_action;  // a~ used for J
  Tensor prior_action;   // a_on = D(s, c)
};

/// Gradients of F = -J + L_rec + w_exp L_exp + w_con L_con with the action
/// fed into f_a held constant: J reaches the decoder only through the direct
/// a_on term of a~ = a_on + Delta(z, a_on).
inline ActorStepGrads actor_side_gradients(const ModelBundle& m, const TransitionBatch& b, const ActorNoise& noise,
                                           const LossWeights& w) {
  if (!b.s.normalized) throw std::logic_error("actor_side_gradients: batch must be normalized first");
  ActorStepGrads g;
  const Tensor s_joint = b.s.joint();
  const std::size_t batch = b.size();

  ReconResult rec = recon_loss(m.cvae, s_joint, b.a, noise.encoder);
  g.l_rec = rec.loss;
  g.encoder_rec = std::move(rec.grad_encoder);
  g.decoder_rec = std::move(rec.grad_decoder);

  MlpCache dec_cache;
  g.prior_action = decode(m.cvae, s_joint, noise.prior, &dec_cache);
  const EncodedState enc = encode_state(m.actor, b.s, noise.session);
  const ResidualForward res = predict_residual_cached(m.actor, enc, g.prior_action);
  Tensor raw = g.prior_action;
  raw += res.delta;
  g.policy_action = clamp_actions(raw);

  MlpCache q_cache;
  const auto q = q_values(m.critic.q1, b.s, g.policy_action, &q_cache);
  for (double v : q) g.j += v / static_cast<double>(batch);
  Tensor up = Tensor::matrix(batch, 1, 1.0 / static_cast<double>(batch));
  const MlpBackward qb = mlp_backward(m.critic.q1, q_cache, up);
  const std::size_t s_dim = b.s.h.cols() + b.s.l.cols();
  // d(-J)/d a~, zero where the clamp is active.
  Tensor d_act = slice_cols(qb.input_grad, s_dim, m.action_dim());
  for (std::size_t i = 0; i < d_act.size(); ++i) {
    d_act[i] = (raw[i] > 1.0 || raw[i] < -1.0) ? 0.0 : -d_act[i];
  }

  ActorGrads ag = actor_backward(m.actor, enc, res, d_act);
  g.f_h_j = std::move(ag.f_h);
  g.f_l_j = std::move(ag.f_l);
  g.f_a_j = std::move(ag.f_a);
  g.decoder_j = mlp_backward(m.cvae.decoder, dec_cache, d_act).param_grads;

  ExpressivenessResult ex = expressiveness_loss(m.reward_model, enc.z_h, b.r, m.reward_head);
  g.l_exp = ex.loss;
  g.reward_exp = std::move(ex.grad_o);
  g.reward_exp.for_each_tensor([&](Tensor& t) { t *= w.w_exp; });
  ex.grad_z_h *= w.w_exp;
  g.f_h_exp = session_encoder_backward(m.actor, enc, {ex.grad_z_h, std::nullopt, std::nullopt});

  ConcisenessResult con = conciseness_loss(enc.posterior);
  g.l_con = con.loss;
  con.grad.mean *= w.w_con;
  con.grad.log_std *= w.w_con;
  g.f_h_con = session_encoder_backward(m.actor, enc, {std::nullopt, con.grad.mean, con.grad.log_std});
  return g;
}

/// F evaluated directly, for finite-difference checks. `frozen_prior_action`
/// replaces the a_on fed into f_a (the stop-gradient input).
inline double actor_side_objective(const ModelBundle& m, const TransitionBatch& b, const ActorNoise& noise,
                                   const LossWeights& w, const Tensor& frozen_prior_action) {
  const Tensor s_joint = b.s.joint();
  const double l_rec = recon_loss(m.cvae, s_joint, b.a, noise.encoder).loss;
  const Tensor a_on = decode(m.cvae, s_joint, noise.prior);
  const EncodedState enc = encode_state(m.actor, b.s, noise.session);
  Tensor act = a_on;
  act += predict_residual(m.actor, enc, frozen_prior_action);
  const auto q = q_values(m.critic.q1, b.s, clamp_actions(act));
  double j = 0.0;
  for (double v : q) j += v / static_cast<double>(q.size());
  const double l_exp = expressiveness_loss(m.reward_model, enc.z_h, b.r, m.reward_head).loss;
  const double l_con = conciseness_loss(enc.posterior).loss;
  return -j + l_rec + w.w_exp * l_exp + w.w_con * l_con;
}

// ---------------------------------------------------------------------------
// Critic side

/// a' = clamp(D'(s', c) + Delta'(mu_h', z_l', D'(s', c))), one prior draw per row.
inline Tensor target_policy_actions(const ModelBundle& m, const StateBatch& s_next, const Tensor& prior) {
  const Tensor a_on = decode_with(m.decoder_target, s_next.joint(), prior);
  return improved_action(m.actor_target, s_next, a_on);
}

struct CriticStep {
  double l_td1 = 0.0;
  double l_td2 = 0.0;
  double mean_q = 0.0;
  MlpParams grad_q1, grad_q2;
  std::vector<double> targets;
};

inline CriticStep critic_gradients(const ModelBundle& m, const TransitionBatch& b, const Tensor& prior, double gamma) {
  CriticStep c;
  const Tensor next = target_policy_actions(m, b.s_next, prior);
  c.targets = td_targets(m.critic, b, next, gamma);
  TdResult r1 = td_loss_and_grads(m.critic.q1, b.s, b.a, c.targets);
  TdResult r2 = td_loss_and_grads(m.critic.q2, b.s, b.a, c.targets);
  c.l_td1 = r1.loss;
  c.l_td2 = r2.loss;
  c.mean_q = r1.mean_q;
  c.grad_q1 = std::move(r1.grad);
  c.grad_q2 = std::move(r2.grad);
  return c;
}

// ---------------------------------------------------------------------------
// One iteration

struct IterationMetrics {
  std::size_t iteration = 0;
  double l_rec = 0.0;
  double l_td1 = 0.0;
  double l_td2 = 0.0;
  double l_exp = 0.0;
  double l_con = 0.0;
  double mean_q = 0.0;  // mean Q1 at the current policy's actions
  std::optional<double> val_ncis;
};

namespace detail {

inline MlpParams sum_grads(const MlpParams& a, const MlpParams& b) {
  MlpParams s = a;
  add_scaled(s, b, 1.0);
  return s;
}

inline void check_finite(const IterationMetrics& it, std::initializer_list<const MlpParams*> grads) {
  for (double v : {it.l_rec, it.l_td1, it.l_td2, it.l_exp, it.l_con, it.mean_q}) {
    if (!std::isfinite(v)) {
      throw NumericError("non-finite loss at iteration " + std::to_string(it.iteration));
    }
  }
  for (const MlpParams* g : grads) {
    if (!g->all_finite()) throw NumericError("non-finite gradient at iteration " + std::to_string(it.iteration));
  }
}

}  // namespace detail

/// One pass of the learning loop on a normalized batch: CVAE, decoder and
/// residual-actor updates, twin-critic TD updates, regularizer updates, then
/// soft target updates. All actor-side gradients are taken at the
/// parameters the iteration starts from.
inline IterationMetrics train_iteration(ModelBundle& m, const TransitionBatch& b, const TrainConfig& cfg, Rng& rng,
                                        GradientTaps* taps = nullptr) {
  const std::size_t batch = b.size();
  const ActorNoise noise = ActorNoise::draw(batch, m.cvae.latent_dim(), m.actor.zh_dim(), rng);
  const Tensor target_prior = rng.normal_matrix(batch, m.cvae.latent_dim());

  ActorStepGrads g = actor_side_gradients(m, b, noise, {cfg.w_exp, cfg.w_con});
  IterationMetrics it;
  it.iteration = m.iteration + 1;
  it.l_rec = g.l_rec;
  it.l_exp = g.l_exp;
  it.l_con = g.l_con;
  it.mean_q = g.j;

  if (taps) {
    taps->record(ParamGroup::kEncoder, LossTerm::kRec, g.encoder_rec);
    taps->record(ParamGroup::kDecoder, LossTerm::kRec, g.decoder_rec);
    taps->record(ParamGroup::kDecoder, LossTerm::kJ, g.decoder_j);
    taps->record(ParamGroup::kSessionEncoder, LossTerm::kJ, g.f_h_j);
    taps->record(ParamGroup::kRequestEncoder, LossTerm::kJ, g.f_l_j);
    taps->record(ParamGroup::kResidualHead, LossTerm::kJ, g.f_a_j);
    taps->record(ParamGroup::kSessionEncoder, LossTerm::kExp, g.f_h_exp);
    taps->record(ParamGroup::kSessionEncoder, LossTerm::kCon, g.f_h_con);
    taps->record(ParamGroup::kRewardModel, LossTerm::kExp, g.reward_exp);
  }

  // The critic step reads only the live critics and the targets, none of
  // which the actor-side updates touch, so it can be formed up front and
  // everything checked before a single parameter moves.
  CriticStep c = critic_gradients(m, b, target_prior, cfg.gamma);
  it.l_td1 = c.l_td1;
  it.l_td2 = c.l_td2;
  detail::check_finite(it, {&g.encoder_rec, &g.decoder_rec, &g.decoder_j, &g.f_h_j, &g.f_h_exp, &g.f_h_con,
                            &g.f_l_j, &g.f_a_j, &g.reward_exp, &c.grad_q1, &c.grad_q2});

  // CVAE: theta_e <- theta_e - grad L_rec.
  adam_step(m.cvae.encoder, g.encoder_rec, m.opt.encoder, cfg.actor_lr);
  // theta_d <- theta_d + grad J - grad L_rec.
  adam_step(m.cvae.decoder, detail::sum_grads(g.decoder_j, g.decoder_rec), m.opt.decoder, cfg.actor_lr);
  // theta_f <- theta_f + grad J; theta_h also carries the regularizers.
  MlpParams f_h = detail::sum_grads(g.f_h_j, g.f_h_exp);
  add_scaled(f_h, g.f_h_con, 1.0);
  adam_step(m.actor.f_l, g.f_l_j, m.opt.f_l, cfg.actor_lr);
  adam_step(m.actor.f_a, g.f_a_j, m.opt.f_a, cfg.actor_lr);

  // Twin critics.
  if (taps) {
    taps->record(ParamGroup::kQ1, LossTerm::kTd, c.grad_q1);
    taps->record(ParamGroup::kQ2, LossTerm::kTd, c.grad_q2);
  }
  adam_step(m.critic.q1, c.grad_q1, m.opt.q1, cfg.critic_lr);
  adam_step(m.critic.q2, c.grad_q2, m.opt.q2, cfg.critic_lr);

  // Regularizers: theta_h (together with its J term) and theta_o.
  adam_step(m.actor.f_h, f_h, m.opt.f_h, cfg.actor_lr);
  adam_step(m.reward_model, g.reward_exp, m.opt.reward_model, cfg.critic_lr);

  soft_update(m.cvae.decoder, m.decoder_target, cfg.tau);
  soft_update(m.actor.f_h, m.actor_target.f_h, cfg.tau);
  soft_update(m.actor.f_l, m.actor_target.f_l, cfg.tau);
  soft_update(m.actor.f_a, m.actor_target.f_a, cfg.tau);
  soft_update(m.critic.q1, m.critic.q1_target, cfg.tau);
  soft_update(m.critic.q2, m.critic.q2_target, cfg.tau);

  m.iteration += 1;
  return it;
}

// ---------------------------------------------------------------------------
// Training loop

using Validator = std::function<double(const ModelBundle&)>;
using CheckpointHook = std::function<void(const ModelBundle&)>;

struct TrainResult {
  ModelBundle bundle;
  std::vector<IterationMetrics> history;
};

struct TrainHooks {
  Validator validate;          // called every eval_interval iterations
  CheckpointHook checkpoint;   // called alongside validate
  GradientTaps* taps = nullptr;
};

/// Seed streams: 0 initialization, 1 minibatches, 2 training noise.
inline TrainResult train(const LoggedDataset& data, const TrainConfig& cfg, const TrainHooks& hooks = {}) {
  cfg.validate();
  const TransitionTable table(data);
  if (table.size() == 0) throw std::invalid_argument("train: dataset has no transitions");
  const std::size_t sh = table[0].s.s_h.size();
  const std::size_t sl = table[0].s.s_l.size();
  const std::size_t ad = table[0].a.size();
  if (cfg.reward_head == RewardHead::kCategorical && data.config.reward_mode == RewardMode::kBoth) {
    throw std::invalid_argument("train: the categorical reward head needs integer rewards (not 'both' mode)");
  }

  Rng init_rng = Rng::derive(cfg.seed, 0);
  Rng batch_rng = Rng::derive(cfg.seed, 1);
  Rng noise_rng = Rng::derive(cfg.seed, 2);
  TrainResult out;
  out.bundle = make_bundle(sh, sl, ad, cfg, init_rng);
  ModelBundle& m = out.bundle;
  m.normalizer = cfg.normalize_observations ? ObsNormalizer::fit(table) : ObsNormalizer::identity(sh, sl);

  const std::size_t total = cfg.total_iterations(table.size());
  out.history.reserve(total);
  for (std::size_t k = 0; k < total; ++k) {
    const TransitionBatch b = m.normalizer.apply(table.sample(cfg.batch_size, batch_rng));
    IterationMetrics it = train_iteration(m, b, cfg, noise_rng, hooks.taps);
    if (it.iteration % cfg.eval_interval == 0 || k + 1 == total) {
      if (hooks.validate) it.val_ncis = hooks.validate(m);
      if (hooks.checkpoint) hooks.checkpoint(m);
    }
    out.history.push_back(it);
  }
  return out;
}

}  // namespace resact
