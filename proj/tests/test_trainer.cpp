// Copyright 2026 The ResAct Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "resact/gradcheck.hpp"
#include "resact/trainer.hpp"

namespace resact {
namespace {

TrainConfig small_config() {
  TrainConfig c = TrainConfig::desk_profile();
  c.net.hidden = {16, 16};
  c.net.latent_dim = 3;
  c.net.zh_dim = 3;
  c.net.zl_dim = 4;
  c.batch_size = 32;
  c.iterations = 20;
  c.w_exp = 0.3;
  c.w_con = 0.7;
  return c;
}

LoggedDataset small_data(std::uint64_t seed = 11) {
  EnvConfig env;
  env.users = 12;
  env.sessions_per_user = 5;
  return generate_dataset(env, seed);
}

struct Fixture {
  LoggedDataset data = small_data();
  TransitionTable table{data};
  TrainConfig cfg = small_config();
  ModelBundle m;
  TransitionBatch b;

  explicit Fixture(std::size_t batch = 8) {
    Rng init(1);
    m = make_bundle(4, 8, data.config.action_dim, cfg, init);
    m.normalizer = ObsNormalizer::fit(table);
    // Non-zero residual head so every actor path carries gradient.
    for (double& v : m.actor.f_a.layers.back().weight.values()) v = init.uniform(-0.4, 0.4);
    Rng pick(2);
    b = m.normalizer.apply(table.sample(batch, pick));
  }
};

TEST(Trainer, CompositeGradientMatchesFiniteDifferences) {
  Fixture f;
  Rng rng(3);
  const ActorNoise noise = ActorNoise::draw(f.b.size(), 3, 3, rng);
  const LossWeights w{0.3, 0.7};
  const ActorStepGrads g = actor_side_gradients(f.m, f.b, noise, w);
  ModelBundle& m = f.m;
  auto loss = [&] { return actor_side_objective(m, f.b, noise, w, g.prior_action); };

  auto check = [&](MlpParams& params, const MlpParams& grad, const char* name) {
    for (std::size_t li = 0; li < params.layers.size(); ++li) {
      EXPECT_LT(finite_diff_check(loss, params.layers[li].weight.values(), grad.layers[li].weight.values(), 1e-5, 1e-6),
                1e-5)
          << name << " layer " << li;
      EXPECT_LT(finite_diff_check(loss, params.layers[li].bias.values(), grad.layers[li].bias.values(), 1e-5, 1e-6),
                1e-5)
          << name << " layer " << li;
    }
  };
  check(m.cvae.encoder, g.encoder_rec, "encoder");
  check(m.cvae.decoder, detail::sum_grads(g.decoder_rec, g.decoder_j), "decoder");
  MlpParams fh = detail::sum_grads(g.f_h_j, g.f_h_exp);
  add_scaled(fh, g.f_h_con, 1.0);
  check(m.actor.f_h, fh, "f_h");
  check(m.actor.f_l, g.f_l_j, "f_l");
  check(m.actor.f_a, g.f_a_j, "f_a");
  check(m.reward_model, g.reward_exp, "reward");
}

TEST(Trainer, ZeroCriticGivesNoPolicyGradient) {
  Fixture f;
  for (auto& l : f.m.critic.q1.layers) {
    l.weight.fill(0.0);
    l.bias.fill(0.0);
  }
  Rng rng(4);
  const ActorStepGrads g = actor_side_gradients(f.m, f.b, ActorNoise::draw(f.b.size(), 3, 3, rng), {0.3, 0.7});
  EXPECT_EQ(g.j, 0.0);
  for (const MlpParams* p : {&g.decoder_j, &g.f_h_j, &g.f_l_j, &g.f_a_j}) EXPECT_EQ(p->squared_norm(), 0.0);
  EXPECT_GT(g.decoder_rec.squared_norm(), 0.0);
  EXPECT_GT(g.f_h_con.squared_norm(), 0.0);
}

TEST(Trainer, SmallActorStepRaisesFrozenCriticValue) {
  Fixture f(64);
  Rng rng(5);
  const ActorNoise noise = ActorNoise::draw(f.b.size(), 3, 3, rng);
  const ActorStepGrads g = actor_side_gradients(f.m, f.b, noise, {});
  ModelBundle stepped = f.m;
  const double lr = 1e-4;
  add_scaled(stepped.actor.f_h, g.f_h_j, -lr);
  add_scaled(stepped.actor.f_l, g.f_l_j, -lr);
  add_scaled(stepped.actor.f_a, g.f_a_j, -lr);
  const double after = actor_side_gradients(stepped, f.b, noise, {}).j;
  EXPECT_GT(after, g.j);
  const double sq = g.f_h_j.squared_norm() + g.f_l_j.squared_norm() + g.f_a_j.squared_norm();
  // First order: dJ ~ lr * |grad|^2
  EXPECT_NEAR((after - g.j) / (lr * sq), 1.0, 0.05);
}

TEST(Trainer, IncidenceFollowsTheUpdateRules) {
  Fixture f(32);
  GradientTaps taps;
  Rng rng(6);
  for (int k = 0; k < 5; ++k) {
    const TransitionBatch b = f.m.normalizer.apply(f.table.sample(32, rng));
    (void)train_iteration(f.m, b, f.cfg, rng, &taps);
  }
  using G = ParamGroup;
  using L = LossTerm;
  const std::map<G, std::set<L>> expected{
      {G::kEncoder, {L::kRec}},
      {G::kDecoder, {L::kRec, L::kJ}},
      {G::kSessionEncoder, {L::kJ, L::kExp, L::kCon}},
      {G::kRequestEncoder, {L::kJ}},
      {G::kResidualHead, {L::kJ}},
      {G::kQ1, {L::kTd}},
      {G::kQ2, {L::kTd}},
      {G::kRewardModel, {L::kExp}},
  };
  for (const auto& [group, losses] : expected) {
    for (L l : {L::kRec, L::kJ, L::kExp, L::kCon, L::kTd}) {
      EXPECT_EQ(taps.touched(group, l), losses.count(l) == 1) << to_string(group) << " / " << to_string(l);
    }
  }
}

TEST(Trainer, NoRegularizersMeansNoRegularizerGradient) {
  Fixture f(32);
  f.cfg.w_exp = 0.0;
  f.cfg.w_con = 0.0;
  Rng rng(7);
  const ActorStepGrads g = actor_side_gradients(f.m, f.b, ActorNoise::draw(f.b.size(), 3, 3, rng), {});
  EXPECT_EQ(g.f_h_exp.squared_norm(), 0.0);
  EXPECT_EQ(g.f_h_con.squared_norm(), 0.0);
  EXPECT_EQ(g.reward_exp.squared_norm(), 0.0);
  const MlpParams reward_before = f.m.reward_model;
  (void)train_iteration(f.m, f.b, f.cfg, rng);
  EXPECT_TRUE(f.m.reward_model == reward_before);
}

TEST(Trainer, UnitTauCopiesLiveIntoTargets) {
  Fixture f(32);
  f.cfg.tau = 1.0;
  Rng rng(8);
  (void)train_iteration(f.m, f.b, f.cfg, rng);
  EXPECT_TRUE(f.m.decoder_target == f.m.cvae.decoder);
  EXPECT_TRUE(f.m.actor_target.f_h == f.m.actor.f_h);
  EXPECT_TRUE(f.m.actor_target.f_l == f.m.actor.f_l);
  EXPECT_TRUE(f.m.actor_target.f_a == f.m.actor.f_a);
  EXPECT_TRUE(f.m.critic.q1_target == f.m.critic.q1);
  EXPECT_TRUE(f.m.critic.q2_target == f.m.critic.q2);
}

TEST(Trainer, NonFiniteLossNamesIterationAndLeavesParameters) {
  Fixture f(16);
  f.m.iteration = 41;
  f.b.r[3] = std::numeric_limits<double>::quiet_NaN();
  const ModelBundle before = f.m;
  Rng rng(9);
  try {
    (void)train_iteration(f.m, f.b, f.cfg, rng);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("iteration 42"), std::string::npos) << e.what();
  }
  EXPECT_TRUE(f.m.cvae.encoder == before.cvae.encoder);
  EXPECT_TRUE(f.m.actor.f_h == before.actor.f_h);
  EXPECT_TRUE(f.m.critic.q1 == before.critic.q1);
  EXPECT_EQ(f.m.iteration, 41u);
}

TEST(Trainer, RejectsRawBatches) {
  Fixture f;
  Rng rng(10);
  const TransitionBatch raw = f.table.sample(8, rng);
  EXPECT_THROW((void)actor_side_gradients(f.m, raw, ActorNoise::draw(8, 3, 3, rng), {}), std::logic_error);
}

TEST(Train, SameSeedSameHistory) {
  const LoggedDataset data = small_data();
  TrainConfig cfg = small_config();
  cfg.seed = 5;
  const TrainResult a = train(data, cfg);
  const TrainResult b = train(data, cfg);
  ASSERT_EQ(a.history.size(), 20u);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].l_rec, b.history[i].l_rec);
    EXPECT_EQ(a.history[i].l_td1, b.history[i].l_td1);
    EXPECT_EQ(a.history[i].l_td2, b.history[i].l_td2);
    EXPECT_EQ(a.history[i].mean_q, b.history[i].mean_q);
  }
  EXPECT_TRUE(a.bundle.critic.q1 == b.bundle.critic.q1);
  cfg.seed = 6;
  EXPECT_NE(train(data, cfg).history.back().l_rec, a.history.back().l_rec);
}

TEST(Train, HooksRunEveryEvalInterval) {
  TrainConfig cfg = small_config();
  cfg.iterations = 10;
  cfg.eval_interval = 4;
  int validations = 0, checkpoints = 0;
  TrainHooks hooks;
  hooks.validate = [&](const ModelBundle& m) {
    ++validations;
    return static_cast<double>(m.iteration);
  };
  hooks.checkpoint = [&](const ModelBundle&) { ++checkpoints; };
  const TrainResult r = train(small_data(), cfg, hooks);
  EXPECT_EQ(validations, 3);
  EXPECT_EQ(checkpoints, 3);
  EXPECT_EQ(r.history[3].val_ncis, 4.0);
  EXPECT_EQ(r.history[7].val_ncis, 8.0);
  EXPECT_EQ(r.history[9].val_ncis, 10.0);
  EXPECT_FALSE(r.history[4].val_ncis.has_value());
}

TEST(Train, SmokeRunHalvesReconstructionLoss) {
  EnvConfig env;
  env.users = 50;
  env.sessions_per_user = 10;  // 500 sessions
  const LoggedDataset data = generate_dataset(env, 17);
  TrainConfig cfg = TrainConfig::desk_profile();
  cfg.iterations = 200;
  cfg.seed = 17;
  const TrainResult r = train(data, cfg);
  ASSERT_EQ(r.history.size(), 200u);
  for (const auto& it : r.history) {
    for (double v : {it.l_rec, it.l_td1, it.l_td2, it.l_exp, it.l_con, it.mean_q}) ASSERT_TRUE(std::isfinite(v));
  }
  EXPECT_LE(r.history.back().l_rec, 0.5 * r.history.front().l_rec)
      << r.history.front().l_rec << " -> " << r.history.back().l_rec;
}

TEST(Train, ConfigIsCheckedBeforeTraining) {
  const LoggedDataset data = small_data();
  for (auto mutate : std::vector<std::function<void(TrainConfig&)>>{
           [](TrainConfig& c) { c.gamma = 1.0; },
           [](TrainConfig& c) { c.tau = 0.0; },
           [](TrainConfig& c) { c.tau = 1.5; },
           [](TrainConfig& c) { c.actor_lr = 0.0; },
           [](TrainConfig& c) { c.n_estimators = 0; },
           [](TrainConfig& c) { c.w_con = -1.0; },
           [](TrainConfig& c) { c.net.hidden.clear(); },
       }) {
    TrainConfig c = small_config();
    mutate(c);
    EXPECT_THROW((void)train(data, c), std::invalid_argument);
  }
  TrainConfig c = small_config();
  c.reward_head = RewardHead::kCategorical;
  EXPECT_THROW((void)train(data, c), std::invalid_argument);
  EXPECT_EQ(TrainConfig::full_profile().batch_size, 4096u);
  EXPECT_EQ(c.total_iterations(1000), 20u);
  c.iterations = 0;
  c.epochs = 5;
  c.batch_size = 32;
  EXPECT_EQ(c.total_iterations(1000), 156u);
}

}  // namespace
}  // namespace resact
