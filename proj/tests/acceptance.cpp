// Copyright 2026 The ResAct Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and exits
// non-zero if any selected criterion fails.
//
//   RESACT_ACCEPTANCE_ONLY=1,2,3   run a subset

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "resact/resact.hpp"

namespace fs = std::filesystem;
using namespace resact;

namespace {

// Tolerances and budgets.
constexpr double kGradTol = 1e-5;
constexpr double kFdStep = 1e-5;
constexpr double kFdFloor = 1e-6;
constexpr double kGradBudgetSec = 30.0;
constexpr double kClosedFormTol = 1e-9;
constexpr double kNcisMargin = 1.05;    // ResAct vs IL and IL_CVAE
constexpr double kReturnMargin = 1.05;  // ResAct true return vs behavior
constexpr double kComparativeBudgetSec = 45.0 * 60.0;
constexpr double kCalibrationTol = 0.10;

// Experiment setup.
constexpr std::size_t kUsers = 200;
constexpr std::size_t kSessions = 30;
constexpr std::uint64_t kTrainDataSeed = 1;
constexpr std::uint64_t kTestDataSeed = 2;
constexpr std::uint64_t kValDataSeed = 3;
constexpr std::uint64_t kTrainSeed = 1;
constexpr std::uint64_t kLatentSeed = 99;
constexpr std::uint64_t kRolloutSeed = 77;
constexpr std::size_t kRolloutEpisodes = 400;
constexpr std::size_t kSeeds = 5;
constexpr std::size_t kAblationIterations = 2500;
constexpr std::size_t kSelectionStates = 1000;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void note(const std::string& s) {
  std::printf("  %s\n", s.c_str());
  std::fflush(stdout);
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// 1. gradients

double mlp_fd_error(const std::function<double()>& loss, MlpParams& p, const MlpParams& g) {
  double worst = 0.0;
  for (std::size_t li = 0; li < p.layers.size(); ++li) {
    worst = std::max(worst, finite_diff_check(loss, p.layers[li].weight.values(), g.layers[li].weight.values(),
                                              kFdStep, kFdFloor));
    worst = std::max(worst, finite_diff_check(loss, p.layers[li].bias.values(), g.layers[li].bias.values(), kFdStep,
                                              kFdFloor));
  }
  return worst;
}

Tensor uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

Verdict gradient_suite() {
  const auto t0 = Clock::now();
  const std::vector<std::size_t> hidden{16, 16};
  std::map<std::string, double> err;
  Rng rng(1);

  {  // reconstruction
    CvaeParams p = make_cvae(12, 8, 3, hidden, rng);
    const Tensor s = rng.normal_matrix(7, 12), a = uniform_matrix(rng, 7, 8, -0.9, 0.9), n = rng.normal_matrix(7, 3);
    const ReconResult r = recon_loss(p, s, a, n);
    auto loss = [&] { return recon_loss(p, s, a, n).loss; };
    err["reconstruction"] = std::max(mlp_fd_error(loss, p.encoder, r.grad_encoder), mlp_fd_error(loss, p.decoder, r.grad_decoder));
  }
  {  // TD
    CriticParams c = make_critics(12, 8, hidden, rng);
    const StateBatch s{rng.normal_matrix(9, 4), rng.normal_matrix(9, 8), true};
    const Tensor a = uniform_matrix(rng, 9, 8, -1, 1);
    std::vector<double> y(9);
    for (double& v : y) v = rng.uniform(0, 3);
    const TdResult r = td_loss_and_grads(c.q1, s, a, y);
    err["td"] = mlp_fd_error([&] { return td_loss_and_grads(c.q1, s, a, y).loss; }, c.q1, r.grad);
  }
  for (RewardHead head : {RewardHead::kGaussian, RewardHead::kCategorical}) {  // expressiveness
    MlpParams o = make_reward_estimator(4, hidden, head, rng);
    Tensor z = rng.normal_matrix(7, 4);
    std::vector<double> r(7);
    for (double& v : r) v = static_cast<double>(rng.index(6));
    const ExpressivenessResult res = expressiveness_loss(o, z, r, head);
    auto loss = [&] { return expressiveness_loss(o, z, r, head).loss; };
    const double e = std::max(mlp_fd_error(loss, o, res.grad_o),
                              finite_diff_check(loss, z.values(), res.grad_z_h.values(), kFdStep, kFdFloor));
    err[head == RewardHead::kGaussian ? "expressiveness/gaussian" : "expressiveness/categorical"] = e;
  }
  {  // conciseness
    DiagGaussian g{rng.normal_matrix(5, 4), rng.normal_matrix(5, 4)};
    const ConcisenessResult r = conciseness_loss(g);
    auto loss = [&] { return conciseness_loss(g).loss; };
    err["conciseness"] = std::max(finite_diff_check(loss, g.mean.values(), r.grad.mean.values(), kFdStep, kFdFloor),
                                  finite_diff_check(loss, g.log_std.values(), r.grad.log_std.values(), kFdStep, kFdFloor));
  }
  {  // composite actor-side objective, every group at once
    EnvConfig env;
    env.users = 12;
    env.sessions_per_user = 5;
    const LoggedDataset data = generate_dataset(env, 11);
    const TransitionTable table(data);
    TrainConfig cfg = TrainConfig::desk_profile();
    cfg.net.hidden = hidden;
    cfg.net.latent_dim = 3;
    cfg.net.zh_dim = 3;
    cfg.net.zl_dim = 4;
    Rng init(2);
    ModelBundle m = make_bundle(4, 8, env.action_dim, cfg, init);
    m.normalizer = ObsNormalizer::fit(table);
    for (double& v : m.actor.f_a.layers.back().weight.values()) v = init.uniform(-0.4, 0.4);
    const TransitionBatch b = m.normalizer.apply(table.sample(8, init));
    const ActorNoise noise = ActorNoise::draw(b.size(), 3, 3, init);
    const LossWeights w{0.3, 0.7};
    const ActorStepGrads g = actor_side_gradients(m, b, noise, w);
    auto loss = [&] { return actor_side_objective(m, b, noise, w, g.prior_action); };
    MlpParams fh = detail::sum_grads(g.f_h_j, g.f_h_exp);
    add_scaled(fh, g.f_h_con, 1.0);
    double e = mlp_fd_error(loss, m.cvae.encoder, g.encoder_rec);
    e = std::max(e, mlp_fd_error(loss, m.cvae.decoder, detail::sum_grads(g.decoder_rec, g.decoder_j)));
    e = std::max(e, mlp_fd_error(loss, m.actor.f_h, fh));
    e = std::max(e, mlp_fd_error(loss, m.actor.f_l, g.f_l_j));
    e = std::max(e, mlp_fd_error(loss, m.actor.f_a, g.f_a_j));
    e = std::max(e, mlp_fd_error(loss, m.reward_model, g.reward_exp));
    err["actor-side composite"] = e;
  }
  const double elapsed = seconds_since(t0);
  double worst = 0.0;
  for (const auto& [name, e] : err) {
    note(fmt("%-28s max rel err %.3e", name.c_str(), e));
    worst = std::max(worst, e);
  }
  return {worst < kGradTol && elapsed < kGradBudgetSec,
          fmt("gradient suite: max rel err %.3e (tol %.0e), %.1f s (budget %.0f s)", worst, kGradTol, elapsed,
              kGradBudgetSec)};
}

// ---------------------------------------------------------------------------
// 2. closed forms

Verdict closed_forms() {
  struct Case {
    std::string name;
    double got, want;
  };
  auto kl = [](double m, double ls) {
    return kl_to_standard_normal(DiagGaussian{Tensor::matrix(1, 1, {m}), Tensor::matrix(1, 1, {ls})});
  };
  const std::vector<Case> cases{
      {"KL(N(0,1))", kl(0, 0), 0.0},
      {"KL(N(1,1))", kl(1, 0), 0.5},
      {"KL(N(0,4))", kl(0, std::log(2.0)), 0.8068528194400547},
      {"TD target", td_targets_from({1.0}, {0.0}, {2.0}, {3.0}, 0.9)[0], 2.8},
      {"NCIS capped", ncis_from_ratios({{1.0, 2.0}}, {{5.0, 0.5}}, 1.0).ncis, 4.0 / 3.0},
      {"r_delta(2, 6)", static_cast<double>(reward_return_time(2.0, 6.0, 11.2794)), 3.0},
      {"r_delta(1e6, 6)", static_cast<double>(reward_return_time(1e6, 6.0, 11.2794)), 0.0},
      {"r_delta(1, 100)", static_cast<double>(reward_return_time(1.0, 100.0, 11.2794)), 5.0},
      {"r_eta(10, 4.0449)", static_cast<double>(reward_session_length(10.0, 4.0449)), 3.0},
      {"r_eta(0, 4.0449)", static_cast<double>(reward_session_length(0.0, 4.0449)), 0.0},
      {"r_eta(4, 4)", static_cast<double>(reward_session_length(4.0, 4.0)), 1.0},
  };
  double worst = 0.0;
  std::string bad;
  for (const auto& c : cases) {
    const double d = std::abs(c.got - c.want);
    worst = std::max(worst, d);
    if (!(d <= kClosedFormTol)) bad += " " + c.name;
  }
  return {bad.empty(), fmt("closed forms: %zu cases, max abs err %.1e (tol %.0e)%s%s", cases.size(), worst,
                           kClosedFormTol, bad.empty() ? "" : ", failing:", bad.c_str())};
}

// ---------------------------------------------------------------------------
// 3. incidence

Verdict incidence() {
  EnvConfig env;
  env.users = 12;
  env.sessions_per_user = 5;
  const LoggedDataset data = generate_dataset(env, 11);
  const TransitionTable table(data);
  TrainConfig cfg = TrainConfig::desk_profile();
  cfg.net.hidden = {16, 16};
  Rng rng(6);
  ModelBundle m = make_bundle(4, 8, env.action_dim, cfg, rng);
  m.normalizer = ObsNormalizer::fit(table);
  GradientTaps taps;
  for (int k = 0; k < 5; ++k) (void)train_iteration(m, m.normalizer.apply(table.sample(32, rng)), cfg, rng, &taps);

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
  std::string mismatches;
  for (const auto& [group, losses] : expected) {
    std::string row;
    for (L l : {L::kRec, L::kJ, L::kExp, L::kCon, L::kTd}) {
      const bool got = taps.touched(group, l);
      row += got ? " x" : " .";
      if (got != (losses.count(l) == 1)) mismatches += fmt(" %s/%s", std::string(to_string(group)).c_str(),
                                                           std::string(to_string(l)).c_str());
    }
    note(fmt("%-16s%s", std::string(to_string(group)).c_str(), row.c_str()));
  }
  return {mismatches.empty(),
          "incidence matrix (8 groups x 5 losses) " + (mismatches.empty() ? std::string("matches") : "differs at" + mismatches)};
}

// ---------------------------------------------------------------------------
// 8. determinism and persistence

std::string csv_of(const std::vector<IterationMetrics>& h) {
  std::ostringstream os;
  write_metrics_csv(os, h);
  return os.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

bool same_bundle(const ModelBundle& a, const ModelBundle& b) {
  return a.cvae == b.cvae && a.actor == b.actor && a.critic == b.critic && a.reward_model == b.reward_model &&
         a.decoder_target == b.decoder_target && a.actor_target == b.actor_target && a.normalizer == b.normalizer &&
         a.iteration == b.iteration && a.reward_head == b.reward_head;
}

Verdict determinism(const fs::path& tmp) {
  EnvConfig env;
  env.users = 30;
  env.sessions_per_user = 6;
  std::ostringstream d1, d2;
  write_dataset_jsonl(d1, generate_dataset(env, 5));
  write_dataset_jsonl(d2, generate_dataset(env, 5));
  const LoggedDataset data = generate_dataset(env, 5);
  const LoggedDataset val = generate_dataset(env, 6);

  TrainConfig cfg = TrainConfig::desk_profile();
  cfg.net.hidden = {32, 32};
  cfg.iterations = 300;
  cfg.eval_interval = 100;
  cfg.seed = 5;
  std::vector<std::string> failures;
  if (d1.str() != d2.str()) failures.push_back("dataset bytes");

  const BaselineResult proxy = train_cvae_bc(data, cfg);
  const TestSet vt(val);
  const Tensor beh = actions_for(proxy.policy.action_fn(), vt.states);
  TrainHooks hooks;
  hooks.validate = [&](const ModelBundle& m) { return evaluate_checkpoint(m, val, beh, EvalConfig{}, 5, kLatentSeed).ncis; };
  const TrainResult a = train(data, cfg, hooks);
  const TrainResult b = train(data, cfg, hooks);
  if (csv_of(a.history) != csv_of(b.history)) failures.push_back("resact metrics");
  if (!same_bundle(a.bundle, b.bundle)) failures.push_back("resact parameters");
  if (csv_of(train_bc(data, cfg).history) != csv_of(train_bc(data, cfg).history)) failures.push_back("bc metrics");
  if (csv_of(train_cvae_bc(data, cfg).history) != csv_of(proxy.history)) failures.push_back("cvae_bc metrics");
  if (csv_of(train_td3_direct(data, cfg).history) != csv_of(train_td3_direct(data, cfg).history)) {
    failures.push_back("td3 metrics");
  }

  const fs::path file = tmp / "bundle.ckpt";
  save_bundle(file, a.bundle);
  const ModelBundle loaded = load_bundle(file);
  if (!same_bundle(loaded, a.bundle)) failures.push_back("loaded parameters");
  save_bundle(tmp / "again.ckpt", loaded);
  if (slurp(file) != slurp(tmp / "again.ckpt")) failures.push_back("checkpoint resave bytes");
  const NcisReport before = evaluate_checkpoint(a.bundle, val, beh, EvalConfig{}, 5, kLatentSeed);
  const NcisReport after = evaluate_checkpoint(loaded, val, beh, EvalConfig{}, 5, kLatentSeed);
  if (before.ncis != after.ncis || before.ess != after.ess || before.clip_fraction != after.clip_fraction) {
    failures.push_back("evaluation after load");
  }
  // training continues identically from the checkpoint
  ModelBundle live = a.bundle, resumed = loaded;
  const TransitionTable table(data);
  Rng batches(2), r1(3), r2(3);
  for (int k = 0; k < 3; ++k) {
    const TransitionBatch batch = live.normalizer.apply(table.sample(64, batches));
    (void)train_iteration(live, batch, cfg, r1);
    (void)train_iteration(resumed, batch, cfg, r2);
  }
  if (!same_bundle(live, resumed)) failures.push_back("resumed training");

  save_baseline(tmp / "bc.ckpt", proxy.policy);
  const BaselinePolicy bl = load_baseline(tmp / "bc.ckpt");
  if (!(actions_for(bl.action_fn(), vt.states) == beh)) failures.push_back("baseline round trip");

  std::string detail = "determinism/persistence: ";
  if (failures.empty()) {
    detail += fmt("metrics CSV identical on rerun (4 methods), checkpoint bit-exact, val NCIS %.6f before and after load",
                  before.ncis);
  } else {
    detail += "mismatch in";
    for (const auto& f : failures) detail += " [" + f + "]";
  }
  return {failures.empty(), detail};
}

// ---------------------------------------------------------------------------
// 5 and 7. comparative experiment per reward mode

struct ModeRun {
  RewardMode mode;
  LoggedDataset train_ds, test_ds;
  double ncis_resact = 0, ncis_il = 0, ncis_il_cvae = 0, ncis_td3 = 0;
  double return_resact = 0, return_behavior = 0;
  double behavior_ncis = 0, behavior_ncis_exact = 0, behavior_step_reward = 0;
  double seconds = 0;
  BaselinePolicy proxy;
};

EnvConfig experiment_env(RewardMode mode) {
  EnvConfig env;
  env.users = kUsers;
  env.sessions_per_user = kSessions;
  env.reward_mode = mode;
  return env;
}

ModeRun run_mode(RewardMode mode) {
  const auto t0 = Clock::now();
  ModeRun out;
  out.mode = mode;
  const EnvConfig env = experiment_env(mode);
  out.train_ds = generate_dataset(env, kTrainDataSeed);
  out.test_ds = generate_dataset(env, kTestDataSeed);
  TrainConfig cfg = TrainConfig::desk_profile();
  cfg.seed = kTrainSeed;

  const TrainResult resact = train(out.train_ds, cfg);
  const BaselineResult bc = train_bc(out.train_ds, cfg);
  const BaselineResult cv = train_cvae_bc(out.train_ds, cfg);
  const BaselineResult td3 = train_td3_direct(out.train_ds, cfg);
  out.proxy = cv.policy;

  const TestSet test(out.test_ds);
  const EvalConfig ec;
  const Tensor proxy = actions_for(cv.policy.action_fn(), test.states);
  const Tensor exact = exact_behavior_means(out.test_ds, test);
  const ActionFn resact_fn = as_action_fn(ServingPolicy::from_bundle(resact.bundle, cfg.n_estimators), kLatentSeed);
  auto ncis = [&](const ActionFn& fn, const Tensor& behavior) {
    return ncis_value(test, actions_for(fn, test.states), behavior, ec);
  };
  const NcisReport r_resact = ncis(resact_fn, proxy);
  out.ncis_resact = r_resact.ncis;
  out.ncis_il = ncis(bc.policy.action_fn(), proxy).ncis;
  out.ncis_il_cvae = ncis(cv.policy.action_fn(), proxy).ncis;
  out.ncis_td3 = ncis(td3.policy.action_fn(), proxy).ncis;
  note(fmt("[%s] NCIS (shared CVAE-BC proxy): resact %.4f (ess %.0f)  il %.4f  il_cvae %.4f  td3 %.4f",
           std::string(to_string(mode)).c_str(), out.ncis_resact, r_resact.ess, out.ncis_il, out.ncis_il_cvae,
           out.ncis_td3));
  note(fmt("[%s] NCIS (exact behavior means, diagnostic): resact %.4f  il %.4f  il_cvae %.4f  td3 %.4f",
           std::string(to_string(mode)).c_str(), ncis(resact_fn, exact).ncis, ncis(bc.policy.action_fn(), exact).ncis,
           ncis(cv.policy.action_fn(), exact).ncis, ncis(td3.policy.action_fn(), exact).ncis));

  const auto pop = population_of(out.test_ds);
  const double p75 = out.test_ds.stats.delta_p75;
  const SimPolicy behavior = [&](const UserState& s, const UserProfile& u, Rng& r) {
    return behavior_action(env, u, s, r);
  };
  const RolloutSummary rb = rollout_policy(env, behavior, pop, p75, kRolloutEpisodes, cfg.gamma, kRolloutSeed);
  const RolloutSummary rr = rollout_policy(env, as_sim_policy(resact_fn), pop, p75, kRolloutEpisodes, cfg.gamma, kRolloutSeed);
  out.return_resact = rr.mean_discounted_return;
  out.return_behavior = rb.mean_discounted_return;
  note(fmt("[%s] true discounted return: resact %.4f +- %.4f  behavior %.4f +- %.4f",
           std::string(to_string(mode)).c_str(), rr.mean_discounted_return, rr.discounted_return_stderr,
           rb.mean_discounted_return, rb.discounted_return_stderr));

  // behavior policy scored offline, for calibration
  out.behavior_ncis = ncis_value(test, exact, proxy, ec).ncis;
  out.behavior_ncis_exact = ncis_value(test, exact, exact, ec).ncis;
  out.behavior_step_reward = rb.mean_step_reward;
  out.seconds = seconds_since(t0);
  note(fmt("[%s] done in %.0f s", std::string(to_string(mode)).c_str(), out.seconds));
  return out;
}

Verdict comparative(const std::vector<ModeRun>& runs) {
  bool ok = true;
  double total = 0.0;
  std::string detail;
  for (const auto& r : runs) {
    const bool ncis_ok = r.ncis_resact >= kNcisMargin * r.ncis_il && r.ncis_resact >= kNcisMargin * r.ncis_il_cvae &&
                         r.ncis_resact > r.ncis_td3;
    const bool ret_ok = r.return_resact >= kReturnMargin * r.return_behavior;
    ok = ok && ncis_ok && ret_ok;
    total += r.seconds;
    detail += fmt("%s[%s: NCIS x%.3f/x%.3f/x%.3f vs il/il_cvae/td3 %s, true return x%.3f vs behavior %s]",
                  detail.empty() ? "" : " ", std::string(to_string(r.mode)).c_str(), r.ncis_resact / r.ncis_il,
                  r.ncis_resact / r.ncis_il_cvae, r.ncis_resact / r.ncis_td3, ncis_ok ? "ok" : "FAIL",
                  r.return_resact / r.return_behavior, ret_ok ? "ok" : "FAIL");
  }
  const bool time_ok = total < kComparativeBudgetSec;
  return {ok && time_ok, fmt("comparative (need NCIS >= %.2fx IL, IL_CVAE and > TD3; return >= %.2fx behavior): ",
                             kNcisMargin, kReturnMargin) +
                             detail + fmt(" runtime %.0f s (budget %.0f s)", total, kComparativeBudgetSec)};
}

Verdict calibration(const std::vector<ModeRun>& runs) {
  bool ok = true;
  std::string detail;
  for (const auto& r : runs) {
    const double rel = r.behavior_ncis / r.behavior_step_reward - 1.0;
    const bool pass = std::abs(rel) <= kCalibrationTol;
    ok = ok && pass;
    note(fmt("[%s] behavior NCIS %.4f (exact-proxy %.4f) vs rollout %.4f", std::string(to_string(r.mode)).c_str(),
             r.behavior_ncis, r.behavior_ncis_exact, r.behavior_step_reward));
    detail += fmt("%s%s %+.1f%%", detail.empty() ? "" : ", ", std::string(to_string(r.mode)).c_str(), 100.0 * rel);
  }
  return {ok, fmt("NCIS calibration of the behavior policy (tol +-%.0f%%): ", 100 * kCalibrationTol) + detail};
}

// ---------------------------------------------------------------------------
// 6 and 4. regularizer ablation over seeds, then selection on the full models

struct Variant {
  const char* name;
  double w_exp, w_con;
};

struct Ablation {
  std::map<std::string, std::vector<double>> val_ncis;
  std::vector<ModelBundle> full_models;
  std::size_t n_estimators = 0;
};

Ablation run_ablation(const ModeRun& base) {
  const EnvConfig env = experiment_env(base.mode);
  const LoggedDataset val = generate_dataset(env, kValDataSeed);
  const TestSet vt(val);
  const Tensor proxy = actions_for(base.proxy.action_fn(), vt.states);
  const TrainConfig defaults = TrainConfig::desk_profile();
  const std::vector<Variant> variants{{"full", defaults.w_exp, defaults.w_con},
                                      {"no_exp", 0.0, defaults.w_con},
                                      {"no_con", defaults.w_exp, 0.0},
                                      {"none", 0.0, 0.0}};
  Ablation out;
  out.n_estimators = defaults.n_estimators;
  for (std::size_t k = 1; k <= kSeeds; ++k) {
    for (const auto& v : variants) {
      const auto t0 = Clock::now();
      TrainConfig cfg = defaults;
      cfg.iterations = kAblationIterations;
      cfg.seed = k;
      cfg.w_exp = v.w_exp;
      cfg.w_con = v.w_con;
      TrainResult r = train(base.train_ds, cfg);
      const double ncis = evaluate_checkpoint(r.bundle, val, proxy, EvalConfig{}, cfg.n_estimators, kLatentSeed).ncis;
      out.val_ncis[v.name].push_back(ncis);
      note(fmt("seed %zu %-7s val NCIS %.4f (%.0f s)", k, v.name, ncis, seconds_since(t0)));
      if (std::string(v.name) == "full") out.full_models.push_back(std::move(r.bundle));
    }
  }
  return out;
}

Verdict ablation_verdict(const Ablation& a) {
  const auto& full = a.val_ncis.at("full");
  for (const char* name : {"full", "no_exp", "no_con", "none"}) {
    const Summary s = summarize(a.val_ncis.at(name));
    const std::string extra =
        std::string(name) == "full" ? std::string() : fmt("  change vs full %+.4f", s.mean - summarize(full).mean);
    note(fmt("%-7s val NCIS %.4f +- %.4f%s", name, s.mean, s.half_width, extra.c_str()));
  }
  const PairedBound pb = paired_bound(full, a.val_ncis.at("none"));
  note(fmt("full - none: mean %+.4f, one-sided 95%% interval [%+.4f, %+.4f] (upper bound shown for reference only)",
           pb.mean_diff, pb.lower, pb.upper));
  return {pb.lower >= 0.0, fmt("ablation: full - none val NCIS %+.4f, one-sided 95%% lower bound %+.4f (need >= 0, %zu seeds)",
                               pb.mean_diff, pb.lower, full.size())};
}

Verdict selection(const Ablation& a, const ModeRun& base) {
  const EnvConfig env = experiment_env(base.mode);
  const TestSet test(base.test_ds);
  std::vector<const UserState*> states(test.states.begin(),
                                       test.states.begin() + static_cast<std::ptrdiff_t>(
                                                                 std::min(kSelectionStates, test.states.size())));
  const auto pop = population_of(base.test_ds);
  const double gamma = TrainConfig::desk_profile().gamma;
  bool monotone = true;
  std::vector<double> ret1, ret20;
  for (std::size_t k = 0; k < a.full_models.size(); ++k) {
    const ModelBundle& m = a.full_models[k];
    std::string qs;
    double prev = -1e300;
    for (std::size_t n : {1, 5, 10, 20}) {
      double q = 0.0;
      for (const Choice& c : ServingPolicy::from_bundle(m, n).act_batch(states, kLatentSeed)) q += c.q;
      q /= static_cast<double>(states.size());
      monotone = monotone && q >= prev;
      prev = q;
      qs += fmt(" n=%zu:%.5f", n, q);
    }
    auto ret = [&](std::size_t n) {
      const ActionFn fn = as_action_fn(ServingPolicy::from_bundle(m, n), kLatentSeed);
      return rollout_policy(env, as_sim_policy(fn), pop, base.test_ds.stats.delta_p75, kRolloutEpisodes, gamma,
                            kRolloutSeed)
          .mean_discounted_return;
    };
    ret1.push_back(ret(1));
    ret20.push_back(ret(20));
    note(fmt("seed %zu mean selected Q%s | return n=1 %.4f n=20 %.4f", k + 1, qs.c_str(), ret1.back(), ret20.back()));
  }
  const PairedBound pb = paired_bound(ret20, ret1);
  note(fmt("return n=20 - n=1: mean %+.4f, one-sided 95%% interval [%+.4f, %+.4f]", pb.mean_diff, pb.lower, pb.upper));
  return {monotone && pb.lower >= 0.0,
          fmt("selection: mean Q over %zu states non-decreasing in n for %zu checkpoints: %s; return n=20 - n=1 %+.4f, "
              "one-sided 95%% lower bound %+.4f (need >= 0)",
              states.size(), a.full_models.size(), monotone ? "yes" : "NO", pb.mean_diff, pb.lower)};
}

std::set<int> selected_criteria() {
  std::set<int> out;
  const char* env = std::getenv("RESACT_ACCEPTANCE_ONLY");
  if (!env || !*env) return {1, 2, 3, 4, 5, 6, 7, 8};
  std::stringstream ss(env);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const int c = std::stoi(tok);
    if (c < 1 || c > 8) throw std::invalid_argument("RESACT_ACCEPTANCE_ONLY: criteria are 1..8");
    out.insert(c);
  }
  return out;
}

}  // namespace

int main() {
  try {
    const std::set<int> want = selected_criteria();
    std::map<int, Verdict> verdicts;
    auto run = [&](int id, const char* title, const std::function<Verdict()>& f) {
      if (!want.count(id)) return;
      std::printf("criterion %d: %s\n", id, title);
      std::fflush(stdout);
      const auto t0 = Clock::now();
      verdicts[id] = f();
      note(fmt("(%.1f s)", seconds_since(t0)));
    };
    const fs::path tmp = fs::temp_directory_path() / ("resact_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(tmp);

    run(1, "gradient suite", gradient_suite);
    run(2, "closed forms", closed_forms);
    run(3, "update incidence", incidence);
    run(8, "determinism and persistence", [&] { return determinism(tmp); });

    std::vector<ModeRun> modes;
    if (want.count(4) || want.count(5) || want.count(6) || want.count(7)) {
      std::printf("training desk-scale models for criteria 4-7\n");
      const std::vector<RewardMode> which = (want.count(5) || want.count(7))
                                                ? std::vector<RewardMode>{RewardMode::kReturnTime,
                                                                          RewardMode::kSessionLength, RewardMode::kBoth}
                                                : std::vector<RewardMode>{RewardMode::kReturnTime};
      for (RewardMode m : which) modes.push_back(run_mode(m));
    }
    run(5, "comparative experiment", [&] { return comparative(modes); });
    run(7, "NCIS calibration", [&] { return calibration(modes); });
    Ablation ablation;
    if (want.count(4) || want.count(6)) {
      std::printf("ablation runs for criteria 4 and 6 (%zu seeds x 4 variants, %zu iterations)\n", kSeeds,
                  kAblationIterations);
      ablation = run_ablation(modes.front());
    }
    run(6, "regularizer ablation", [&] { return ablation_verdict(ablation); });
    run(4, "selection monotonicity", [&] { return selection(ablation, modes.front()); });
    fs::remove_all(tmp);

    std::printf("\n");
    int failed = 0;
    for (const auto& [id, v] : verdicts) {
      std::printf("criterion %d %s %s\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str());
      failed += v.pass ? 0 : 1;
    }
    std::printf("%zu/%zu criteria passed\n", verdicts.size() - static_cast<std::size_t>(failed), verdicts.size());
    return failed ? 1 : 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance aborted: %s\n", e.what());
    return 2;
  }
}
