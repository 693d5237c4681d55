// Copyright 2026 The ResAct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <set>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "resact/env.hpp"
#include "resact/evaluator.hpp"
#include "resact/trainer.hpp"

namespace resact {

using json = nlohmann::json;

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) throw std::invalid_argument(std::string(what) + ": expected a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw std::invalid_argument(std::string(what) + ": unknown key '" + k + "'");
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline json to_json(const EnvConfig& c) {
  return {{"action_dim", c.action_dim},
          {"session_feature_dim", c.session_feature_dim},
          {"request_feature_dim", c.request_feature_dim},
          {"satisfaction_history", c.satisfaction_history},
          {"kappa", c.kappa},
          {"beta", c.beta},
          {"ema_decay", c.ema_decay},
          {"base_continue", c.base_continue},
          {"delta_base", c.delta_base},
          {"behavior_noise", c.behavior_noise},
          {"bias_scale", c.bias_scale},
          {"preference_spread", c.preference_spread},
          {"preference_coupling", c.preference_coupling},
          {"return_jitter", c.return_jitter},
          {"max_session_length", c.max_session_length},
          {"users", c.users},
          {"sessions_per_user", c.sessions_per_user},
          {"reward_mode", std::string(to_string(c.reward_mode))},
          {"world_seed", c.world_seed}};
}

inline EnvConfig env_config_from_json(const json& j, EnvConfig c = {}) {
  detail::reject_unknown(j, {"action_dim", "session_feature_dim", "request_feature_dim", "satisfaction_history",
                             "kappa", "beta", "ema_decay", "base_continue", "delta_base", "behavior_noise",
                             "bias_scale", "preference_spread", "preference_coupling", "return_jitter",
                             "max_session_length", "users", "sessions_per_user", "reward_mode", "world_seed"},
                         "env config");
  using detail::read_opt;
  read_opt(j, "action_dim", c.action_dim);
  read_opt(j, "session_feature_dim", c.session_feature_dim);
  read_opt(j, "request_feature_dim", c.request_feature_dim);
  read_opt(j, "satisfaction_history", c.satisfaction_history);
  read_opt(j, "kappa", c.kappa);
  read_opt(j, "beta", c.beta);
  read_opt(j, "ema_decay", c.ema_decay);
  read_opt(j, "base_continue", c.base_continue);
  read_opt(j, "delta_base", c.delta_base);
  read_opt(j, "behavior_noise", c.behavior_noise);
  read_opt(j, "bias_scale", c.bias_scale);
  read_opt(j, "preference_spread", c.preference_spread);
  read_opt(j, "preference_coupling", c.preference_coupling);
  read_opt(j, "return_jitter", c.return_jitter);
  read_opt(j, "max_session_length", c.max_session_length);
  read_opt(j, "users", c.users);
  read_opt(j, "sessions_per_user", c.sessions_per_user);
  if (j.contains("reward_mode")) c.reward_mode = reward_mode_from_string(j.at("reward_mode").get<std::string>());
  read_opt(j, "world_seed", c.world_seed);
  c.validate();
  return c;
}

inline json to_json(const TrainConfig& c) {
  return {{"gamma", c.gamma},
          {"tau", c.tau},
          {"n_estimators", c.n_estimators},
          {"actor_lr", c.actor_lr},
          {"critic_lr", c.critic_lr},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"w_exp", c.w_exp},
          {"w_con", c.w_con},
          {"normalize_observations", c.normalize_observations},
          {"seed", c.seed},
          {"iterations", c.iterations},
          {"eval_interval", c.eval_interval},
          {"reward_head", std::string(to_string(c.reward_head))},
          {"hidden", c.net.hidden},
          {"latent_dim", c.net.latent_dim},
          {"zh_dim", c.net.zh_dim},
          {"zl_dim", c.net.zl_dim},
          {"rho_max", c.net.rho_max}};
}

inline TrainConfig train_config_from_json(const json& j, TrainConfig c = TrainConfig::desk_profile()) {
  detail::reject_unknown(j, {"gamma", "tau", "n_estimators", "actor_lr", "critic_lr", "batch_size", "epochs", "w_exp",
                             "w_con", "normalize_observations", "seed", "iterations", "eval_interval", "reward_head",
                             "hidden", "latent_dim", "zh_dim", "zl_dim", "rho_max"},
                         "train config");
  using detail::read_opt;
  read_opt(j, "gamma", c.gamma);
  read_opt(j, "tau", c.tau);
  read_opt(j, "n_estimators", c.n_estimators);
  read_opt(j, "actor_lr", c.actor_lr);
  read_opt(j, "critic_lr", c.critic_lr);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "epochs", c.epochs);
  read_opt(j, "w_exp", c.w_exp);
  read_opt(j, "w_con", c.w_con);
  read_opt(j, "normalize_observations", c.normalize_observations);
  read_opt(j, "seed", c.seed);
  read_opt(j, "iterations", c.iterations);
  read_opt(j, "eval_interval", c.eval_interval);
  if (j.contains("reward_head")) c.reward_head = reward_head_from_string(j.at("reward_head").get<std::string>());
  read_opt(j, "hidden", c.net.hidden);
  read_opt(j, "latent_dim", c.net.latent_dim);
  read_opt(j, "zh_dim", c.net.zh_dim);
  read_opt(j, "zl_dim", c.net.zl_dim);
  read_opt(j, "rho_max", c.net.rho_max);
  c.validate();
  return c;
}

inline json to_json(const EvalConfig& c) {
  return {{"clip_c", c.clip_c}, {"proxy_std", c.proxy_std}, {"discount", c.discount}};
}

inline EvalConfig eval_config_from_json(const json& j, EvalConfig c = {}) {
  detail::reject_unknown(j, {"clip_c", "proxy_std", "discount"}, "eval config");
  detail::read_opt(j, "clip_c", c.clip_c);
  detail::read_opt(j, "proxy_std", c.proxy_std);
  detail::read_opt(j, "discount", c.discount);
  c.validate();
  return c;
}

inline json to_json(const NcisReport& r) {
  return {{"ncis", r.ncis},
          {"ess", r.ess},
          {"clip_fraction", r.clip_fraction},
          {"n_trajectories", r.n_trajectories},
          {"skipped_trajectories", r.skipped},
          {"n_steps", r.n_steps}};
}

inline json to_json(const RolloutSummary& r) {
  return {{"mean_discounted_return", r.mean_discounted_return},
          {"discounted_return_stderr", r.discounted_return_stderr},
          {"mean_step_reward", r.mean_step_reward},
          {"mean_return_time", r.mean_return_time},
          {"mean_session_length", r.mean_session_length},
          {"mean_satisfaction", r.mean_satisfaction},
          {"episodes", r.episodes},
          {"sessions", r.sessions}};
}

}  // namespace resact
