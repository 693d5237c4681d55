// Copyright 2026 The ResAct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "resact/env.hpp"
#include "resact/policy.hpp"

namespace resact {

struct EvalConfig {
  double clip_c = 10.0;
  double proxy_std = 0.2;  // sigma of the Gaussian density proxies
  double discount = 0.9;   // for rollout cross-checks

  void validate() const {
    if (!(clip_c > 0.0)) throw std::invalid_argument("EvalConfig: clip_c must be > 0");
    if (!(proxy_std > 0.0)) throw std::invalid_argument("EvalConfig: proxy_std must be > 0");
    if (!(discount >= 0.0 && discount < 1.0)) throw std::invalid_argument("EvalConfig: discount must lie in [0,1)");
  }
};

struct NcisReport {
  double ncis = 0.0;
  double ess = 0.0;            // (sum w)^2 / sum w^2 over all capped weights
  double clip_fraction = 0.0;  // share of raw ratios above clip_c
  std::size_t n_trajectories = 0;
  std::size_t skipped = 0;     // trajectories whose weights summed to 0
  std::size_t n_steps = 0;
};

/// Self-normalized capped importance sampling from per-step raw ratios:
/// mean over trajectories of sum(w r) / sum(w), w = min(c, ratio).
inline NcisReport ncis_from_ratios(const std::vector<std::vector<double>>& rewards,
                                   const std::vector<std::vector<double>>& ratios, double clip_c) {
  if (!(clip_c > 0.0)) throw std::invalid_argument("ncis: clip_c must be > 0");
  if (rewards.size() != ratios.size()) throw std::invalid_argument("ncis: trajectory counts differ");
  NcisReport rep;
  double total = 0.0, w_sum = 0.0, w_sq = 0.0;
  std::size_t clipped = 0;
  for (std::size_t k = 0; k < rewards.size(); ++k) {
    if (rewards[k].empty()) throw std::invalid_argument("ncis: empty trajectory");
    if (rewards[k].size() != ratios[k].size()) throw std::invalid_argument("ncis: step counts differ");
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < rewards[k].size(); ++t) {
      const double raw = ratios[k][t];
      if (!(raw >= 0.0)) throw NumericError("ncis: importance ratio is negative or NaN");
      if (raw > clip_c) ++clipped;
      const double w = std::min(clip_c, raw);
      num += w * rewards[k][t];
      den += w;
      w_sq += w * w;
      ++rep.n_steps;
    }
    w_sum += den;
    if (den == 0.0) {
      ++rep.skipped;
      continue;
    }
    total += num / den;
    ++rep.n_trajectories;
  }
  if (rep.n_trajectories == 0) throw NumericError("ncis: every trajectory has zero total weight");
  rep.ncis = total / static_cast<double>(rep.n_trajectories);
  rep.ess = w_sq > 0.0 ? w_sum * w_sum / w_sq : 0.0;
  rep.clip_fraction = static_cast<double>(clipped) / static_cast<double>(rep.n_steps);
  return rep;
}

/// phi_pi(a) / phi_beta(a) for isotropic Gaussians with a shared std,
/// computed in log space so the normalizing constants cancel exactly.
inline double gaussian_ratio(std::span<const double> a, std::span<const double> eval_mean,
                             std::span<const double> behavior_mean, double sigma) {
  double d_eval = 0.0, d_beh = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    d_eval += (a[j] - eval_mean[j]) * (a[j] - eval_mean[j]);
    d_beh += (a[j] - behavior_mean[j]) * (a[j] - behavior_mean[j]);
  }
  return std::exp(-(d_eval - d_beh) / (2.0 * sigma * sigma));
}

/// Logged trajectories (one per user) flattened in order.
struct TestSet {
  std::vector<const UserState*> states;
  std::vector<const Transition*> steps;
  std::vector<std::size_t> user_index;    // per step, index into the dataset's users
  std::vector<std::size_t> traj_offsets;  // trajectory k spans [offsets[k], offsets[k+1])

  explicit TestSet(const LoggedDataset& ds) {
    for (std::size_t u = 0; u < ds.users.size(); ++u) {
      traj_offsets.push_back(steps.size());
      for (const auto& s : ds.users[u].sessions)
        for (const auto& t : s.transitions) {
          steps.push_back(&t);
          states.push_back(&t.s);
          user_index.push_back(u);
        }
    }
    traj_offsets.push_back(steps.size());
  }

  [[nodiscard]] std::size_t trajectories() const { return traj_offsets.size() - 1; }
};

/// NCIS of the evaluation policy's means against the behavior proxy's means,
/// both given per logged step (rows aligned with TestSet::steps).
inline NcisReport ncis_value(const TestSet& test, const Tensor& eval_means, const Tensor& behavior_means,
                             const EvalConfig& cfg) {
  cfg.validate();
  if (eval_means.rows() != test.steps.size() || behavior_means.rows() != test.steps.size()) {
    throw ShapeError("ncis_value: action tables do not match the number of logged steps");
  }
  std::vector<std::vector<double>> rewards, ratios;
  for (std::size_t k = 0; k < test.trajectories(); ++k) {
    std::vector<double> r, w;
    for (std::size_t i = test.traj_offsets[k]; i < test.traj_offsets[k + 1]; ++i) {
      r.push_back(test.steps[i]->r);
      w.push_back(gaussian_ratio(test.steps[i]->a, eval_means.row(i), behavior_means.row(i), cfg.proxy_std));
    }
    if (r.empty()) continue;
    rewards.push_back(std::move(r));
    ratios.push_back(std::move(w));
  }
  return ncis_from_ratios(rewards, ratios, cfg.clip_c);
}

/// The simulator's true serving-policy mean at every logged step.
inline Tensor exact_behavior_means(const LoggedDataset& ds, const TestSet& test) {
  const auto pop = population_of(ds);
  std::vector<std::vector<double>> rows;
  rows.reserve(test.steps.size());
  for (std::size_t i = 0; i < test.steps.size(); ++i) rows.push_back(behavior_mean(pop[test.user_index[i]]));
  return from_rows(rows);
}

/// Learned behavior proxy: the CVAE decoder at prior latent 0.
inline ActionFn decoder_mean_policy(const MlpParams& decoder, const ObsNormalizer& norm, std::size_t latent_dim) {
  return [decoder, norm, latent_dim](const std::vector<const UserState*>& states) {
    const StateBatch s = norm.apply(states_from(states));
    return decode_with(decoder, s.joint(), Tensor::matrix(states.size(), latent_dim, 0.0));
  };
}

/// Greedy ResAct evaluation of a bundle.
inline NcisReport evaluate_checkpoint(const ModelBundle& m, const LoggedDataset& valset, const Tensor& behavior_means,
                                      const EvalConfig& cfg, std::size_t n_estimators, std::uint64_t latent_seed) {
  const TestSet test(valset);
  const Tensor eval = actions_for(as_action_fn(ServingPolicy::from_bundle(m, n_estimators), latent_seed), test.states);
  return ncis_value(test, eval, behavior_means, cfg);
}

/// ActionFn adapter for the simulator.
inline SimPolicy as_sim_policy(ActionFn fn) {
  return [fn = std::move(fn)](const UserState& s, const UserProfile&, Rng&) {
    return fn({&s}).row_vector(0);
  };
}

}  // namespace resact
