// Copyright 2026 The ResAct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "resact/rng.hpp"

namespace resact {

// ---------------------------------------------------------------------------
// Configuration

enum class RewardMode { kReturnTime, kSessionLength, kBoth };

inline std::string_view to_string(RewardMode m) {
  switch (m) {
    case RewardMode::kReturnTime: return "return_time";
    case RewardMode::kSessionLength: return "session_length";
    case RewardMode::kBoth: return "both";
  }
  return "both";
}

inline RewardMode reward_mode_from_string(std::string_view s) {
  if (s == "return_time") return RewardMode::kReturnTime;
  if (s == "session_length") return RewardMode::kSessionLength;
  if (s == "both") return RewardMode::kBoth;
  throw std::invalid_argument("unknown reward mode '" + std::string(s) +
                              "' (expected return_time, session_length or both)");
}

/// Simulator constants. The population structure (shared preference axis and
/// the serving policy's systematic bias) is drawn from `world_seed`, so
/// datasets generated with different seeds describe the same platform.
struct EnvConfig {
  std::size_t action_dim = 8;
  std::size_t session_feature_dim = 4;   // |s_h|
  std::size_t request_feature_dim = 8;   // |s_l| = 1 + history + 1
  std::size_t satisfaction_history = 6;  // k

  double kappa = 5.0;            // satisfaction sharpness
  double beta = 1.0;             // engagement -> return time coupling
  double ema_decay = 0.9;        // rho
  double base_continue = 0.8;
  double delta_base = 24.0;      // hours
  double behavior_noise = 0.3;   // sigma_b
  double bias_scale = 1.5;       // norm of the serving policy's systematic error
  double preference_spread = 0.1;
  double preference_coupling = 0.0;  // activity-dependent tilt of the preference
  double return_jitter = 0.2;        // xi ~ U(-j, j)
  std::size_t max_session_length = 50;

  std::size_t users = 100;
  std::size_t sessions_per_user = 20;
  RewardMode reward_mode = RewardMode::kBoth;
  std::uint64_t world_seed = 20221;

  void validate() const {
    if (action_dim == 0 || satisfaction_history == 0) {
      throw std::invalid_argument("EnvConfig: dimensions must be positive");
    }
    if (request_feature_dim != satisfaction_history + 2) {
      throw std::invalid_argument("EnvConfig: request_feature_dim must equal history + 2");
    }
    if (session_feature_dim != 4) throw std::invalid_argument("EnvConfig: session_feature_dim must be 4");
    if (!(base_continue > 0.0 && base_continue < 1.0)) {
      throw std::invalid_argument("EnvConfig: base_continue must lie in (0,1)");
    }
    if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw std::invalid_argument("EnvConfig: ema_decay in [0,1)");
    if (delta_base <= 0.0 || behavior_noise < 0.0 || kappa <= 0.0) {
      throw std::invalid_argument("EnvConfig: delta_base, kappa must be positive, noise non-negative");
    }
    if (users == 0 || sessions_per_user == 0) throw std::invalid_argument("EnvConfig: empty population");
    if (max_session_length == 0) throw std::invalid_argument("EnvConfig: max_session_length must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Domain types

struct UserProfile {
  std::size_t user_id = 0;
  std::vector<double> preference;  // unit vector
  std::vector<double> bias;        // serving policy's systematic error for this user
  double base_continue = 0.8;
  double delta_base = 24.0;
  double activity = 1.0;
  double delta_avg = 0.0;  // mean return time in the logged data (0 until known)
  double eta_avg = 0.0;    // mean session length in the logged data (0 until known)
};

/// Observable state, split into session-level and request-level features.
struct UserState {
  std::vector<double> s_h;
  std::vector<double> s_l;

  friend bool operator==(const UserState&, const UserState&) = default;
};

/// Latent simulator memory of one user; `observe` turns it into a UserState.
struct UserMemory {
  double engagement = 0.5;
  double return_ema = 0.0;  // hours
  double length_ema = 3.0;
  std::size_t session_count = 0;
  std::size_t position = 0;
  std::deque<double> satisfaction;
  double last_action_mean = 0.0;
};

struct Transition {
  UserState s;
  std::vector<double> a;
  double r = 0.0;
  UserState s_next;
  bool done = false;
};

struct SessionLog {
  std::vector<Transition> transitions;
  double return_time = 0.0;  // gap to the next session (hours); 0 for the last one
};

struct UserLog {
  std::size_t user_id = 0;
  std::vector<SessionLog> sessions;
};

struct DatasetStats {
  double delta_p75 = 0.0;
  std::vector<double> delta_avg;  // per user
  std::vector<double> eta_avg;    // per user
  double mean_session_length = 0.0;
  double mean_return_time = 0.0;
  std::size_t users = 0;
  std::size_t sessions = 0;
  std::size_t requests = 0;
};

struct LoggedDataset {
  EnvConfig config;
  std::uint64_t seed = 0;
  std::vector<UserLog> users;
  DatasetStats stats;

  [[nodiscard]] std::size_t transition_count() const {
    std::size_t n = 0;
    for (const auto& u : users)
      for (const auto& s : u.sessions) n += s.transitions.size();
    return n;
  }
};

// ---------------------------------------------------------------------------
// Small vector helpers

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline std::vector<double> normalized(std::vector<double> v) {
  const double n = std::sqrt(dot(v, v));
  if (n > 0.0)
    for (double& x : v) x /= n;
  return v;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Reward functions

/// floor(min(delta_avg, delta_p75) / delta) clipped to [0, 5].
inline int reward_return_time(double delta, double delta_avg_user, double delta_p75) {
  if (!(delta > 0.0) || !(delta_avg_user > 0.0) || !(delta_p75 > 0.0)) {
    throw std::invalid_argument("reward_return_time: arguments must be positive");
  }
  const double ratio = std::min(delta_avg_user, delta_p75) / delta;
  return static_cast<int>(std::clamp(std::floor(ratio), 0.0, 5.0));
}

/// floor(eta / (0.8 eta_avg)) clipped to [0, 5].
inline int reward_session_length(double eta, double eta_avg_user) {
  if (eta < 0.0 || !(eta_avg_user > 0.0)) {
    throw std::invalid_argument("reward_session_length: eta must be >= 0 and eta_avg > 0");
  }
  return static_cast<int>(std::clamp(std::floor(eta / (eta_avg_user * 0.8)), 0.0, 5.0));
}

inline double combined_reward(int r_delta, int r_eta) { return 0.7 * r_delta + 0.3 * r_eta; }

inline double session_reward(RewardMode mode, int r_delta, int r_eta) {
  switch (mode) {
    case RewardMode::kReturnTime: return r_delta;
    case RewardMode::kSessionLength: return r_eta;
    case RewardMode::kBoth: return combined_reward(r_delta, r_eta);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Population and dynamics

/// The platform-wide structure every user shares.
struct World {
  std::vector<double> preference_axis;
  std::vector<double> tilt_axis;
  std::vector<double> serving_bias;
};

inline World make_world(const EnvConfig& cfg) {
  Rng rng = Rng::derive(cfg.world_seed, 0xC0FFEE);
  World w;
  w.preference_axis = detail::normalized(rng.normal_vector(cfg.action_dim));
  // Gram-Schmidt so the tilt and the bias are orthogonal to the main axis.
  auto orthogonal = [&](std::vector<double> v) {
    const double d = detail::dot(v, w.preference_axis);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= d * w.preference_axis[i];
    return detail::normalized(std::move(v));
  };
  w.tilt_axis = orthogonal(rng.normal_vector(cfg.action_dim));
  w.serving_bias = orthogonal(rng.normal_vector(cfg.action_dim));
  for (double& b : w.serving_bias) b *= cfg.bias_scale;
  return w;
}

inline UserProfile make_user(const EnvConfig& cfg, const World& world, std::uint64_t seed,
                             std::size_t user_id) {
  Rng rng = Rng::derive(seed, 2 * user_id + 1);
  UserProfile u;
  u.user_id = user_id;
  u.activity = rng.uniform(0.2, 1.0);
  std::vector<double> pref(cfg.action_dim);
  const double tilt = cfg.preference_coupling * (u.activity - 0.6);
  for (std::size_t i = 0; i < cfg.action_dim; ++i) {
    pref[i] = world.preference_axis[i] + tilt * world.tilt_axis[i] +
              cfg.preference_spread * rng.normal();
  }
  u.preference = detail::normalized(std::move(pref));
  u.bias = world.serving_bias;
  u.base_continue = cfg.base_continue;
  u.delta_base = cfg.delta_base / (0.4 + u.activity);
  return u;
}

inline std::vector<UserProfile> make_population(const EnvConfig& cfg, std::uint64_t seed) {
  const World world = make_world(cfg);
  std::vector<UserProfile> users;
  users.reserve(cfg.users);
  for (std::size_t i = 0; i < cfg.users; ++i) users.push_back(make_user(cfg, world, seed, i));
  return users;
}

inline UserMemory initial_memory(const EnvConfig& cfg) {
  UserMemory m;
  m.return_ema = cfg.delta_base;
  m.satisfaction.assign(cfg.satisfaction_history, 0.5);
  return m;
}

inline UserState observe(const EnvConfig& cfg, const UserMemory& m) {
  UserState s;
  s.s_h = {m.return_ema / cfg.delta_base, m.length_ema / 10.0,
           static_cast<double>(m.session_count) / 50.0, m.engagement};
  s.s_l.reserve(cfg.request_feature_dim);
  s.s_l.push_back(static_cast<double>(m.position) / 10.0);
  for (double q : m.satisfaction) s.s_l.push_back(q);
  s.s_l.push_back(m.last_action_mean);
  return s;
}

/// q = sigmoid(kappa * <action, preference>).
inline double satisfaction(const EnvConfig& cfg, const UserProfile& u, std::span<const double> action) {
  return detail::sigmoid(cfg.kappa * detail::dot(action, u.preference));
}

/// delta_base * exp(-beta * engagement) * (1 + xi).
inline double return_time(double delta_base, double beta, double engagement, double xi) {
  return delta_base * std::exp(-beta * engagement) * (1.0 + xi);
}

enum class StepEvent { kConsumed, kSessionEnd };

struct StepInfo {
  double satisfaction = 0.0;
  double return_time = 0.0;  // set on session end
  std::size_t session_length = 0;  // set on session end
  bool action_clamped = false;
};

struct StepResult {
  UserMemory next;
  UserState next_state;
  StepEvent event = StepEvent::kConsumed;
  StepInfo info;
};

/// Serves one request. Out-of-range actions are clamped and flagged.
inline StepResult env_step(const EnvConfig& cfg, const UserProfile& u, const UserMemory& m,
                           std::span<const double> action_in, Rng& rng) {
  if (action_in.size() != cfg.action_dim) {
    throw std::invalid_argument("env_step: action has dim " + std::to_string(action_in.size()) +
                                ", expected " + std::to_string(cfg.action_dim));
  }
  StepResult res;
  std::vector<double> action(action_in.begin(), action_in.end());
  for (double& a : action) {
    if (a < -1.0 || a > 1.0) {
      res.info.action_clamped = true;
      a = std::clamp(a, -1.0, 1.0);
    }
  }
  const double q = satisfaction(cfg, u, action);
  res.info.satisfaction = q;

  UserMemory n = m;
  n.engagement = cfg.ema_decay * m.engagement + (1.0 - cfg.ema_decay) * q;
  n.satisfaction.push_back(q);
  while (n.satisfaction.size() > cfg.satisfaction_history) n.satisfaction.pop_front();
  n.last_action_mean = std::accumulate(action.begin(), action.end(), 0.0) / static_cast<double>(action.size());
  n.position = m.position + 1;

  const bool continues = rng.bernoulli(u.base_continue * q) && n.position < cfg.max_session_length;
  if (continues) {
    res.event = StepEvent::kConsumed;
  } else {
    res.event = StepEvent::kSessionEnd;
    const double xi = rng.uniform(-cfg.return_jitter, cfg.return_jitter);
    const double delta = return_time(u.delta_base, cfg.beta, n.engagement, xi);
    res.info.return_time = delta;
    res.info.session_length = n.position;
    // Advance to the first request of the next session.
    n.return_ema = cfg.ema_decay * m.return_ema + (1.0 - cfg.ema_decay) * delta;
    n.length_ema = cfg.ema_decay * m.length_ema + (1.0 - cfg.ema_decay) * static_cast<double>(n.position);
    n.session_count = m.session_count + 1;
    n.position = 0;
  }
  res.next_state = observe(cfg, n);
  res.next = std::move(n);
  return res;
}

/// Mean action of the serving policy: normalize(preference + bias).
inline std::vector<double> behavior_mean(const UserProfile& u) {
  std::vector<double> v(u.preference.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = u.preference[i] + u.bias[i];
  return detail::normalized(std::move(v));
}

/// clamp(normalize(preference + bias) + eps, -1, 1), eps ~ N(0, sigma_b^2 I).
inline std::vector<double> behavior_action(const EnvConfig& cfg, const UserProfile& u,
                                           const UserState& /*state*/, Rng& rng) {
  std::vector<double> a = behavior_mean(u);
  for (double& x : a) x = std::clamp(x + cfg.behavior_noise * rng.normal(), -1.0, 1.0);
  return a;
}

// ---------------------------------------------------------------------------
// Logged data generation

namespace detail {

/// Linear-interpolation percentile (the usual "type 7" definition).
inline double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct RawUserTrace {
  UserLog log;
  std::vector<std::size_t> lengths;
};

template <typename PolicyFn>
RawUserTrace simulate_user(const EnvConfig& cfg, const UserProfile& u, std::size_t sessions,
                           PolicyFn&& policy, Rng& rng) {
  RawUserTrace trace;
  trace.log.user_id = u.user_id;
  UserMemory mem = initial_memory(cfg);
  UserState state = observe(cfg, mem);
  for (std::size_t k = 0; k < sessions; ++k) {
    SessionLog session;
    for (;;) {
      std::vector<double> action = policy(state, u, rng);
      StepResult step = env_step(cfg, u, mem, action, rng);
      for (double& a : action) a = std::clamp(a, -1.0, 1.0);
      Transition t{state, std::move(action), 0.0, step.next_state,
                   step.event == StepEvent::kSessionEnd};
      session.transitions.push_back(std::move(t));
      state = step.next_state;
      mem = std::move(step.next);
      if (step.event == StepEvent::kSessionEnd) {
        session.return_time = (k + 1 < sessions) ? step.info.return_time : 0.0;
        trace.lengths.push_back(step.info.session_length);
        break;
      }
    }
    trace.log.sessions.push_back(std::move(session));
  }
  return trace;
}

/// Writes the session-boundary rewards for one user given its normalizers.
inline void assign_rewards(RewardMode mode, UserLog& log, double delta_avg, double eta_avg,
                           double delta_p75) {
  for (std::size_t k = 0; k < log.sessions.size(); ++k) {
    auto& s = log.sessions[k];
    const auto eta = static_cast<double>(s.transitions.size());
    int r_eta = eta_avg > 0.0 ? reward_session_length(eta, eta_avg) : 0;
    // The last session has no successor, hence no observed return time.
    int r_delta = 0;
    if (k + 1 < log.sessions.size() && delta_avg > 0.0 && delta_p75 > 0.0) {
      r_delta = reward_return_time(s.return_time, delta_avg, delta_p75);
    }
    for (auto& t : s.transitions) t.r = 0.0;
    s.transitions.back().r = session_reward(mode, r_delta, r_eta);
  }
}

}  // namespace detail

using SimPolicy = std::function<std::vector<double>(const UserState&, const UserProfile&, Rng&)>;

/// Simulates every user under the serving policy, then attaches the
/// session-boundary rewards using per-user averages and the dataset-wide
/// 75th percentile of average return time.
inline LoggedDataset generate_dataset(const EnvConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  LoggedDataset ds;
  ds.config = cfg;
  ds.seed = seed;
  const auto population = make_population(cfg, seed);
  std::vector<std::vector<std::size_t>> lengths;
  for (const auto& u : population) {
    Rng rng = Rng::derive(seed, 2 * u.user_id + 2);
    auto policy = [&cfg](const UserState& s, const UserProfile& p, Rng& r) {
      return behavior_action(cfg, p, s, r);
    };
    auto trace = detail::simulate_user(cfg, u, cfg.sessions_per_user, policy, rng);
    ds.users.push_back(std::move(trace.log));
    lengths.push_back(std::move(trace.lengths));
  }

  DatasetStats& st = ds.stats;
  st.users = ds.users.size();
  double total_gap = 0.0;
  std::size_t gap_count = 0;
  std::vector<double> user_delta_avgs;
  for (std::size_t i = 0; i < ds.users.size(); ++i) {
    const auto& sessions = ds.users[i].sessions;
    double gaps = 0.0;
    for (std::size_t k = 0; k + 1 < sessions.size(); ++k) gaps += sessions[k].return_time;
    const double d_avg = sessions.size() > 1 ? gaps / static_cast<double>(sessions.size() - 1) : 0.0;
    double len = 0.0;
    for (std::size_t l : lengths[i]) len += static_cast<double>(l);
    st.delta_avg.push_back(d_avg);
    st.eta_avg.push_back(len / static_cast<double>(sessions.size()));
    if (sessions.size() > 1) user_delta_avgs.push_back(d_avg);
    total_gap += gaps;
    gap_count += sessions.size() - 1;
    st.sessions += sessions.size();
    for (const auto& s : sessions) st.requests += s.transitions.size();
  }
  st.delta_p75 = detail::percentile(user_delta_avgs, 0.75);
  st.mean_session_length = static_cast<double>(st.requests) / static_cast<double>(st.sessions);
  st.mean_return_time = gap_count ? total_gap / static_cast<double>(gap_count) : 0.0;

  for (std::size_t i = 0; i < ds.users.size(); ++i) {
    detail::assign_rewards(cfg.reward_mode, ds.users[i], st.delta_avg[i], st.eta_avg[i], st.delta_p75);
  }
  return ds;
}

/// Users of a dataset with their logged reward normalizers filled in.
inline std::vector<UserProfile> population_of(const LoggedDataset& ds) {
  auto pop = make_population(ds.config, ds.seed);
  for (std::size_t i = 0; i < pop.size() && i < ds.stats.delta_avg.size(); ++i) {
    pop[i].delta_avg = ds.stats.delta_avg[i];
    pop[i].eta_avg = ds.stats.eta_avg[i];
  }
  return pop;
}

// ---------------------------------------------------------------------------
// Ground-truth rollouts

struct RolloutSummary {
  double mean_discounted_return = 0.0;  // per session, discounting within the session
  double discounted_return_stderr = 0.0;
  double mean_step_reward = 0.0;        // per-trajectory mean reward per request, averaged
  double mean_return_time = 0.0;
  double mean_session_length = 0.0;
  double mean_satisfaction = 0.0;
  std::size_t episodes = 0;
  std::size_t sessions = 0;
};

/// Runs `policy` on the population (each episode is one user trajectory of
/// `sessions_per_user` sessions). Rewards use the logged normalizers carried
/// by the profiles, so policies are scored on the same scale as the data.
inline RolloutSummary rollout_policy(const EnvConfig& cfg, const SimPolicy& policy,
                                     const std::vector<UserProfile>& population, double delta_p75,
                                     std::size_t episodes, double gamma, std::uint64_t seed) {
  if (population.empty()) throw std::invalid_argument("rollout_policy: empty population");
  RolloutSummary out;
  double sum_ret = 0.0;
  double sum_ret_sq = 0.0;
  double sum_step = 0.0;
  double sum_gap = 0.0;
  std::size_t gaps = 0;
  double sum_len = 0.0;
  double sum_q = 0.0;
  std::size_t requests = 0;
  for (std::size_t e = 0; e < episodes; ++e) {
    const UserProfile& u = population[e % population.size()];
    Rng rng = Rng::derive(seed, e);
    double q_total = 0.0;
    auto tracked = [&](const UserState& s, const UserProfile& p, Rng& r) {
      auto a = policy(s, p, r);
      for (double& x : a) x = std::clamp(x, -1.0, 1.0);
      q_total += satisfaction(cfg, p, a);
      return a;
    };
    auto trace = detail::simulate_user(cfg, u, cfg.sessions_per_user, tracked, rng);
    detail::assign_rewards(cfg.reward_mode, trace.log, u.delta_avg, u.eta_avg, delta_p75);
    double traj_reward = 0.0;
    std::size_t traj_steps = 0;
    for (std::size_t k = 0; k < trace.log.sessions.size(); ++k) {
      const auto& s = trace.log.sessions[k];
      double ret = 0.0;
      double disc = 1.0;
      for (const auto& t : s.transitions) {
        ret += disc * t.r;
        disc *= gamma;
        traj_reward += t.r;
      }
      traj_steps += s.transitions.size();
      sum_ret += ret;
      sum_ret_sq += ret * ret;
      sum_len += static_cast<double>(s.transitions.size());
      if (k + 1 < trace.log.sessions.size()) {
        sum_gap += s.return_time;
        ++gaps;
      }
      ++out.sessions;
    }
    requests += traj_steps;
    sum_q += q_total;
    sum_step += traj_reward / static_cast<double>(traj_steps);
  }
  out.episodes = episodes;
  const auto ns = static_cast<double>(out.sessions);
  out.mean_discounted_return = sum_ret / ns;
  const double var = std::max(0.0, sum_ret_sq / ns - out.mean_discounted_return * out.mean_discounted_return);
  out.discounted_return_stderr = std::sqrt(var / ns);
  out.mean_step_reward = sum_step / static_cast<double>(episodes);
  out.mean_return_time = gaps ? sum_gap / static_cast<double>(gaps) : 0.0;
  out.mean_session_length = sum_len / ns;
  out.mean_satisfaction = sum_q / static_cast<double>(requests);
  return out;
}

}  // namespace resact
