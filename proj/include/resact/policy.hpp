// Copyright 2026 The ResAct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "resact/actor.hpp"
#include "resact/batch.hpp"
#include "resact/critic.hpp"
#include "resact/cvae.hpp"
#include "resact/trainer.hpp"

namespace resact {

/// How the final action is picked from the n improved candidates.
enum class Selection {
  kCriticArgmax,  // serving path
  kMarginalMean,  // test-time baseline: average of the candidates
};

struct Choice {
  std::vector<double> action;
  std::size_t index = 0;  // selected candidate (0 under kMarginalMean)
  double q = 0.0;         // Q1 of the selected candidate
  std::vector<double> prior_action;  // the decoder output it was built from
};

/// Decoder, residual actor and Q1: the parts of a trained bundle used to serve.
struct ServingPolicy {
  MlpParams decoder;
  ActorParams actor;
  MlpParams q1;
  ObsNormalizer normalizer;
  std::size_t latent_dim = 0;
  std::size_t n_estimators = 1;
  Selection selection = Selection::kCriticArgmax;

  static ServingPolicy from_bundle(const ModelBundle& m, std::size_t n) {
    if (n == 0) throw std::invalid_argument("ServingPolicy: n_estimators must be >= 1");
    return {m.cvae.decoder, m.actor, m.critic.q1, m.normalizer, m.cvae.latent_dim(), n, Selection::kCriticArgmax};
  }

  /// Candidates for already-normalized states. `latents` holds n rows per
  /// state, state-major: rows [b*n, (b+1)*n) belong to state b.
  [[nodiscard]] std::vector<Choice> choose(const StateBatch& s, const Tensor& latents) const {
    if (!s.normalized) throw std::logic_error("ServingPolicy::choose: states must be normalized");
    const std::size_t B = s.size();
    const std::size_t n = n_estimators;
    if (latents.rows() != B * n || latents.cols() != latent_dim) {
      throw ShapeError("ServingPolicy::choose: expected " + std::to_string(B * n) + "x" + std::to_string(latent_dim) +
                       " latents, got " + latents.shape_string());
    }
    StateBatch rep{Tensor::matrix(B * n, s.h.cols()), Tensor::matrix(B * n, s.l.cols()), true};
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < n; ++i) {
        std::copy(s.h.row(b).begin(), s.h.row(b).end(), rep.h.row(b * n + i).begin());
        std::copy(s.l.row(b).begin(), s.l.row(b).end(), rep.l.row(b * n + i).begin());
      }
    }
    const Tensor a_on = decode_with(decoder, rep.joint(), latents);
    const Tensor cand = improved_action(actor, rep, a_on);
    const auto q = q_values(q1, rep, cand);

    std::vector<Choice> out(B);
    for (std::size_t b = 0; b < B; ++b) {
      Choice& c = out[b];
      if (selection == Selection::kMarginalMean) {
        c.action.assign(cand.cols(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          auto row = cand.row(b * n + i);
          for (std::size_t j = 0; j < row.size(); ++j) c.action[j] += row[j] / static_cast<double>(n);
        }
        c.prior_action = a_on.row_vector(b * n);
        c.q = q_values(q1, states_row(rep, b * n), Tensor::matrix(1, c.action.size(), c.action))[0];
        continue;
      }
      std::size_t best = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (q[b * n + i] > q[b * n + best]) best = i;  // strict: ties keep the lowest index
      }
      c.index = best;
      c.q = q[b * n + best];
      c.action = cand.row_vector(b * n + best);
      c.prior_action = a_on.row_vector(b * n + best);
    }
    return out;
  }

  /// One raw state; n * d_c latents drawn from `rng`, candidate by candidate.
  [[nodiscard]] Choice act(const UserState& s, Rng& rng) const {
    const Tensor latents = rng.normal_matrix(n_estimators, latent_dim);
    return choose(normalizer.apply(states_from(s)), latents)[0];
  }

  /// Many raw states at once. A state's latents come from the stream
  /// derive(seed, hash(state)), so each action is a pure function of
  /// (seed, state, parameters) whatever the batching, and the candidate set
  /// for n is a prefix of the one for any larger n.
  [[nodiscard]] std::vector<Choice> act_batch(const std::vector<const UserState*>& states, std::uint64_t seed) const {
    Tensor latents = Tensor::matrix(states.size() * n_estimators, latent_dim);
    for (std::size_t b = 0; b < states.size(); ++b) {
      Rng rng = Rng::derive(seed, state_hash(*states[b]));
      for (std::size_t i = 0; i < n_estimators; ++i) {
        for (double& v : latents.row(b * n_estimators + i)) v = rng.normal();
      }
    }
    return choose(normalizer.apply(states_from(states)), latents);
  }

  /// FNV-1a over the bit patterns of the raw features.
  static std::uint64_t state_hash(const UserState& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const std::vector<double>& v) {
      for (double x : v) {
        const auto bits = std::bit_cast<std::uint64_t>(x);
        for (int k = 0; k < 8; ++k) {
          h ^= (bits >> (8 * k)) & 0xffU;
          h *= 0x100000001b3ULL;
        }
      }
    };
    mix(s.s_h);
    mix(s.s_l);
    return h;
  }

 private:
  static StateBatch states_row(const StateBatch& s, std::size_t r) {
    return {slice_rows(s.h, r), slice_rows(s.l, r), s.normalized};
  }
  static Tensor slice_rows(const Tensor& t, std::size_t r) { return Tensor::matrix(1, t.cols(), t.row_vector(r)); }
};

/// Deterministic map from raw states to actions, the common currency of the
/// evaluator and the simulator rollouts.
using ActionFn = std::function<Tensor(const std::vector<const UserState*>&)>;

/// Runs `fn` over `states` in chunks so large test sets stay within memory.
inline Tensor actions_for(const ActionFn& fn, const std::vector<const UserState*>& states, std::size_t chunk = 4096) {
  if (states.empty()) throw std::invalid_argument("actions_for: no states");
  std::vector<std::vector<double>> rows;
  rows.reserve(states.size());
  for (std::size_t start = 0; start < states.size(); start += chunk) {
    const std::size_t end = std::min(states.size(), start + chunk);
    std::vector<const UserState*> part(states.begin() + static_cast<std::ptrdiff_t>(start),
                                       states.begin() + static_cast<std::ptrdiff_t>(end));
    const Tensor a = fn(part);
    for (std::size_t r = 0; r < a.rows(); ++r) rows.push_back(a.row_vector(r));
  }
  return from_rows(rows);
}

/// Serving policy as an ActionFn with a fixed latent seed.
inline ActionFn as_action_fn(const ServingPolicy& p, std::uint64_t seed) {
  return [p, seed](const std::vector<const UserState*>& states) {
    const auto choices = p.act_batch(states, seed);
    std::vector<std::vector<double>> rows;
    rows.reserve(choices.size());
    for (const auto& c : choices) rows.push_back(c.action);
    return from_rows(rows);
  };
}

}  // namespace resact
