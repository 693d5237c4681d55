// Copyright 2026 The ResAct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "resact/env.hpp"
#include "resact/rng.hpp"
#include "resact/tensor.hpp"

namespace resact {

/// Session-level and request-level features for a batch of states.
struct StateBatch {
  Tensor h;  // [B, |s_h|]
  Tensor l;  // [B, |s_l|]
  bool normalized = false;

  [[nodiscard]] std::size_t size() const { return h.rows(); }
  [[nodiscard]] Tensor joint() const { return concat_cols({&h, &l}); }
};

struct TransitionBatch {
  StateBatch s;
  Tensor a;  // [B, d_a]
  std::vector<double> r;
  StateBatch s_next;
  std::vector<double> done;  // 1.0 on session end

  [[nodiscard]] std::size_t size() const { return r.size(); }
};

inline StateBatch states_from(const std::vector<const UserState*>& states) {
  if (states.empty()) throw std::invalid_argument("states_from: empty state list");
  std::vector<std::vector<double>> h, l;
  h.reserve(states.size());
  l.reserve(states.size());
  for (const auto* s : states) {
    h.push_back(s->s_h);
    l.push_back(s->s_l);
  }
  return {from_rows(h), from_rows(l), false};
}

inline StateBatch states_from(const UserState& s) { return states_from(std::vector<const UserState*>{&s}); }

/// Flat view of a logged dataset for uniform minibatch sampling.
class TransitionTable {
 public:
  TransitionTable() = default;
  explicit TransitionTable(const LoggedDataset& ds) {
    for (const auto& u : ds.users)
      for (const auto& s : u.sessions)
        for (const auto& t : s.transitions) rows_.push_back(&t);
  }

  [[nodiscard]] std::size_t size() const { return rows_.size(); }
  [[nodiscard]] const Transition& operator[](std::size_t i) const { return *rows_[i]; }

  [[nodiscard]] TransitionBatch gather(const std::vector<std::size_t>& idx) const {
    if (idx.empty()) throw std::invalid_argument("TransitionTable::gather: empty index list");
    std::vector<const UserState*> s, sn;
    std::vector<std::vector<double>> a;
    TransitionBatch b;
    for (std::size_t i : idx) {
      const Transition& t = *rows_.at(i);
      s.push_back(&t.s);
      sn.push_back(&t.s_next);
      a.push_back(t.a);
      b.r.push_back(t.r);
      b.done.push_back(t.done ? 1.0 : 0.0);
    }
    b.s = states_from(s);
    b.s_next = states_from(sn);
    b.a = from_rows(a);
    return b;
  }

  /// Uniform sampling with replacement.
  [[nodiscard]] TransitionBatch sample(std::size_t batch_size, Rng& rng) const {
    if (rows_.empty()) throw std::invalid_argument("TransitionTable::sample: empty dataset");
    std::vector<std::size_t> idx(batch_size);
    for (auto& i : idx) i = rng.index(rows_.size());
    return gather(idx);
  }

  [[nodiscard]] TransitionBatch all() const {
    std::vector<std::size_t> idx(rows_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return gather(idx);
  }

 private:
  std::vector<const Transition*> rows_;
};

/// Per-feature z-scoring fitted on the training split. Stored in checkpoints;
/// normalizing an already normalized batch is an error.
struct ObsNormalizer {
  std::vector<double> mean_h, std_h, mean_l, std_l;
  bool enabled = false;

  static ObsNormalizer identity(std::size_t dh, std::size_t dl) {
    return {std::vector<double>(dh, 0.0), std::vector<double>(dh, 1.0), std::vector<double>(dl, 0.0),
            std::vector<double>(dl, 1.0), false};
  }

  static ObsNormalizer fit(const TransitionTable& table) {
    if (table.size() == 0) throw std::invalid_argument("ObsNormalizer::fit: empty dataset");
    const std::size_t dh = table[0].s.s_h.size();
    const std::size_t dl = table[0].s.s_l.size();
    ObsNormalizer n = identity(dh, dl);
    n.enabled = true;
    auto moments = [&](auto pick, std::vector<double>& mean, std::vector<double>& sd) {
      std::vector<double> sq(mean.size(), 0.0);
      for (std::size_t i = 0; i < table.size(); ++i) {
        const auto& v = pick(table[i].s);
        for (std::size_t j = 0; j < v.size(); ++j) {
          mean[j] += v[j];
          sq[j] += v[j] * v[j];
        }
      }
      const auto cnt = static_cast<double>(table.size());
      for (std::size_t j = 0; j < mean.size(); ++j) {
        mean[j] /= cnt;
        const double var = sq[j] / cnt - mean[j] * mean[j];
        // Constant features are only centred.
        sd[j] = var > 1e-12 ? std::sqrt(var) : 1.0;
      }
    };
    moments([](const UserState& s) -> const std::vector<double>& { return s.s_h; }, n.mean_h, n.std_h);
    moments([](const UserState& s) -> const std::vector<double>& { return s.s_l; }, n.mean_l, n.std_l);
    return n;
  }

  [[nodiscard]] StateBatch apply(StateBatch b) const {
    if (b.normalized) throw std::logic_error("ObsNormalizer: batch is already normalized");
    if (b.h.cols() != mean_h.size() || b.l.cols() != mean_l.size()) {
      throw ShapeError("ObsNormalizer: feature dims " + b.h.shape_string() + "/" + b.l.shape_string() +
                       " do not match fitted dims");
    }
    if (enabled) {
      auto z = [](Tensor& t, const std::vector<double>& m, const std::vector<double>& s) {
        for (std::size_t r = 0; r < t.rows(); ++r) {
          auto row = t.row(r);
          for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - m[j]) / s[j];
        }
      };
      z(b.h, mean_h, std_h);
      z(b.l, mean_l, std_l);
    }
    b.normalized = true;
    return b;
  }

  [[nodiscard]] TransitionBatch apply(TransitionBatch b) const {
    b.s = apply(std::move(b.s));
    b.s_next = apply(std::move(b.s_next));
    return b;
  }

  /// Inverse map back to raw features.
  [[nodiscard]] StateBatch invert(StateBatch b) const {
    if (!b.normalized) throw std::logic_error("ObsNormalizer::invert: batch is not normalized");
    if (enabled) {
      auto inv = [](Tensor& t, const std::vector<double>& m, const std::vector<double>& s) {
        for (std::size_t r = 0; r < t.rows(); ++r) {
          auto row = t.row(r);
          for (std::size_t j = 0; j < row.size(); ++j) row[j] = row[j] * s[j] + m[j];
        }
      };
      inv(b.h, mean_h, std_h);
      inv(b.l, mean_l, std_l);
    }
    b.normalized = false;
    return b;
  }

  friend bool operator==(const ObsNormalizer&, const ObsNormalizer&) = default;
};

}  // namespace resact
