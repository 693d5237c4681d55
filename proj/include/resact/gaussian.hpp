// Copyright 2026 The ResAct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "resact/tensor.hpp"

namespace resact {

/// Diagonal Gaussian, one distribution per row: [batch, dim] means and
/// log standard deviations.
struct DiagGaussian {
  Tensor mean;
  Tensor log_std;

  [[nodiscard]] std::size_t batch() const { return mean.rows(); }
  [[nodiscard]] std::size_t dim() const { return mean.cols(); }

  void validate() const {
    mean.require_same_shape(log_std, "DiagGaussian mean/log_std");
    for (double ls : log_std.values()) {
      if (!std::isfinite(std::exp(ls)) || std::exp(ls) <= 0.0) {
        throw NumericError("DiagGaussian: std is not strictly positive and finite");
      }
    }
  }

  /// Splits a [batch, 2*dim] network head into (mean, log_std).
  static DiagGaussian from_head(const Tensor& head) {
    if (head.cols() % 2 != 0) throw ShapeError("DiagGaussian::from_head: odd head width");
    const std::size_t d = head.cols() / 2;
    return {slice_cols(head, 0, d), slice_cols(head, d, d)};
  }
};

/// Reparameterized draw mean + exp(log_std) * noise.
inline Tensor gaussian_sample(const DiagGaussian& dist, const Tensor& noise) {
  const Tensor n = as_batch(noise);
  if (!n.same_shape(dist.mean)) {
    throw ShapeError("gaussian_sample: noise " + n.shape_string() + " vs distribution " +
                     dist.mean.shape_string());
  }
  Tensor out = dist.mean;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += std::exp(dist.log_std[i]) * n[i];
  return out;
}

struct GaussianGrads {
  Tensor mean;
  Tensor log_std;
};

/// Pulls an upstream gradient on the sample back to (mean, log_std).
inline GaussianGrads gaussian_sample_backward(const DiagGaussian& dist, const Tensor& noise,
                                              const Tensor& upstream) {
  GaussianGrads g{upstream, Tensor::zeros_like(upstream)};
  for (std::size_t i = 0; i < upstream.size(); ++i) {
    g.log_std[i] = upstream[i] * std::exp(dist.log_std[i]) * noise[i];
  }
  return g;
}

/// KL(N(mean, std^2) || N(0, I)) for every row:
/// sum_i 0.5 (mean_i^2 + std_i^2 - 1 - ln std_i^2).
inline std::vector<double> kl_to_standard_normal_rows(const DiagGaussian& dist) {
  std::vector<double> kl(dist.batch(), 0.0);
  for (std::size_t r = 0; r < dist.batch(); ++r) {
    auto mu = dist.mean.row(r);
    auto ls = dist.log_std.row(r);
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      s += 0.5 * (mu[i] * mu[i] + std::exp(2.0 * ls[i]) - 1.0 - 2.0 * ls[i]);
    }
    kl[r] = s;
  }
  return kl;
}

/// Total KL over all rows (a single distribution gives the textbook value).
inline double kl_to_standard_normal(const DiagGaussian& dist) {
  double s = 0.0;
  for (double v : kl_to_standard_normal_rows(dist)) s += v;
  return s;
}

/// Gradient of scale * sum_rows KL w.r.t. mean and log_std.
inline GaussianGrads kl_to_standard_normal_grad(const DiagGaussian& dist, double scale = 1.0) {
  GaussianGrads g{Tensor::zeros_like(dist.mean), Tensor::zeros_like(dist.log_std)};
  for (std::size_t i = 0; i < dist.mean.size(); ++i) {
    g.mean[i] = scale * dist.mean[i];
    g.log_std[i] = scale * (std::exp(2.0 * dist.log_std[i]) - 1.0);
  }
  return g;
}

}  // namespace resact
