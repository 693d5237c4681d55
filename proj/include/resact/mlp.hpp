// Copyright 2026 The ResAct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "resact/rng.hpp"
#include "resact/tensor.hpp"

namespace resact {

enum class Activation { kTanh, kRelu, kIdentity };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kIdentity: return "identity";
  }
  return "identity";
}

inline Activation activation_from_string(std::string_view s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  if (s == "identity") return Activation::kIdentity;
  throw std::invalid_argument("unknown activation '" + std::string(s) + "'");
}

/// y = act(x W^T + b); weight is [out, in].
struct DenseLayer {
  Tensor weight;
  Tensor bias;
  Activation activation = Activation::kIdentity;

  [[nodiscard]] std::size_t in_dim() const { return weight.cols(); }
  [[nodiscard]] std::size_t out_dim() const { return weight.rows(); }
};

/// Feed-forward network. Also used as the container for its own gradients.
struct MlpParams {
  std::vector<DenseLayer> layers;

  [[nodiscard]] std::size_t in_dim() const { return layers.front().in_dim(); }
  [[nodiscard]] std::size_t out_dim() const { return layers.back().out_dim(); }

  template <typename F>
  void for_each_tensor(F&& f) {
    for (auto& l : layers) {
      f(l.weight);
      f(l.bias);
    }
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    for (const auto& l : layers) {
      f(l.weight);
      f(l.bias);
    }
  }

  [[nodiscard]] std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_tensor([&](const Tensor& t) { n += t.size(); });
    return n;
  }

  [[nodiscard]] double squared_norm() const {
    double s = 0.0;
    for_each_tensor([&](const Tensor& t) { s += t.squared_norm(); });
    return s;
  }

  [[nodiscard]] bool all_finite() const {
    bool ok = true;
    for_each_tensor([&](const Tensor& t) { ok = ok && t.all_finite(); });
    return ok;
  }

  friend bool operator==(const MlpParams& a, const MlpParams& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
      if (!(a.layers[i].weight == b.layers[i].weight) || !(a.layers[i].bias == b.layers[i].bias) ||
          a.layers[i].activation != b.layers[i].activation) {
        return false;
      }
    }
    return true;
  }
};

/// Same architecture, all entries zero.
inline MlpParams zeros_like(const MlpParams& p) {
  MlpParams z = p;
  z.for_each_tensor([](Tensor& t) { t.fill(0.0); });
  return z;
}

/// dst += alpha * src, tensor by tensor.
inline void add_scaled(MlpParams& dst, const MlpParams& src, double alpha) {
  if (dst.layers.size() != src.layers.size()) throw ShapeError("add_scaled: layer count mismatch");
  for (std::size_t i = 0; i < dst.layers.size(); ++i) {
    dst.layers[i].weight.axpy(alpha, src.layers[i].weight);
    dst.layers[i].bias.axpy(alpha, src.layers[i].bias);
  }
}

/// Builds a network with `hidden` tanh layers (or the given hidden activation)
/// and the given output activation. Weights and biases are drawn uniformly from
/// +-1/sqrt(fan_in).
inline MlpParams make_mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
                          Activation output_activation, Rng& rng,
                          Activation hidden_activation = Activation::kTanh) {
  MlpParams p;
  std::size_t prev = in;
  auto add_layer = [&](std::size_t width, Activation act) {
    DenseLayer l;
    l.weight = Tensor::matrix(width, prev);
    l.bias = Tensor::vector(std::vector<double>(width, 0.0));
    const double bound = 1.0 / std::sqrt(static_cast<double>(prev));
    for (double& v : l.weight.values()) v = rng.uniform(-bound, bound);
    for (double& v : l.bias.values()) v = rng.uniform(-bound, bound);
    l.activation = act;
    p.layers.push_back(std::move(l));
    prev = width;
  };
  for (std::size_t h : hidden) add_layer(h, hidden_activation);
  add_layer(out, output_activation);
  return p;
}

/// Zeroes the output layer so the network starts as the constant 0 map.
inline void zero_output_layer(MlpParams& p) {
  p.layers.back().weight.fill(0.0);
  p.layers.back().bias.fill(0.0);
}

/// Per-layer activations kept by mlp_forward for the backward pass.
struct MlpCache {
  std::vector<Tensor> inputs;       // input to each layer
  std::vector<Tensor> activations;  // post-activation output of each layer
};

namespace detail {

inline void apply_activation(Activation act, Tensor& t) {
  switch (act) {
    case Activation::kTanh:
      for (double& v : t.values()) v = std::tanh(v);
      break;
    case Activation::kRelu:
      for (double& v : t.values()) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::kIdentity:
      break;
  }
}

// Multiplies g in place by act'(pre), expressed through the post-activation y.
inline void apply_activation_grad(Activation act, const Tensor& y, Tensor& g) {
  switch (act) {
    case Activation::kTanh:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - y[i] * y[i];
      break;
    case Activation::kRelu:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = y[i] > 0.0 ? g[i] : 0.0;
      break;
    case Activation::kIdentity:
      break;
  }
}

}  // namespace detail

/// Batched forward pass. `input` is [batch, in] (a rank-1 input is one row).
/// Fills `cache` when given so mlp_backward can run afterwards.
inline Tensor mlp_forward(const MlpParams& params, const Tensor& input, MlpCache* cache = nullptr) {
  if (params.layers.empty()) throw ShapeError("mlp_forward: network has no layers");
  Tensor x = as_batch(input);
  if (cache) {
    cache->inputs.clear();
    cache->activations.clear();
  }
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    const DenseLayer& layer = params.layers[li];
    if (x.cols() != layer.in_dim()) {
      throw ShapeError("mlp_forward: layer " + std::to_string(li) + " expects input dim " +
                       std::to_string(layer.in_dim()) + ", got " + std::to_string(x.cols()));
    }
    Tensor y = Tensor::matrix(x.rows(), layer.out_dim());
    y.mat().noalias() = x.mat() * layer.weight.mat().transpose();
    y.mat().rowwise() += layer.bias.mat().row(0);
    detail::apply_activation(layer.activation, y);
    if (cache) {
      cache->inputs.push_back(std::move(x));
      cache->activations.push_back(y);
    }
    x = std::move(y);
  }
  return x;
}

struct MlpBackward {
  MlpParams param_grads;
  Tensor input_grad;
};

/// Reverse-mode pass for the scalar sum(upstream * output). Returns exact
/// gradients for every weight, bias and the input batch.
inline MlpBackward mlp_backward(const MlpParams& params, const MlpCache& cache,
                                const Tensor& upstream_grad) {
  if (cache.activations.size() != params.layers.size()) {
    throw ShapeError("mlp_backward: cache has " + std::to_string(cache.activations.size()) +
                     " layers, network has " + std::to_string(params.layers.size()));
  }
  Tensor g = as_batch(upstream_grad);
  if (!g.same_shape(cache.activations.back())) {
    throw ShapeError("mlp_backward: upstream gradient " + g.shape_string() +
                     " does not match output " + cache.activations.back().shape_string());
  }
  MlpBackward out;
  out.param_grads = params;
  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const DenseLayer& layer = params.layers[li];
    detail::apply_activation_grad(layer.activation, cache.activations[li], g);
    DenseLayer& gl = out.param_grads.layers[li];
    gl.weight.mat().noalias() = g.mat().transpose() * cache.inputs[li].mat();
    gl.bias.mat().row(0) = g.mat().colwise().sum();
    Tensor gx = Tensor::matrix(g.rows(), layer.in_dim());
    gx.mat().noalias() = g.mat() * layer.weight.mat();
    g = std::move(gx);
  }
  out.input_grad = std::move(g);
  return out;
}

}  // namespace resact
