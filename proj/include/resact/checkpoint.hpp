// Copyright 2026 The ResAct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "resact/baselines.hpp"
#include "resact/config_io.hpp"
#include "resact/trainer.hpp"

namespace resact {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Checkpoint file: a magic line, the manifest length (u64 LE), the JSON
/// manifest (names, shapes, offsets, activations, metadata), then every
/// tensor as little-endian f64 in manifest order. Round trips are bit-exact.
class CheckpointWriter {
 public:
  explicit CheckpointWriter(std::string kind) {
    manifest_ = {{"format", "resact-checkpoint"}, {"version", 1}, {"kind", std::move(kind)}};
    manifest_["tensors"] = json::array();
    manifest_["networks"] = json::object();
    manifest_["meta"] = json::object();
  }

  void add_tensor(const std::string& name, const Tensor& t) {
    manifest_["tensors"].push_back({{"name", name}, {"shape", t.shape()}, {"offset", blob_.size()}});
    blob_.insert(blob_.end(), t.values().begin(), t.values().end());
  }

  void add_vector(const std::string& name, const std::vector<double>& v) {
    if (v.empty()) throw CheckpointError("add_vector: empty vector " + name);
    add_tensor(name, Tensor::vector(v));
  }

  void add_net(const std::string& name, const MlpParams& p) {
    json acts = json::array();
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
      add_tensor(name + "/" + std::to_string(i) + "/weight", p.layers[i].weight);
      add_tensor(name + "/" + std::to_string(i) + "/bias", p.layers[i].bias);
      acts.push_back(std::string(to_string(p.layers[i].activation)));
    }
    manifest_["networks"][name] = acts;
  }

  void add_adam(const std::string& name, const AdamState& s) {
    add_net(name + "/m", s.first_moment);
    add_net(name + "/v", s.second_moment);
    add_vector(name + "/hyper", {s.beta1, s.beta2, s.epsilon});
    manifest_["meta"]["adam_step/" + name] = s.step;
  }

  json& meta() { return manifest_["meta"]; }

  void save(const std::filesystem::path& file) const {
    if (file.has_parent_path()) {
      std::error_code ec;
      std::filesystem::create_directories(file.parent_path(), ec);
      if (ec) throw CheckpointError("cannot create directory for " + file.string() + ": " + ec.message());
    }
    json m = manifest_;
    m["blob_doubles"] = blob_.size();
    const std::string text = m.dump();
    std::ofstream os(file, std::ios::binary);
    if (!os) throw CheckpointError("cannot write " + file.string());
    os.write(kMagic, sizeof(kMagic) - 1);
    write_u64(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (double v : blob_) write_u64(os, std::bit_cast<std::uint64_t>(v));
    if (!os) throw CheckpointError("write failed for " + file.string());
  }

  static constexpr char kMagic[] = "RESACT-CKPT\n";

  static void write_u64(std::ostream& os, std::uint64_t bits) {
    unsigned char buf[8];
    for (int k = 0; k < 8; ++k) buf[k] = static_cast<unsigned char>(bits >> (8 * k));
    os.write(reinterpret_cast<const char*>(buf), 8);
  }

  static bool read_u64(std::istream& is, std::uint64_t& bits) {
    unsigned char buf[8];
    if (!is.read(reinterpret_cast<char*>(buf), 8)) return false;
    bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(buf[k]) << (8 * k);
    return true;
  }

 private:
  json manifest_;
  std::vector<double> blob_;
};

class CheckpointReader {
 public:
  static CheckpointReader open(const std::filesystem::path& file) {
    CheckpointReader r;
    std::ifstream is(file, std::ios::binary);
    if (!is) throw CheckpointError("cannot open checkpoint " + file.string());
    constexpr std::size_t magic_len = sizeof(CheckpointWriter::kMagic) - 1;
    std::string magic(magic_len, '\0');
    if (!is.read(magic.data(), static_cast<std::streamsize>(magic_len)) || magic != CheckpointWriter::kMagic) {
      throw CheckpointError(file.string() + " is not a checkpoint file");
    }
    std::uint64_t len = 0;
    if (!CheckpointWriter::read_u64(is, len) || len > (std::uint64_t{1} << 32)) {
      throw CheckpointError("corrupt manifest length in " + file.string());
    }
    std::string text(len, '\0');
    if (!is.read(text.data(), static_cast<std::streamsize>(len))) throw CheckpointError("truncated manifest");
    try {
      r.manifest_ = json::parse(text);
    } catch (const json::exception& e) {
      throw CheckpointError("manifest: " + std::string(e.what()));
    }
    if (r.manifest_.value("format", "") != "resact-checkpoint" || r.manifest_.value("version", 0) != 1) {
      throw CheckpointError("unsupported checkpoint format in " + file.string());
    }
    const auto n = r.manifest_.at("blob_doubles").get<std::size_t>();
    r.blob_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t bits = 0;
      if (!CheckpointWriter::read_u64(is, bits)) throw CheckpointError("weight data is truncated");
      r.blob_[i] = std::bit_cast<double>(bits);
    }
    if (is.peek() != std::char_traits<char>::eof()) throw CheckpointError("checkpoint has trailing bytes");
    for (const auto& t : r.manifest_.at("tensors")) r.index_[t.at("name").get<std::string>()] = &t;
    return r;
  }

  [[nodiscard]] std::string kind() const { return manifest_.at("kind").get<std::string>(); }
  [[nodiscard]] const json& meta() const { return manifest_.at("meta"); }

  [[nodiscard]] Tensor tensor(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw CheckpointError("checkpoint has no tensor '" + name + "'");
    const json& e = *it->second;
    auto shape = e.at("shape").get<std::vector<std::size_t>>();
    const auto off = e.at("offset").get<std::size_t>();
    std::size_t count = 1;
    for (auto d : shape) count *= d;
    if (off + count > blob_.size()) throw CheckpointError("tensor '" + name + "' runs past the blob");
    return Tensor(std::move(shape), std::vector<double>(blob_.begin() + static_cast<std::ptrdiff_t>(off),
                                                        blob_.begin() + static_cast<std::ptrdiff_t>(off + count)));
  }

  [[nodiscard]] std::vector<double> vec(const std::string& name) const {
    const Tensor t = tensor(name);
    return {t.values().begin(), t.values().end()};
  }

  [[nodiscard]] MlpParams net(const std::string& name) const {
    if (!manifest_.at("networks").contains(name)) throw CheckpointError("checkpoint has no network '" + name + "'");
    MlpParams p;
    const auto& acts = manifest_.at("networks").at(name);
    for (std::size_t i = 0; i < acts.size(); ++i) {
      DenseLayer l;
      l.weight = tensor(name + "/" + std::to_string(i) + "/weight");
      l.bias = tensor(name + "/" + std::to_string(i) + "/bias");
      l.activation = activation_from_string(acts[i].get<std::string>());
      if (l.bias.size() != l.weight.rows()) throw CheckpointError("layer shape mismatch in network '" + name + "'");
      p.layers.push_back(std::move(l));
    }
    return p;
  }

  [[nodiscard]] AdamState adam(const std::string& name) const {
    AdamState s;
    s.first_moment = net(name + "/m");
    s.second_moment = net(name + "/v");
    const auto h = vec(name + "/hyper");
    if (h.size() != 3) throw CheckpointError("bad optimizer hyper-parameters for " + name);
    s.beta1 = h[0];
    s.beta2 = h[1];
    s.epsilon = h[2];
    s.step = meta().at("adam_step/" + name).get<std::int64_t>();
    return s;
  }

 private:
  json manifest_;
  std::vector<double> blob_;
  std::map<std::string, const json*> index_;
};

namespace detail {

inline void add_normalizer(CheckpointWriter& w, const ObsNormalizer& n) {
  w.add_vector("normalizer/mean_h", n.mean_h);
  w.add_vector("normalizer/std_h", n.std_h);
  w.add_vector("normalizer/mean_l", n.mean_l);
  w.add_vector("normalizer/std_l", n.std_l);
  w.meta()["normalizer_enabled"] = n.enabled;
}

inline ObsNormalizer read_normalizer(const CheckpointReader& r) {
  return {r.vec("normalizer/mean_h"), r.vec("normalizer/std_h"), r.vec("normalizer/mean_l"),
          r.vec("normalizer/std_l"), r.meta().at("normalizer_enabled").get<bool>()};
}

}  // namespace detail

inline void save_bundle(const std::filesystem::path& file, const ModelBundle& m, const json& extra = json::object()) {
  CheckpointWriter w("resact");
  w.add_net("encoder", m.cvae.encoder);
  w.add_net("decoder", m.cvae.decoder);
  w.add_net("f_h", m.actor.f_h);
  w.add_net("f_l", m.actor.f_l);
  w.add_net("f_a", m.actor.f_a);
  w.add_net("q1", m.critic.q1);
  w.add_net("q2", m.critic.q2);
  w.add_net("q1_target", m.critic.q1_target);
  w.add_net("q2_target", m.critic.q2_target);
  w.add_net("reward_model", m.reward_model);
  w.add_net("decoder_target", m.decoder_target);
  w.add_net("f_h_target", m.actor_target.f_h);
  w.add_net("f_l_target", m.actor_target.f_l);
  w.add_net("f_a_target", m.actor_target.f_a);
  w.add_vector("rho_max", {m.actor.rho_max, m.actor_target.rho_max});
  detail::add_normalizer(w, m.normalizer);
  w.add_adam("opt/encoder", m.opt.encoder);
  w.add_adam("opt/decoder", m.opt.decoder);
  w.add_adam("opt/f_h", m.opt.f_h);
  w.add_adam("opt/f_l", m.opt.f_l);
  w.add_adam("opt/f_a", m.opt.f_a);
  w.add_adam("opt/q1", m.opt.q1);
  w.add_adam("opt/q2", m.opt.q2);
  w.add_adam("opt/reward_model", m.opt.reward_model);
  w.meta()["reward_head"] = std::string(to_string(m.reward_head));
  w.meta()["iteration"] = m.iteration;
  w.meta()["extra"] = extra;
  w.save(file);
}

inline ModelBundle load_bundle(const std::filesystem::path& file, json* extra = nullptr) {
  const auto r = CheckpointReader::open(file);
  if (r.kind() != "resact") throw CheckpointError("checkpoint kind is '" + r.kind() + "', expected 'resact'");
  ModelBundle m;
  m.cvae = {r.net("encoder"), r.net("decoder")};
  const auto rho = r.vec("rho_max");
  if (rho.size() != 2) throw CheckpointError("bad rho_max entry");
  m.actor = {r.net("f_h"), r.net("f_l"), r.net("f_a"), rho[0]};
  m.actor_target = {r.net("f_h_target"), r.net("f_l_target"), r.net("f_a_target"), rho[1]};
  m.critic = {r.net("q1"), r.net("q2"), r.net("q1_target"), r.net("q2_target")};
  m.reward_model = r.net("reward_model");
  m.decoder_target = r.net("decoder_target");
  m.normalizer = detail::read_normalizer(r);
  m.opt = {r.adam("opt/encoder"), r.adam("opt/decoder"), r.adam("opt/f_h"), r.adam("opt/f_l"),
           r.adam("opt/f_a"),     r.adam("opt/q1"),      r.adam("opt/q2"),  r.adam("opt/reward_model")};
  m.reward_head = reward_head_from_string(r.meta().at("reward_head").get<std::string>());
  m.iteration = r.meta().at("iteration").get<std::size_t>();
  if (extra) *extra = r.meta().at("extra");
  return m;
}

inline void save_baseline(const std::filesystem::path& file, const BaselinePolicy& p,
                          const json& extra = json::object()) {
  CheckpointWriter w(std::string(to_string(p.kind)));
  if (p.kind == BaselineKind::kCvaeBc) {
    w.add_net("encoder", p.cvae.encoder);
    w.add_net("decoder", p.cvae.decoder);
  } else {
    w.add_net("actor", p.actor);
  }
  if (p.kind == BaselineKind::kTd3Direct) {
    w.add_net("q1", p.critic.q1);
    w.add_net("q2", p.critic.q2);
    w.add_net("q1_target", p.critic.q1_target);
    w.add_net("q2_target", p.critic.q2_target);
  }
  detail::add_normalizer(w, p.normalizer);
  w.meta()["extra"] = extra;
  w.save(file);
}

inline BaselinePolicy load_baseline(const std::filesystem::path& file, json* extra = nullptr) {
  const auto r = CheckpointReader::open(file);
  BaselinePolicy p;
  p.kind = baseline_kind_from_string(r.kind());
  if (p.kind == BaselineKind::kCvaeBc) {
    p.cvae = {r.net("encoder"), r.net("decoder")};
  } else {
    p.actor = r.net("actor");
  }
  if (p.kind == BaselineKind::kTd3Direct) p.critic = {r.net("q1"), r.net("q2"), r.net("q1_target"), r.net("q2_target")};
  p.normalizer = detail::read_normalizer(r);
  if (extra) *extra = r.meta().at("extra");
  return p;
}

inline std::string checkpoint_kind(const std::filesystem::path& file) { return CheckpointReader::open(file).kind(); }

}  // namespace resact
