// Copyright 2026 The ResAct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "resact/config_io.hpp"
#include "resact/env.hpp"

namespace resact {

struct DatasetFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One JSON object per transition:
/// {user_id, session_id, step, s_h, s_l, a, r, done}.
inline void write_dataset_jsonl(std::ostream& os, const LoggedDataset& ds) {
  for (const auto& u : ds.users) {
    for (std::size_t k = 0; k < u.sessions.size(); ++k) {
      const auto& s = u.sessions[k];
      for (std::size_t t = 0; t < s.transitions.size(); ++t) {
        const Transition& tr = s.transitions[t];
        json line = {{"user_id", u.user_id}, {"session_id", k}, {"step", t},    {"s_h", tr.s.s_h},
                     {"s_l", tr.s.s_l},      {"a", tr.a},       {"r", tr.r},    {"done", tr.done}};
        os << line.dump() << '\n';
      }
    }
  }
}

inline json stats_to_json(const LoggedDataset& ds) {
  json rt = json::array();
  for (const auto& u : ds.users) {
    json row = json::array();
    for (const auto& s : u.sessions) row.push_back(s.return_time);
    rt.push_back(std::move(row));
  }
  const auto& st = ds.stats;
  return {{"format", "resact-dataset-stats"},
          {"version", 1},
          {"seed", ds.seed},
          {"config", to_json(ds.config)},
          {"delta_p75", st.delta_p75},
          {"delta_avg", st.delta_avg},
          {"eta_avg", st.eta_avg},
          {"mean_session_length", st.mean_session_length},
          {"mean_return_time", st.mean_return_time},
          {"users", st.users},
          {"sessions", st.sessions},
          {"requests", st.requests},
          {"return_times", rt}};
}

inline void write_dataset(const std::filesystem::path& jsonl, const std::filesystem::path& stats,
                          const LoggedDataset& ds) {
  std::ofstream d(jsonl, std::ios::binary);
  if (!d) throw std::runtime_error("cannot write " + jsonl.string());
  write_dataset_jsonl(d, ds);
  std::ofstream s(stats, std::ios::binary);
  if (!s) throw std::runtime_error("cannot write " + stats.string());
  s << stats_to_json(ds).dump(2) << '\n';
  if (!d || !s) throw std::runtime_error("write failed for " + jsonl.string());
}

/// Reads a JSONL file plus its stats companion. The logs carry no successor
/// of a user's final transition, so that s_next is set to s (it is terminal).
inline LoggedDataset read_dataset(std::istream& lines, const json& stats) {
  if (stats.value("format", "") != "resact-dataset-stats") throw DatasetFormatError("stats file has wrong format tag");
  LoggedDataset ds;
  ds.seed = stats.at("seed").get<std::uint64_t>();
  ds.config = env_config_from_json(stats.at("config"));
  auto& st = ds.stats;
  st.delta_p75 = stats.at("delta_p75").get<double>();
  st.delta_avg = stats.at("delta_avg").get<std::vector<double>>();
  st.eta_avg = stats.at("eta_avg").get<std::vector<double>>();
  st.mean_session_length = stats.at("mean_session_length").get<double>();
  st.mean_return_time = stats.at("mean_return_time").get<double>();
  st.users = stats.at("users").get<std::size_t>();
  st.sessions = stats.at("sessions").get<std::size_t>();
  st.requests = stats.at("requests").get<std::size_t>();

  std::map<std::size_t, std::size_t> slot;  // user_id -> index in ds.users
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(lines, text)) {
    ++line_no;
    if (text.empty()) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw DatasetFormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
    for (const char* key : {"user_id", "session_id", "step", "s_h", "s_l", "a", "r", "done"}) {
      if (!j.contains(key)) throw DatasetFormatError("line " + std::to_string(line_no) + ": missing '" + key + "'");
    }
    const auto uid = j["user_id"].get<std::size_t>();
    const auto sid = j["session_id"].get<std::size_t>();
    const auto step = j["step"].get<std::size_t>();
    auto [it, fresh] = slot.try_emplace(uid, ds.users.size());
    if (fresh) ds.users.push_back(UserLog{uid, {}});
    UserLog& u = ds.users[it->second];
    if (sid == u.sessions.size()) u.sessions.emplace_back();
    if (sid + 1 != u.sessions.size() || step != u.sessions.back().transitions.size()) {
      throw DatasetFormatError("line " + std::to_string(line_no) + ": records out of order for user " +
                               std::to_string(uid));
    }
    Transition t;
    t.s.s_h = j["s_h"].get<std::vector<double>>();
    t.s.s_l = j["s_l"].get<std::vector<double>>();
    t.a = j["a"].get<std::vector<double>>();
    t.r = j["r"].get<double>();
    t.done = j["done"].get<bool>();
    u.sessions.back().transitions.push_back(std::move(t));
  }
  if (ds.users.empty()) throw DatasetFormatError("dataset has no records");

  const json& rt = stats.at("return_times");
  for (std::size_t ui = 0; ui < ds.users.size(); ++ui) {
    auto& u = ds.users[ui];
    std::vector<Transition*> flat;
    for (std::size_t k = 0; k < u.sessions.size(); ++k) {
      if (u.user_id < rt.size() && k < rt[u.user_id].size()) u.sessions[k].return_time = rt[u.user_id][k].get<double>();
      for (auto& t : u.sessions[k].transitions) flat.push_back(&t);
    }
    for (std::size_t i = 0; i < flat.size(); ++i) flat[i]->s_next = i + 1 < flat.size() ? flat[i + 1]->s : flat[i]->s;
  }
  return ds;
}

inline LoggedDataset read_dataset(const std::filesystem::path& jsonl, const std::filesystem::path& stats_path) {
  std::ifstream d(jsonl, std::ios::binary);
  if (!d) throw std::runtime_error("cannot open dataset " + jsonl.string());
  std::ifstream s(stats_path, std::ios::binary);
  if (!s) throw std::runtime_error("cannot open stats file " + stats_path.string());
  json stats;
  try {
    stats = json::parse(s);
  } catch (const json::exception& e) {
    throw DatasetFormatError(stats_path.string() + ": " + e.what());
  }
  return read_dataset(d, stats);
}

/// Companion stats path for a dataset file: data.jsonl -> data.stats.json.
inline std::filesystem::path stats_path_for(const std::filesystem::path& jsonl) {
  auto p = jsonl;
  p.replace_extension(".stats.json");
  return p;
}

}  // namespace resact
