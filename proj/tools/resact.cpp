// Copyright 2026 The ResAct Authors
// SPDX-License-Identifier: Apache-2.0

// Command line front end: gen-data, train, eval, rollout, plot.

#include <openssl/evp.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "resact/resact.hpp"

extern char** environ;

namespace fs = std::filesystem;
using namespace resact;

namespace {

struct CliError : std::runtime_error {
  std::string type;
  CliError(std::string t, const std::string& msg) : std::runtime_error(msg), type(std::move(t)) {}
};

fs::path run_root() {
  const char* env = std::getenv("RESACT_RUN_DIR");
  return env && *env ? fs::path(env) : fs::path("runs");
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw CliError("io_error", "cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    if (ec) throw CliError("io_error", "cannot create " + p.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(p, std::ios::binary);
  if (!out) throw CliError("io_error", "cannot write " + p.string());
  out << text;
  if (!out) throw CliError("io_error", "write failed for " + p.string());
}

void write_json(const fs::path& p, const json& j) { write_file(p, j.dump(2) + "\n"); }

// Same id git gives the file as a blob.
std::string git_blob_sha1(const std::string& bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + std::string(1, '\0');
  const std::string blob = header + bytes;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), md, &len, EVP_sha1(), nullptr) != 1) {
    throw CliError("hash_error", "SHA-1 digest failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

struct FileConfig {
  json env = json::object(), train = json::object(), eval = json::object();
  json raw;  // null when no file given
};

FileConfig load_config(const std::string& path) {
  FileConfig c;
  if (path.empty()) return c;
  try {
    c.raw = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw CliError("config_error", path + ": " + e.what());
  }
  if (!c.raw.is_object()) throw CliError("config_error", path + ": expected a JSON object");
  for (const auto& [k, v] : c.raw.items()) {
    if (k == "env") {
      c.env = v;
    } else if (k == "train") {
      c.train = v;
    } else if (k == "eval") {
      c.eval = v;
    } else {
      throw CliError("config_error", path + ": unknown section '" + k + "' (expected env, train, eval)");
    }
  }
  return c;
}

LoggedDataset load_dataset(const fs::path& path) {
  if (!fs::exists(path)) throw CliError("missing_dataset", "dataset not found: " + path.string());
  return read_dataset(path, stats_path_for(path));
}

json dataset_ref(const fs::path& path) {
  return {{"path", path.string()}, {"git_sha1", git_blob_sha1(read_file(path))}};
}

/// Behavior-proxy means on every logged step: "exact" uses the simulator's
/// serving policy, anything else is a cvae_bc checkpoint.
Tensor proxy_means(const std::string& proxy, const LoggedDataset& ds, const TestSet& test) {
  if (proxy == "exact") return exact_behavior_means(ds, test);
  const BaselinePolicy p = load_baseline(proxy);
  if (p.kind != BaselineKind::kCvaeBc) throw CliError("checkpoint_error", proxy + " is not a cvae_bc checkpoint");
  return actions_for(p.action_fn(), test.states);
}

struct LoadedPolicy {
  std::string kind;
  ActionFn fn;                   // empty for the behavior policy
  std::size_t n_estimators = 0;
  std::optional<SimPolicy> sim;  // overrides as_sim_policy(fn) for rollouts
};

LoadedPolicy load_policy(const std::string& what, const LoggedDataset& ds, std::optional<std::size_t> n,
                         std::uint64_t latent_seed) {
  LoadedPolicy out;
  if (what == "behavior") {
    out.kind = "behavior";
    const EnvConfig cfg = ds.config;
    out.sim = [cfg](const UserState& s, const UserProfile& u, Rng& r) { return behavior_action(cfg, u, s, r); };
    return out;
  }
  if (!fs::exists(what)) throw CliError("checkpoint_error", "checkpoint not found: " + what);
  out.kind = checkpoint_kind(what);
  if (out.kind == "resact") {
    json extra;
    const ModelBundle m = load_bundle(what, &extra);
    if (m.sh_dim() != ds.config.session_feature_dim || m.sl_dim() != ds.config.request_feature_dim ||
        m.action_dim() != ds.config.action_dim) {
      throw CliError("checkpoint_error", "checkpoint dimensions do not match the dataset schema");
    }
    out.n_estimators = n.value_or(extra.value("n_estimators", std::size_t{5}));
    out.fn = as_action_fn(ServingPolicy::from_bundle(m, out.n_estimators), latent_seed);
  } else {
    const BaselinePolicy p = load_baseline(what);
    out.fn = p.action_fn();
  }
  return out;
}

// ---------------------------------------------------------------------------
// gen-data

struct GenOpts {
  std::string config, out, mode;
  std::optional<std::size_t> users, sessions;
  std::optional<std::uint64_t> world_seed;
  std::uint64_t seed = 0;
};

int cmd_gen_data(const GenOpts& o) {
  const FileConfig fc = load_config(o.config);
  EnvConfig env;
  try {
    env = env_config_from_json(fc.env);
    if (o.users) env.users = *o.users;
    if (o.sessions) env.sessions_per_user = *o.sessions;
    if (!o.mode.empty()) env.reward_mode = reward_mode_from_string(o.mode);
    if (o.world_seed) env.world_seed = *o.world_seed;
    env.validate();
  } catch (const std::invalid_argument& e) {
    throw CliError("config_error", e.what());
  }
  const fs::path out = o.out.empty() ? run_root() / "data" / ("data-seed" + std::to_string(o.seed) + ".jsonl") : fs::path(o.out);
  const LoggedDataset ds = generate_dataset(env, o.seed);
  std::ostringstream jsonl;
  write_dataset_jsonl(jsonl, ds);
  write_file(out, jsonl.str());
  write_json(stats_path_for(out), stats_to_json(ds));
  const auto& st = ds.stats;
  std::printf("%-10s %-10s %-10s %-22s %-18s\n", "users", "sessions", "requests", "mean_session_length",
              "mean_return_time");
  std::printf("%-10zu %-10zu %-10zu %-22.4f %-18.4f\n", st.users, st.sessions, st.requests, st.mean_session_length,
              st.mean_return_time);
  std::printf("wrote %s (git %s)\n", out.string().c_str(), git_blob_sha1(jsonl.str()).c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  std::string data, method = "resact", config, val, proxy = "exact", name, sweep;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> iterations, batch_size, n_estimators, eval_interval;
  std::optional<double> w_exp, w_con, actor_lr, critic_lr;
  std::size_t log_interval = 1;
  std::size_t jobs = 1;
};

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stoull(tok));
    } catch (const std::exception&) {
      throw CliError("usage", "--sweep expects comma separated seeds, got '" + s + "'");
    }
  }
  if (out.empty()) throw CliError("usage", "--sweep needs at least one seed");
  return out;
}

/// Re-launches this binary once per seed; returns non-zero if any child fails.
int run_sweep(const std::vector<std::string>& argv, const TrainOpts& o) {
  const std::vector<std::uint64_t> seeds = parse_seeds(o.sweep);
  const std::string base = o.name.empty() ? o.method : o.name;
  std::vector<std::string> common;
  for (std::size_t i = 0; i < argv.size(); ++i) {
    const std::string& a = argv[i];
    if (a == "--sweep" || a == "--seed" || a == "--name" || a == "--jobs") {
      ++i;
      continue;
    }
    if (a.rfind("--sweep=", 0) == 0 || a.rfind("--seed=", 0) == 0 || a.rfind("--name=", 0) == 0 ||
        a.rfind("--jobs=", 0) == 0) {
      continue;
    }
    common.push_back(a);
  }
  std::map<pid_t, std::uint64_t> running;
  json children = json::array();
  int failures = 0;
  auto reap_one = [&] {
    int status = 0;
    const pid_t pid = ::waitpid(-1, &status, 0);
    if (pid <= 0) return;
    const bool ok = WIFEXITED(status) && WEXITSTATUS(status) == 0;
    failures += ok ? 0 : 1;
    children.push_back({{"seed", running[pid]},
                        {"run", base + "-seed" + std::to_string(running[pid])},
                        {"exit_code", WIFEXITED(status) ? WEXITSTATUS(status) : -1}});
    running.erase(pid);
  };
  for (std::uint64_t seed : seeds) {
    while (running.size() >= std::max<std::size_t>(1, o.jobs)) reap_one();
    std::vector<std::string> args = common;
    args.insert(args.end(), {"--seed", std::to_string(seed), "--name", base + "-seed" + std::to_string(seed)});
    std::vector<char*> cargs;
    for (auto& a : args) cargs.push_back(a.data());
    cargs.push_back(nullptr);
    pid_t pid = 0;
    if (::posix_spawn(&pid, "/proc/self/exe", nullptr, nullptr, cargs.data(), environ) != 0) {
      throw CliError("spawn_error", "could not launch sweep child for seed " + std::to_string(seed));
    }
    running[pid] = seed;
  }
  while (!running.empty()) reap_one();
  std::cout << json{{"sweep", children}}.dump(2) << "\n";
  return failures ? 1 : 0;
}

int cmd_train(const TrainOpts& o, const std::vector<std::string>& argv) {
  if (!o.sweep.empty()) return run_sweep(argv, o);
  const FileConfig fc = load_config(o.config);
  TrainConfig cfg;
  EvalConfig ec;
  try {
    cfg = train_config_from_json(fc.train);
    ec = eval_config_from_json(fc.eval);
    if (o.seed) cfg.seed = *o.seed;
    if (o.iterations) cfg.iterations = *o.iterations;
    if (o.batch_size) cfg.batch_size = *o.batch_size;
    if (o.n_estimators) cfg.n_estimators = *o.n_estimators;
    if (o.eval_interval) cfg.eval_interval = *o.eval_interval;
    if (o.w_exp) cfg.w_exp = *o.w_exp;
    if (o.w_con) cfg.w_con = *o.w_con;
    if (o.actor_lr) cfg.actor_lr = *o.actor_lr;
    if (o.critic_lr) cfg.critic_lr = *o.critic_lr;
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw CliError("config_error", e.what());
  }
  if (o.log_interval == 0) throw CliError("config_error", "--log-interval must be >= 1");
  const std::string method = o.method == "td3_direct" ? "td3" : o.method;
  if (method != "resact" && method != "bc" && method != "cvae_bc" && method != "td3") {
    throw CliError("usage", "--method must be one of resact, bc, cvae_bc, td3");
  }
  const LoggedDataset data = load_dataset(o.data);

  std::optional<LoggedDataset> val;
  std::optional<TestSet> val_test;
  Tensor val_proxy;
  if (!o.val.empty()) {
    val = load_dataset(o.val);
    val_test.emplace(*val);
    val_proxy = proxy_means(o.proxy, *val, *val_test);
  }

  const fs::path dir = run_root() / (o.name.empty() ? method + "-seed" + std::to_string(cfg.seed) : o.name);
  json echo = {{"method", method},
               {"seed", cfg.seed},
               {"dataset", dataset_ref(o.data)},
               {"env", to_json(data.config)},
               {"train", to_json(cfg)},
               {"eval", to_json(ec)},
               {"log_interval", o.log_interval},
               {"validation", val ? json{{"dataset", dataset_ref(o.val)}, {"proxy", o.proxy}} : json(nullptr)},
               {"config_file", fc.raw}};
  write_json(dir / "config.json", echo);

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<IterationMetrics> history;
  const json extra = {{"method", method}, {"seed", cfg.seed}, {"n_estimators", cfg.n_estimators}};
  if (method == "resact") {
    TrainHooks hooks;
    if (val) {
      hooks.validate = [&](const ModelBundle& m) {
        return evaluate_checkpoint(m, *val, val_proxy, ec, cfg.n_estimators, cfg.seed).ncis;
      };
    }
    hooks.checkpoint = [&](const ModelBundle& m) {
      char name[64];
      std::snprintf(name, sizeof name, "iter_%07zu.ckpt", m.iteration);
      save_bundle(dir / "checkpoints" / name, m, extra);
    };
    TrainResult r = train(data, cfg, hooks);
    save_bundle(dir / "model.ckpt", r.bundle, extra);
    history = std::move(r.history);
  } else {
    BaselineResult r = method == "bc" ? train_bc(data, cfg) : method == "cvae_bc" ? train_cvae_bc(data, cfg)
                                                                                  : train_td3_direct(data, cfg);
    if (val && !r.history.empty()) {
      r.history.back().val_ncis = ncis_value(*val_test, actions_for(r.policy.action_fn(), val_test->states), val_proxy, ec).ncis;
    }
    save_baseline(dir / "model.ckpt", r.policy, extra);
    history = std::move(r.history);
  }
  std::ostringstream csv;
  write_metrics_csv(csv, history, o.log_interval);
  write_file(dir / "metrics.csv", csv.str());

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json summary = {{"run_dir", dir.string()}, {"method", method}, {"iterations", history.size()}};
  if (!history.empty()) {
    const auto& last = history.back();
    summary["final"] = {{"L_Rec", last.l_rec}, {"L_TD1", last.l_td1}, {"L_TD2", last.l_td2},
                        {"L_Exp", last.l_exp}, {"L_Con", last.l_con}, {"meanQ", last.mean_q}};
    if (last.val_ncis) summary["val_ncis"] = *last.val_ncis;
  }
  std::cout << summary.dump(2) << "\n";
  std::cerr << "trained in " << secs << " s\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval / rollout

struct EvalOpts {
  std::string checkpoint, data, proxy = "exact", config, out;
  std::optional<std::size_t> n_estimators;
  std::optional<double> clip_c, proxy_std;
  std::uint64_t latent_seed = 99;
  bool true_rollout = false;
  std::size_t episodes = 400;
  std::uint64_t rollout_seed = 77;
};

EvalConfig eval_config(const std::string& path, std::optional<double> clip_c, std::optional<double> proxy_std) {
  const FileConfig fc = load_config(path);
  try {
    EvalConfig ec = eval_config_from_json(fc.eval);
    if (clip_c) ec.clip_c = *clip_c;
    if (proxy_std) ec.proxy_std = *proxy_std;
    ec.validate();
    return ec;
  } catch (const std::invalid_argument& e) {
    throw CliError("config_error", e.what());
  }
}

RolloutSummary rollout_of(const LoadedPolicy& p, const LoggedDataset& ds, std::size_t episodes, double gamma,
                          std::uint64_t seed) {
  const SimPolicy sim = p.sim ? *p.sim : as_sim_policy(p.fn);
  return rollout_policy(ds.config, sim, population_of(ds), ds.stats.delta_p75, episodes, gamma, seed);
}

int cmd_eval(const EvalOpts& o) {
  const EvalConfig ec = eval_config(o.config, o.clip_c, o.proxy_std);
  const LoggedDataset ds = load_dataset(o.data);
  const TestSet test(ds);
  const LoadedPolicy policy = load_policy(o.checkpoint, ds, o.n_estimators, o.latent_seed);
  const Tensor behavior = proxy_means(o.proxy, ds, test);
  const Tensor eval_means = policy.kind == "behavior" ? exact_behavior_means(ds, test) : actions_for(policy.fn, test.states);
  const NcisReport r = ncis_value(test, eval_means, behavior, ec);
  json report = to_json(r);
  json config = {{"eval", to_json(ec)},
                 {"checkpoint", o.checkpoint},
                 {"policy_kind", policy.kind},
                 {"data", dataset_ref(o.data)},
                 {"proxy", o.proxy},
                 {"latent_seed", o.latent_seed}};
  if (policy.kind == "resact") config["n_estimators"] = policy.n_estimators;
  report["config"] = config;
  if (o.true_rollout) {
    json roll = to_json(rollout_of(policy, ds, o.episodes, ec.discount, o.rollout_seed));
    roll["seed"] = o.rollout_seed;
    roll["dataset_mean_session_length"] = ds.stats.mean_session_length;
    report["rollout"] = roll;
  }
  if (!o.out.empty()) write_json(o.out, report);
  std::cout << report.dump(2) << "\n";
  return 0;
}

struct RolloutOpts {
  std::string policy = "behavior", data, config;
  std::optional<std::size_t> n_estimators;
  std::uint64_t latent_seed = 99, seed = 77;
  std::size_t episodes = 400;
};

int cmd_rollout(const RolloutOpts& o) {
  const EvalConfig ec = eval_config(o.config, std::nullopt, std::nullopt);
  const LoggedDataset ds = load_dataset(o.data);
  const LoadedPolicy p = load_policy(o.policy, ds, o.n_estimators, o.latent_seed);
  json out = to_json(rollout_of(p, ds, o.episodes, ec.discount, o.seed));
  out["policy"] = o.policy;
  out["policy_kind"] = p.kind;
  out["seed"] = o.seed;
  out["gamma"] = ec.discount;
  out["dataset"] = {{"mean_session_length", ds.stats.mean_session_length},
                    {"mean_return_time", ds.stats.mean_return_time}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// plot

struct PlotOpts {
  std::vector<std::string> runs;
  std::string kind = "curves", out, data, proxy = "exact", n_values = "5,10,15,20,25", config;
  std::uint64_t latent_seed = 99;
};

const char* kCurvesScript = R"PY(#!/usr/bin/env python3
# Learning curves: mean with a 95% confidence band across runs.
import csv
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = sys.argv[1] if len(sys.argv) > 1 else "."
with open(f"{here}/curves.csv") as f:
    rows = list(csv.DictReader(f))
metrics = [c[:-5] for c in rows[0] if c.endswith("_mean")]
fig, axes = plt.subplots(len(metrics), 1, figsize=(7, 2.4 * len(metrics)), sharex=True)
for ax, m in zip(axes, metrics):
    pts = [r for r in rows if r[m + "_mean"] != ""]
    x = [int(r["iteration"]) for r in pts]
    mean = [float(r[m + "_mean"]) for r in pts]
    lo = [float(r[m + "_lo"]) for r in pts]
    hi = [float(r[m + "_hi"]) for r in pts]
    ax.plot(x, mean, lw=1)
    ax.fill_between(x, lo, hi, alpha=0.3)
    ax.set_ylabel(m)
axes[-1].set_xlabel("iteration")
fig.tight_layout()
fig.savefig(f"{here}/curves.png", dpi=120)
)PY";

const char* kNsweepScript = R"PY(#!/usr/bin/env python3
# NCIS against the number of candidate actions, mean with a 95% confidence interval.
import csv
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = sys.argv[1] if len(sys.argv) > 1 else "."
with open(f"{here}/nsweep.csv") as f:
    rows = list(csv.DictReader(f))
n = [int(r["n_estimators"]) for r in rows]
mean = [float(r["ncis_mean"]) for r in rows]
err = [float(r["ncis_mean"]) - float(r["ncis_lo"]) for r in rows]
plt.errorbar(n, mean, yerr=err, marker="o", capsize=3)
plt.xlabel("number of estimators")
plt.ylabel("NCIS")
plt.tight_layout()
plt.savefig(f"{here}/nsweep.png", dpi=120)
)PY";

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

int plot_curves(const PlotOpts& o, const fs::path& out) {
  std::vector<std::vector<IterationMetrics>> runs;
  for (const auto& r : o.runs) {
    const fs::path csv = fs::path(r) / "metrics.csv";
    if (!fs::exists(csv)) continue;
    std::ifstream in(csv);
    try {
      runs.push_back(read_metrics_csv(in));
    } catch (const std::exception& e) {
      throw CliError("format_error", csv.string() + ": " + e.what());
    }
  }
  if (runs.empty()) throw CliError("no_matching_runs", "none of the given directories has a metrics.csv");
  std::map<std::size_t, std::vector<const IterationMetrics*>> by_iter;
  for (const auto& h : runs)
    for (const auto& m : h) by_iter[m.iteration].push_back(&m);

  using Getter = std::function<std::optional<double>(const IterationMetrics&)>;
  const std::vector<std::pair<std::string, Getter>> cols{
      {"L_Rec", [](const IterationMetrics& m) { return std::optional(m.l_rec); }},
      {"L_TD1", [](const IterationMetrics& m) { return std::optional(m.l_td1); }},
      {"L_TD2", [](const IterationMetrics& m) { return std::optional(m.l_td2); }},
      {"L_Exp", [](const IterationMetrics& m) { return std::optional(m.l_exp); }},
      {"L_Con", [](const IterationMetrics& m) { return std::optional(m.l_con); }},
      {"meanQ", [](const IterationMetrics& m) { return std::optional(m.mean_q); }},
      {"val_NCIS", [](const IterationMetrics& m) { return m.val_ncis; }},
  };
  std::ostringstream csv;
  csv << "iteration,n_runs";
  for (const auto& [name, get] : cols) csv << "," << name << "_mean," << name << "_lo," << name << "_hi";
  csv << "\n";
  std::size_t rows = 0;
  for (const auto& [it, ms] : by_iter) {
    if (ms.size() != runs.size()) continue;  // only iterations every run logged
    csv << it << "," << ms.size();
    for (const auto& [name, get] : cols) {
      std::vector<double> xs;
      for (const auto* m : ms)
        if (auto v = get(*m)) xs.push_back(*v);
      if (xs.size() != ms.size()) {
        csv << ",,,";
        continue;
      }
      const Summary s = summarize(xs);
      csv << "," << num(s.mean) << "," << num(s.mean - s.half_width) << "," << num(s.mean + s.half_width);
    }
    csv << "\n";
    ++rows;
  }
  if (rows == 0) throw CliError("no_matching_runs", "the runs share no logged iteration");
  write_file(out / "curves.csv", csv.str());
  write_file(out / "plot_curves.py", kCurvesScript);
  std::cout << json{{"curves", (out / "curves.csv").string()}, {"runs", runs.size()}, {"rows", rows},
                    {"script", (out / "plot_curves.py").string()}}
                   .dump(2)
            << "\n";
  return 0;
}

int plot_nsweep(const PlotOpts& o, const fs::path& out) {
  if (o.data.empty()) throw CliError("usage", "plot --kind nsweep needs --data");
  std::vector<fs::path> models;
  for (const auto& r : o.runs) {
    const fs::path m = fs::path(r) / "model.ckpt";
    if (fs::exists(m) && checkpoint_kind(m) == "resact") models.push_back(m);
  }
  if (models.empty()) throw CliError("no_matching_runs", "none of the given directories has a resact model.ckpt");
  std::vector<std::size_t> ns;
  for (std::uint64_t v : parse_seeds(o.n_values)) {
    if (v == 0) throw CliError("usage", "--n-values must be positive");
    ns.push_back(v);
  }
  const EvalConfig ec = eval_config(o.config, std::nullopt, std::nullopt);
  const LoggedDataset ds = load_dataset(o.data);
  const TestSet test(ds);
  const Tensor behavior = proxy_means(o.proxy, ds, test);
  std::map<std::size_t, std::vector<double>> values;
  for (const auto& path : models) {
    const ModelBundle m = load_bundle(path);
    for (std::size_t n : ns) values[n].push_back(evaluate_checkpoint(m, ds, behavior, ec, n, o.latent_seed).ncis);
  }
  std::ostringstream csv;
  csv << "n_estimators,n_runs,ncis_mean,ncis_lo,ncis_hi\n";
  for (std::size_t n : ns) {
    const Summary s = summarize(values[n]);
    csv << n << "," << s.n << "," << num(s.mean) << "," << num(s.mean - s.half_width) << ","
        << num(s.mean + s.half_width) << "\n";
  }
  write_file(out / "nsweep.csv", csv.str());
  write_file(out / "plot_nsweep.py", kNsweepScript);
  std::cout << json{{"nsweep", (out / "nsweep.csv").string()}, {"runs", models.size()}, {"rows", ns.size()},
                    {"script", (out / "plot_nsweep.py").string()}}
                   .dump(2)
            << "\n";
  return 0;
}

int cmd_plot(const PlotOpts& o) {
  if (o.runs.empty()) throw CliError("no_matching_runs", "no run directories given");
  const fs::path out = o.out.empty() ? run_root() / "plots" : fs::path(o.out);
  if (o.kind == "curves") return plot_curves(o, out);
  if (o.kind == "nsweep") return plot_nsweep(o, out);
  throw CliError("usage", "--kind must be curves or nsweep");
}

void print_error(const std::string& type, const std::string& message) {
  std::cerr << json{{"error", {{"type", type}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ResAct offline RL for long-term engagement: data, training, evaluation"};
  app.require_subcommand(1);

  GenOpts gen;
  auto* g = app.add_subcommand("gen-data", "generate a logged dataset from the simulator");
  g->add_option("--config", gen.config, "JSON config file (env section is used)");
  g->add_option("--users", gen.users, "number of users");
  g->add_option("--sessions", gen.sessions, "sessions per user");
  g->add_option("--seed", gen.seed, "data seed");
  g->add_option("--mode", gen.mode, "reward mode: return_time, session_length, both");
  g->add_option("--world-seed", gen.world_seed, "seed of the user population");
  g->add_option("--out", gen.out, "output .jsonl (stats go next to it)");

  TrainOpts tr;
  auto* t = app.add_subcommand("train", "train ResAct or a baseline");
  t->add_option("--data", tr.data, "training dataset (.jsonl)")->required();
  t->add_option("--method", tr.method, "resact, bc, cvae_bc or td3");
  t->add_option("--config", tr.config, "JSON config file (train and eval sections)");
  t->add_option("--seed", tr.seed, "training seed");
  t->add_option("--iterations", tr.iterations, "number of iterations");
  t->add_option("--batch-size", tr.batch_size);
  t->add_option("--n-estimators", tr.n_estimators);
  t->add_option("--eval-interval", tr.eval_interval, "validation and checkpoint interval");
  t->add_option("--w-exp", tr.w_exp, "weight of the expressiveness loss");
  t->add_option("--w-con", tr.w_con, "weight of the conciseness loss");
  t->add_option("--actor-lr", tr.actor_lr);
  t->add_option("--critic-lr", tr.critic_lr);
  t->add_option("--log-interval", tr.log_interval, "write every k-th iteration to metrics.csv");
  t->add_option("--val", tr.val, "validation dataset for NCIS during training");
  t->add_option("--proxy", tr.proxy, "behavior proxy: exact or a cvae_bc checkpoint");
  t->add_option("--name", tr.name, "run directory name under $RESACT_RUN_DIR");
  t->add_option("--sweep", tr.sweep, "comma separated seeds, one process each");
  t->add_option("--jobs", tr.jobs, "concurrent sweep processes");

  EvalOpts ev;
  auto* e = app.add_subcommand("eval", "NCIS of a checkpoint on logged data");
  e->add_option("--checkpoint", ev.checkpoint, "model checkpoint, or 'behavior'")->required();
  e->add_option("--data", ev.data, "test dataset (.jsonl)")->required();
  e->add_option("--proxy", ev.proxy, "behavior proxy: exact or a cvae_bc checkpoint");
  e->add_option("--config", ev.config, "JSON config file (eval section)");
  e->add_option("--n-estimators", ev.n_estimators);
  e->add_option("--clip-c", ev.clip_c);
  e->add_option("--proxy-std", ev.proxy_std);
  e->add_option("--latent-seed", ev.latent_seed);
  e->add_flag("--true-rollout", ev.true_rollout, "also roll the policy out in the simulator");
  e->add_option("--episodes", ev.episodes);
  e->add_option("--rollout-seed", ev.rollout_seed);
  e->add_option("--out", ev.out, "write the report JSON here too");

  RolloutOpts ro;
  auto* r = app.add_subcommand("rollout", "ground-truth simulator rollout of a policy");
  r->add_option("--policy", ro.policy, "'behavior' or a checkpoint");
  r->add_option("--data", ro.data, "dataset whose user population is rolled out")->required();
  r->add_option("--config", ro.config, "JSON config file (eval section)");
  r->add_option("--n-estimators", ro.n_estimators);
  r->add_option("--latent-seed", ro.latent_seed);
  r->add_option("--episodes", ro.episodes);
  r->add_option("--seed", ro.seed);

  PlotOpts pl;
  auto* p = app.add_subcommand("plot", "aggregate runs into plot-ready tables");
  p->add_option("runs", pl.runs, "run directories");
  p->add_option("--kind", pl.kind, "curves or nsweep");
  p->add_option("--out", pl.out, "output directory");
  p->add_option("--data", pl.data, "dataset for --kind nsweep");
  p->add_option("--proxy", pl.proxy, "behavior proxy for --kind nsweep");
  p->add_option("--n-values", pl.n_values, "estimator counts for --kind nsweep");
  p->add_option("--latent-seed", pl.latent_seed);
  p->add_option("--config", pl.config, "JSON config file (eval section)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    print_error("usage", ex.what());
    return 2;
  }

  try {
    if (*g) return cmd_gen_data(gen);
    if (*t) return cmd_train(tr, std::vector<std::string>(argv, argv + argc));
    if (*e) return cmd_eval(ev);
    if (*r) return cmd_rollout(ro);
    if (*p) return cmd_plot(pl);
  } catch (const CliError& ex) {
    print_error(ex.type, ex.what());
  } catch (const NumericError& ex) {
    print_error("numeric_error", ex.what());
  } catch (const CheckpointError& ex) {
    print_error("checkpoint_error", ex.what());
  } catch (const DatasetFormatError& ex) {
    print_error("dataset_error", ex.what());
  } catch (const std::exception& ex) {
    print_error("error", ex.what());
  }
  return 1;
}
