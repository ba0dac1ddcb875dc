#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "maac/checkpoint.hpp"
#include "maac/config.hpp"
#include "maac/metrics.hpp"
#include "maac/trainers.hpp"

namespace maac {

inline constexpr const char* kCodeVersion = "maac-1.0";
inline constexpr const char* kMetricsHeader =
    "episode,calls,transitions,train_return,eval_return,critic_loss,grad_norm_a0,grad_norm_a1,mean_ratio";

// One metrics row. Wall time is logged to a sidecar file so the metrics CSV
// stays byte-identical across reruns of the same config+seed.
struct MetricPoint {
  EpisodeMetrics episode;
  double wall_time_s = 0.0;
};

namespace detail {

inline std::string format_real(double x) {
  std::ostringstream ss;
  ss << std::setprecision(17) << x;
  return ss.str();
}

}  // namespace detail

inline std::string metric_csv_row(const EpisodeMetrics& m) {
  std::ostringstream row;
  row << m.episode << ',' << m.cumulative_calls << ',' << m.cumulative_transitions << ','
      << detail::format_real(m.train_return) << ',' << detail::format_real(m.eval_return) << ','
      << detail::format_real(m.critic_loss);
  for (int i = 0; i < 2; ++i)
    row << ',' << detail::format_real(i < static_cast<int>(m.grad_norms.size()) ? m.grad_norms[static_cast<std::size_t>(i)] : 0.0);
  row << ',' << detail::format_real(m.mean_ratio);
  return row.str();
}

// Line-delimited structured trajectory record for offline inspection.
inline nlohmann::json transition_to_json(const TransitionRecord& rec) {
  nlohmann::json j;
  j["schema"] = 1;
  j["reward"] = rec.reward;
  j["terminal"] = rec.terminal;
  j["global"] = {{"turn", rec.global.turn}, {"progress", rec.global.progress}, {"last_reward_norm", rec.global.last_reward_norm}};
  for (std::size_t i = 0; i < rec.joint_action.size(); ++i) {
    nlohmann::json agent;
    agent["action"] = rec.joint_action[i].tokens;
    agent["behavior_logprob"] = rec.behavior_logprobs[i].total;
    agent["next_obs"] = rec.next_obs[i];
    nlohmann::json history = nlohmann::json::array();
    for (const auto& entry : rec.joint_history[i].entries) history.push_back(entry);
    agent["history"] = history;
    j["agents"].push_back(agent);
  }
  return j;
}

inline void dump_trajectory(const ReplayBuffer& buffer, std::ostream& out) {
  for (const auto& rec : buffer.records) out << transition_to_json(rec).dump() << "\n";
}

struct RunManifest {
  std::string config_echo;
  std::uint64_t seed = 0;
  std::string code_version = kCodeVersion;
  std::string started_at;
  std::vector<std::string> output_paths;
};

namespace detail {

inline std::string timestamp_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

}  // namespace detail

inline void write_manifest(const RunManifest& manifest, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write manifest '" + path + "'");
  out << "code_version=" << manifest.code_version << "\n";
  out << "seed=" << manifest.seed << "\n";
  out << "started_at=" << manifest.started_at << "\n";
  for (const auto& p : manifest.output_paths) out << "output=" << p << "\n";
  out << "# config echo\n" << manifest.config_echo;
}

inline std::string config_echo(const TrainConfig& cfg) {
  std::ostringstream ss;
  ss << "algorithm=" << (cfg.algorithm == Algorithm::MaReinforce ? "mareinforce"
                         : cfg.algorithm == Algorithm::Magrpo    ? "magrpo"
                         : cfg.algorithm == Algorithm::CollmDc   ? "collm_dc"
                                                                 : "collm_cc")
     << "\n";
  ss << "env=" << (cfg.env == EnvKind::PairWrite ? "pairwrite" : cfg.env == EnvKind::CoopCode ? "coopcode" : "gridbuild") << "\n";
  ss << "turns=" << cfg.turns << "\n";
  ss << "generations=" << cfg.generations << "\n";
  ss << "epochs=" << cfg.epochs << "\n";
  ss << "agent_lr=" << detail::format_real(cfg.agent_lr) << "\n";
  ss << "critic_lr=" << detail::format_real(cfg.critic_lr) << "\n";
  ss << "gamma=" << detail::format_real(cfg.gamma) << "\n";
  ss << "advantage_clip=" << detail::format_real(cfg.advantage_clip) << "\n";
  ss << "minibatch=" << cfg.minibatch << "\n";
  ss << "buffer=" << cfg.buffer << "\n";
  ss << "eval_samples=" << cfg.eval_samples << "\n";
  ss << "seed=" << cfg.seed << "\n";
  ss << "out_dir=" << cfg.out_dir << "\n";
  return ss.str();
}

struct RunOptions {
  std::uint64_t episodes = 64;
  std::string output_root = ".";        // overridden by $MAAC_OUT when set
  std::uint64_t checkpoint_every = 16;  // plus one final checkpoint
  std::string resume_from;              // checkpoint path; empty for fresh run
};

struct RunResult {
  std::filesystem::path run_dir;
  std::filesystem::path metrics_path;
  std::filesystem::path checkpoint_path;
  CostTable costs;
  double final_eval_return = 0.0;
};

// Full training run: manifest first, then per-episode metric rows flushed as
// they arrive (partial metrics survive a fault), periodic checkpoints, and a
// final cost table mirroring the {epochs, rollouts, samples, updates} schema.
inline RunResult run_training(const TrainConfig& cfg, const RunOptions& opts) {
  namespace fs = std::filesystem;
  fs::path run_dir = fs::path(opts.output_root) / cfg.out_dir;
  fs::create_directories(run_dir);

  RunResult result;
  result.run_dir = run_dir;
  result.metrics_path = run_dir / "metrics.csv";
  result.checkpoint_path = run_dir / "checkpoint.ckpt";
  fs::path costs_path = run_dir / "costs.csv";
  fs::path timing_path = run_dir / "timing.txt";

  RunManifest manifest;
  manifest.config_echo = config_echo(cfg);
  manifest.seed = cfg.seed;
  manifest.started_at = detail::timestamp_now();
  manifest.output_paths = {result.metrics_path.string(), result.checkpoint_path.string(), costs_path.string()};
  write_manifest(manifest, (run_dir / "manifest.txt").string());

  std::vector<TaskInstance> taskset = {make_default_task(cfg.env, cfg.turns)};
  std::unique_ptr<Trainer> trainer;
  bool resuming = !opts.resume_from.empty();
  if (resuming) {
    TrainingState state = load_checkpoint(opts.resume_from);
    auto probe = make_env(taskset.front());
    for (int i = 0; i < probe->n_agents(); ++i)
      if (state.policies.at(static_cast<std::size_t>(i)).vocab.size != probe->vocab(i).size)
        throw ValidationError("checkpoint vocab size does not match the configured environment");
    trainer = std::make_unique<Trainer>(cfg, taskset, std::move(state));
  } else {
    trainer = std::make_unique<Trainer>(cfg, taskset);
  }

  std::ofstream metrics(result.metrics_path, resuming ? std::ios::app : std::ios::trunc);
  std::ofstream timing(timing_path, resuming ? std::ios::app : std::ios::trunc);
  if (!metrics) throw ConfigError("cannot write metrics file '" + result.metrics_path.string() + "'");
  if (!resuming) metrics << kMetricsHeader << "\n";

  auto t0 = std::chrono::steady_clock::now();
  double last_eval = 0.0;
  auto sink = [&](const EpisodeMetrics& m) {
    metrics << metric_csv_row(m) << "\n";
    metrics.flush();
    double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    timing << m.episode << " " << detail::format_real(elapsed) << "\n";
    last_eval = m.eval_return;
    std::uint64_t done = m.episode + 1;
    if (opts.checkpoint_every > 0 && done % opts.checkpoint_every == 0 && done < opts.episodes)
      save_checkpoint(trainer->state(), result.checkpoint_path.string());
  };
  trainer->run(opts.episodes, sink);
  save_checkpoint(trainer->state(), result.checkpoint_path.string());

  result.costs = trainer->costs();
  std::ofstream costs(costs_path);
  costs << "epochs,rollouts,samples,updates\n"
        << result.costs.epochs << ',' << result.costs.rollouts_per_episode << ',' << result.costs.samples << ','
        << result.costs.updates << "\n";
  result.final_eval_return = last_eval;
  return result;
}

// Cost preview without training: one probe episode determines the per-episode
// rollout count; the table extrapolates the configured epoch count.
inline CostTable preview_costs(const TrainConfig& cfg) {
  std::vector<TaskInstance> taskset = {make_default_task(cfg.env, cfg.turns)};
  TrainConfig probe_cfg = cfg;
  probe_cfg.epochs = 0;  // no parameter updates; rollout shape only
  Trainer trainer(probe_cfg, taskset);
  trainer.run_episode(nullptr);
  CostTable costs = trainer.costs();
  costs.epochs = static_cast<std::uint64_t>(cfg.epochs);
  costs.updates = static_cast<std::uint64_t>(cfg.epochs);
  return costs;
}

}  // namespace maac
