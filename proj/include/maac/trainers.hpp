#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "maac/checkpoint.hpp"
#include "maac/critic.hpp"
#include "maac/rollout.hpp"
#include "maac/taskfile.hpp"

namespace maac {

enum class Algorithm { MaReinforce, Magrpo, CollmDc, CollmCc };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::MaReinforce: return "MAREINFORCE";
    case Algorithm::Magrpo: return "MAGRPO";
    case Algorithm::CollmDc: return "COLLM_DC";
    case Algorithm::CollmCc: return "COLLM_CC";
  }
  return "?";
}

struct TrainConfig {
  Algorithm algorithm = Algorithm::CollmCc;
  EnvKind env = EnvKind::PairWrite;
  int turns = 1;            // H
  int generations = 1;      // K (tree methods)
  int epochs = 1;           // E
  double agent_lr = 5e-6;
  double critic_lr = 3e-6;
  double gamma = 1.0;
  double advantage_clip = 0.2;  // symmetric ratio clip half-width
  int minibatch = 4;
  int buffer = 4;
  int eval_samples = 4;
  std::uint64_t seed = 0;
  std::string out_dir = "runs";

  bool uses_tree() const { return algorithm == Algorithm::MaReinforce || algorithm == Algorithm::Magrpo; }
  bool uses_critic() const { return algorithm == Algorithm::CollmDc || algorithm == Algorithm::CollmCc; }

  void check() const {
    if (turns < 1) throw ConfigError("turns must be >= 1");
    if (generations < 1) throw ConfigError("generations must be >= 1");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (agent_lr <= 0.0 || critic_lr <= 0.0) throw ConfigError("learning rates must be positive");
    if (advantage_clip < 0.0) throw ConfigError("advantage_clip must be >= 0");
    if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must be in [0, 1]");
    if (minibatch < 1 || buffer < 1 || eval_samples < 1) throw ConfigError("minibatch, buffer, eval_samples must be >= 1");
    if (algorithm == Algorithm::Magrpo && generations < 2) throw ConfigError("MAGRPO needs generations >= 2 (a group needs peers)");
  }
};

struct UpdateReport {
  std::vector<double> grad_norms;  // per agent
  double mean_advantage = 0.0;
  double mean_ratio = 0.0;
  double critic_loss_before = 0.0;
  double critic_loss_after = 0.0;
  std::uint64_t tf_calls = 0;

  void check_finite() const {
    for (double g : grad_norms)
      if (!std::isfinite(g)) throw NumericFault("update report: non-finite gradient norm");
    if (!std::isfinite(mean_advantage) || !std::isfinite(mean_ratio))
      throw NumericFault("update report: non-finite statistics");
  }
};

// Group-relative baseline: A_k = G_k - mean(G). Sums to zero by construction.
inline std::vector<double> magrpo_advantages(const std::vector<double>& returns) {
  if (returns.size() < 2) throw ConfigError("magrpo_advantages: a group needs K >= 2 members");
  double mean = std::accumulate(returns.begin(), returns.end(), 0.0) / static_cast<double>(returns.size());
  std::vector<double> adv(returns.size());
  for (std::size_t k = 0; k < returns.size(); ++k) adv[k] = returns[k] - mean;
  return adv;
}

inline double clip_ratio(double rho, double eps) { return std::clamp(rho, 1.0 - eps, 1.0 + eps); }

namespace detail {

// Flattened tree sample: one sibling group per expanded history node.
struct TreeGroup {
  int depth = 0;
  // member index k -> per-agent (history, action, behavior logprob), shared G
  std::vector<JointHistory> histories;               // conditioning history per member (same for all members)
  std::vector<std::vector<ActionSeq>> actions;       // [k][agent]
  std::vector<std::vector<double>> behavior_lp;      // [k][agent]
  std::vector<double> returns;                       // [k]
};

inline void collect_groups(const std::vector<RolloutTreeNode>& siblings, std::vector<TreeGroup>& out) {
  if (siblings.empty()) return;
  TreeGroup g;
  g.depth = siblings.front().depth;
  for (const auto& node : siblings) {
    g.histories.push_back(node.joint_history);
    g.actions.push_back(node.joint_action);
    std::vector<double> lps;
    for (const auto& lp : node.behavior_logprobs) lps.push_back(lp.total);
    g.behavior_lp.push_back(lps);
    g.returns.push_back(node.G);
  }
  out.push_back(std::move(g));
  for (const auto& node : siblings)
    collect_groups(node.children, out);
}

}  // namespace detail

// One ascent step for MA-REINFORCE / MAGRPO over a backed-up rollout tree.
// Per group, per member k: clip(rho) * grad log pi(a_k | h) * (G_k - b).
// Groups at the same depth are averaged, then depths are summed, matching
// the per-turn expectation of the objective.
inline UpdateReport ma_reinforce_update(const std::vector<RolloutTreeNode>& roots,
                                        std::vector<PolicyParams>& policies, const TrainConfig& cfg) {
  cfg.check();
  const int n = static_cast<int>(policies.size());
  const bool group_baseline = cfg.algorithm == Algorithm::Magrpo;

  std::vector<detail::TreeGroup> groups;
  detail::collect_groups(roots, groups);
  if (groups.empty()) throw ConfigError("ma_reinforce_update: empty tree");

  std::vector<int> depth_count;
  for (const auto& g : groups) {
    if (static_cast<int>(depth_count.size()) <= g.depth) depth_count.resize(static_cast<std::size_t>(g.depth) + 1, 0);
    depth_count[static_cast<std::size_t>(g.depth)] += 1;
  }

  UpdateReport report;
  std::vector<Vec> grads;
  for (const auto& p : policies) grads.emplace_back(p.weights.size(), 0.0);

  double adv_sum = 0.0, ratio_sum = 0.0;
  std::uint64_t samples = 0;
  for (const auto& g : groups) {
    const double K = static_cast<double>(g.returns.size());
    const double depth_weight = 1.0 / static_cast<double>(depth_count[static_cast<std::size_t>(g.depth)]);
    std::vector<double> adv;
    if (group_baseline && g.returns.size() >= 2) {
      adv = magrpo_advantages(g.returns);
    } else {
      adv = g.returns;  // baseline b = 0
    }
    for (std::size_t k = 0; k < g.returns.size(); ++k) {
      for (int i = 0; i < n; ++i) {
        const LocalHistory& h = g.histories[k][static_cast<std::size_t>(i)];
        const ActionSeq& a = g.actions[k][static_cast<std::size_t>(i)];
        SeqLogProb lp_new = sequence_logprob(policies[static_cast<std::size_t>(i)], h, a);
        report.tf_calls += 1;
        double rho = std::exp(lp_new.total - g.behavior_lp[k][static_cast<std::size_t>(i)]);
        if (!std::isfinite(rho)) throw NumericFault("ma_reinforce_update: non-finite importance ratio");
        double rho_c = clip_ratio(rho, cfg.advantage_clip);
        Vec score = sequence_logprob_grad(policies[static_cast<std::size_t>(i)], h, a);
        axpy(depth_weight * rho_c * adv[k] / K, score, grads[static_cast<std::size_t>(i)]);
        ratio_sum += rho;
      }
      adv_sum += adv[k];
      ++samples;
    }
  }

  for (int i = 0; i < n; ++i) {
    double norm = l2_norm(grads[static_cast<std::size_t>(i)]);
    if (!std::isfinite(norm)) throw NumericFault("ma_reinforce_update: non-finite gradient for agent " + std::to_string(i));
    report.grad_norms.push_back(norm);
  }
  for (int i = 0; i < n; ++i) axpy(cfg.agent_lr, grads[static_cast<std::size_t>(i)], policies[static_cast<std::size_t>(i)].weights);

  report.mean_advantage = adv_sum / static_cast<double>(samples);
  report.mean_ratio = ratio_sum / static_cast<double>(samples * static_cast<std::uint64_t>(n));
  report.check_finite();
  return report;
}

namespace detail {

inline std::vector<std::size_t> sample_minibatch(std::size_t buffer_size, int minibatch, RngStream& rng) {
  std::vector<std::size_t> idx(buffer_size);
  std::iota(idx.begin(), idx.end(), 0u);
  // Fisher-Yates prefix shuffle.
  for (std::size_t i = 0; i + 1 < idx.size(); ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.next_u64() % (idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(std::min(idx.size(), static_cast<std::size_t>(minibatch)));
  return idx;
}

}  // namespace detail

// One CoLLM-DC epoch: each agent independently steps its critic on its own
// TD loss and its actor on Eq.-2-style advantages from that critic.
inline UpdateReport collm_dc_update(const ReplayBuffer& buffer, std::vector<PolicyParams>& policies,
                                    std::vector<CriticParams>& critics, const TrainConfig& cfg, RngStream& rng) {
  cfg.check();
  const int n = static_cast<int>(policies.size());
  if (static_cast<int>(critics.size()) != n) throw ConfigError("collm_dc_update: one critic per agent required");
  if (buffer.records.empty()) throw ConfigError("collm_dc_update: empty buffer");

  auto idx = detail::sample_minibatch(buffer.records.size(), cfg.minibatch, rng);
  UpdateReport report;
  double adv_sum = 0.0, ratio_sum = 0.0;
  std::uint64_t samples = 0;

  for (int i = 0; i < n; ++i) {
    std::vector<TDBatchRow> critic_batch;
    Vec actor_grad(policies[static_cast<std::size_t>(i)].weights.size(), 0.0);
    for (std::size_t b : idx) {
      const TransitionRecord& rec = buffer.records[b];
      const LocalHistory& h = rec.joint_history[static_cast<std::size_t>(i)];
      JointHistory next = next_history(rec);
      TDBatchRow row;
      row.features = dc_features(critics[static_cast<std::size_t>(i)], h, rec.global);
      row.next_features = dc_features(critics[static_cast<std::size_t>(i)], next[static_cast<std::size_t>(i)], rec.next_global);
      row.reward = rec.reward;
      row.terminal = rec.terminal;

      double v = dot(critics[static_cast<std::size_t>(i)].weights, row.features);
      double v_next = row.terminal ? 0.0 : dot(critics[static_cast<std::size_t>(i)].weights, row.next_features);
      double delta = td_error(TDSample{v, v_next, rec.reward, rec.terminal}, cfg.gamma);

      SeqLogProb lp_new = sequence_logprob(policies[static_cast<std::size_t>(i)], h, rec.joint_action[static_cast<std::size_t>(i)]);
      report.tf_calls += 1;
      double rho = std::exp(lp_new.total - rec.behavior_logprobs[static_cast<std::size_t>(i)].total);
      if (!std::isfinite(rho)) throw NumericFault("collm_dc_update: non-finite importance ratio");
      Vec score = sequence_logprob_grad(policies[static_cast<std::size_t>(i)], h, rec.joint_action[static_cast<std::size_t>(i)]);
      axpy(clip_ratio(rho, cfg.advantage_clip) * delta / static_cast<double>(idx.size()), score, actor_grad);

      adv_sum += delta;
      ratio_sum += rho;
      ++samples;
      critic_batch.push_back(std::move(row));
    }
    report.critic_loss_before += td_mse(critics[static_cast<std::size_t>(i)], critic_batch, cfg.gamma) / n;
    critics[static_cast<std::size_t>(i)] = critic_update(critics[static_cast<std::size_t>(i)], critic_batch, cfg.critic_lr, cfg.gamma);
    report.critic_loss_after += td_mse(critics[static_cast<std::size_t>(i)], critic_batch, cfg.gamma) / n;

    double norm = l2_norm(actor_grad);
    report.grad_norms.push_back(norm);
    axpy(cfg.agent_lr, actor_grad, policies[static_cast<std::size_t>(i)].weights);
  }

  report.mean_advantage = adv_sum / static_cast<double>(samples);
  report.mean_ratio = ratio_sum / static_cast<double>(samples);
  report.check_finite();
  return report;
}

// One CoLLM-CC epoch: a shared critic over the joint history supplies one
// TD advantage per transition, applied identically to every agent's score
// gradient. Critic gradients and actor gradients are computed from the
// pre-update critic; the critic's parameter step is applied first.
inline UpdateReport collm_cc_update(const ReplayBuffer& buffer, std::vector<PolicyParams>& policies,
                                    CriticParams& critic, const TrainConfig& cfg, RngStream& rng) {
  cfg.check();
  const int n = static_cast<int>(policies.size());
  if (critic.kind != CriticKind::Centralized) throw ConfigError("collm_cc_update: centralized critic required");
  if (buffer.records.empty()) throw ConfigError("collm_cc_update: empty buffer");

  auto idx = detail::sample_minibatch(buffer.records.size(), cfg.minibatch, rng);
  UpdateReport report;
  std::vector<TDBatchRow> critic_batch;
  std::vector<Vec> actor_grads;
  for (const auto& p : policies) actor_grads.emplace_back(p.weights.size(), 0.0);

  double adv_sum = 0.0, ratio_sum = 0.0;
  std::uint64_t samples = 0;
  for (std::size_t b : idx) {
    const TransitionRecord& rec = buffer.records[b];
    JointHistory next = next_history(rec);
    TDBatchRow row;
    row.features = cc_features(critic, rec.joint_history, rec.global);
    row.next_features = cc_features(critic, next, rec.next_global);
    row.reward = rec.reward;
    row.terminal = rec.terminal;

    double v = dot(critic.weights, row.features);
    double v_next = row.terminal ? 0.0 : dot(critic.weights, row.next_features);
    const double delta = td_error(TDSample{v, v_next, rec.reward, rec.terminal}, cfg.gamma);

    for (int i = 0; i < n; ++i) {
      const LocalHistory& h = rec.joint_history[static_cast<std::size_t>(i)];
      SeqLogProb lp_new = sequence_logprob(policies[static_cast<std::size_t>(i)], h, rec.joint_action[static_cast<std::size_t>(i)]);
      report.tf_calls += 1;
      double rho = std::exp(lp_new.total - rec.behavior_logprobs[static_cast<std::size_t>(i)].total);
      if (!std::isfinite(rho)) throw NumericFault("collm_cc_update: non-finite importance ratio");
      Vec score = sequence_logprob_grad(policies[static_cast<std::size_t>(i)], h, rec.joint_action[static_cast<std::size_t>(i)]);
      axpy(clip_ratio(rho, cfg.advantage_clip) * delta / static_cast<double>(idx.size()), score,
           actor_grads[static_cast<std::size_t>(i)]);
      ratio_sum += rho;
    }
    adv_sum += delta;
    ++samples;
    critic_batch.push_back(std::move(row));
  }

  report.critic_loss_before = td_mse(critic, critic_batch, cfg.gamma);
  critic = critic_update(critic, critic_batch, cfg.critic_lr, cfg.gamma);
  report.critic_loss_after = td_mse(critic, critic_batch, cfg.gamma);

  for (int i = 0; i < n; ++i) {
    report.grad_norms.push_back(l2_norm(actor_grads[static_cast<std::size_t>(i)]));
    axpy(cfg.agent_lr, actor_grads[static_cast<std::size_t>(i)], policies[static_cast<std::size_t>(i)].weights);
  }

  report.mean_advantage = adv_sum / static_cast<double>(samples);
  report.mean_ratio = ratio_sum / static_cast<double>(samples * static_cast<std::uint64_t>(n));
  report.check_finite();
  return report;
}

struct EpisodeMetrics {
  std::uint64_t episode = 0;
  std::uint64_t cumulative_calls = 0;
  std::uint64_t cumulative_transitions = 0;
  double train_return = 0.0;
  double eval_return = 0.0;
  double critic_loss = 0.0;
  std::vector<double> grad_norms;
  double mean_ratio = 1.0;
};

struct CostTable {
  std::uint64_t epochs = 0;
  std::uint64_t rollouts_per_episode = 0;
  std::uint64_t samples = 0;
  std::uint64_t updates = 0;
};

// Evaluation: mean return of eval_samples sampled episodes on held-out
// seeds, policies frozen.
inline double evaluate_policies(const TaskInstance& task, const std::vector<PolicyParams>& policies,
                                int eval_samples, std::uint64_t seed) {
  double total = 0.0;
  for (int s = 0; s < eval_samples; ++s) {
    auto env = make_env(task);
    RngStream rng(RngStream::mix(seed ^ 0xe7a1ull) + static_cast<std::uint64_t>(s));
    EpisodeResult ep = rollout_episode(*env, policies, seed + static_cast<std::uint64_t>(s) * 7919ull, rng);
    total += ep.episode_return;
  }
  return total / static_cast<double>(eval_samples);
}

// Outer training loop: per episode, rollout (single path for DC/CC, K-tree
// for REINFORCE/MAGRPO), E update epochs, metric emission. Deterministic
// given cfg.seed.
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, std::vector<TaskInstance> taskset, std::vector<TaskInstance> eval_taskset = {})
      : cfg_(cfg), taskset_(std::move(taskset)), eval_taskset_(std::move(eval_taskset)) {
    cfg_.check();
    if (taskset_.empty()) throw ConfigError("trainer: empty taskset");
    if (eval_taskset_.empty()) eval_taskset_ = taskset_;
    init_params();
  }

  Trainer(const TrainConfig& cfg, std::vector<TaskInstance> taskset, TrainingState resume_from)
      : cfg_(cfg), taskset_(std::move(taskset)), eval_taskset_(taskset_) {
    cfg_.check();
    if (taskset_.empty()) throw ConfigError("trainer: empty taskset");
    state_ = std::move(resume_from);
  }

  const TrainingState& state() const { return state_; }
  TrainingState& state() { return state_; }
  const CostTable& costs() const { return costs_; }

  using MetricSink = std::function<void(const EpisodeMetrics&)>;

  void run(std::uint64_t episodes, const MetricSink& sink) {
    while (state_.next_episode < episodes) run_episode(sink);
  }

  void run_episode(const MetricSink& sink) {
    const std::uint64_t ep = state_.next_episode;
    const TaskInstance& task = taskset_[static_cast<std::size_t>(ep % taskset_.size())];
    auto env = make_env(task);
    RngStream rng(RngStream::mix(cfg_.seed * 0x9e37ull + ep));
    std::uint64_t env_seed = cfg_.seed ^ RngStream::mix(ep * 2 + 1);

    EpisodeMetrics m;
    m.episode = ep;
    UpdateReport last_report;
    last_report.grad_norms.assign(state_.policies.size(), 0.0);

    if (cfg_.uses_tree()) {
      TreeResult tree = expand_tree(*env, state_.policies, cfg_.generations, env_seed, rng);
      backup_returns(tree.roots, cfg_.gamma);
      state_.cumulative_calls += tree.calls.generation_calls;
      state_.cumulative_transitions += tree.calls.generation_calls / static_cast<std::uint64_t>(env->n_agents());
      costs_.rollouts_per_episode = nominal_rollouts();
      costs_.samples += tree.calls.generation_calls / static_cast<std::uint64_t>(env->n_agents());
      double root_mean = 0.0;
      for (const auto& r : tree.roots) root_mean += r.G;
      m.train_return = root_mean / static_cast<double>(tree.roots.size());
      for (int e = 0; e < cfg_.epochs; ++e) {
        last_report = ma_reinforce_update(tree.roots, state_.policies, cfg_);
        costs_.updates += 1;
      }
    } else {
      EpisodeResult rollout = rollout_episode(*env, state_.policies, env_seed, rng);
      state_.cumulative_calls += rollout.calls.generation_calls;
      state_.cumulative_transitions += rollout.buffer.size();
      costs_.rollouts_per_episode = nominal_rollouts();
      costs_.samples += rollout.buffer.size();
      m.train_return = rollout.episode_return;
      for (int e = 0; e < cfg_.epochs; ++e) {
        RngStream update_rng = rng.child(0xe000 + static_cast<std::uint64_t>(e));
        if (cfg_.algorithm == Algorithm::CollmDc) {
          last_report = collm_dc_update(rollout.buffer, state_.policies, state_.critics, cfg_, update_rng);
        } else {
          last_report = collm_cc_update(rollout.buffer, state_.policies, state_.critics.front(), cfg_, update_rng);
        }
        costs_.updates += 1;
      }
    }
    costs_.epochs = static_cast<std::uint64_t>(cfg_.epochs);

    const TaskInstance& eval_task = eval_taskset_[static_cast<std::size_t>(ep % eval_taskset_.size())];
    m.cumulative_calls = state_.cumulative_calls;
    m.cumulative_transitions = state_.cumulative_transitions;
    m.eval_return = evaluate_policies(eval_task, state_.policies, cfg_.eval_samples,
                                      cfg_.seed ^ RngStream::mix(0x5eedull + ep));
    m.critic_loss = last_report.critic_loss_after;
    m.grad_norms = last_report.grad_norms;
    m.mean_ratio = cfg_.epochs > 0 ? last_report.mean_ratio : 1.0;

    state_.next_episode = ep + 1;
    if (sink) sink(m);
  }

 private:
  void init_params() {
    const TaskInstance& task = taskset_.front();
    auto env = make_env(task);
    const int n = env->n_agents();
    FeatureEncoder actor_enc;
    actor_enc.dim = 128;
    actor_enc.window = 16;
    actor_enc.max_turn = std::max(cfg_.turns, 1);
    double temp = cfg_.env == EnvKind::PairWrite ? 0.7 : 0.6;
    for (int i = 0; i < n; ++i) {
      FeatureEncoder enc = actor_enc;
      enc.hash_seed = RngStream::mix(cfg_.seed + 0x11ull * static_cast<std::uint64_t>(i));
      state_.policies.push_back(PolicyParams::zeros(env->vocab(i), enc, temp));
    }
    if (cfg_.uses_critic()) {
      FeatureEncoder critic_enc = actor_enc;
      if (cfg_.algorithm == Algorithm::CollmCc) {
        critic_enc.hash_seed = RngStream::mix(cfg_.seed + 0xccull);
        state_.critics.push_back(CriticParams::centralized(n, critic_enc, cfg_.turns));
      } else {
        for (int i = 0; i < n; ++i) {
          FeatureEncoder enc = critic_enc;
          enc.hash_seed = RngStream::mix(cfg_.seed + 0xdc00ull + static_cast<std::uint64_t>(i));
          state_.critics.push_back(CriticParams::decentralized(i, enc, cfg_.turns));
        }
      }
    }
  }

  // Appendix-D-style nominal per-episode rollout count, assuming no early
  // termination: K^H leaf paths for tree methods, one H-sample path otherwise.
  std::uint64_t nominal_rollouts() const {
    if (!cfg_.uses_tree()) return static_cast<std::uint64_t>(cfg_.turns);
    std::uint64_t leaves = 1;
    for (int t = 0; t < cfg_.turns; ++t) leaves *= static_cast<std::uint64_t>(cfg_.generations);
    return leaves;
  }

  static std::uint64_t leaf_count(const std::vector<RolloutTreeNode>& roots) {
    std::uint64_t leaves = 0;
    auto rec = [&](auto&& self, const RolloutTreeNode& node) -> void {
      if (node.children.empty()) {
        ++leaves;
        return;
      }
      for (const auto& c : node.children) self(self, c);
    };
    for (const auto& r : roots) rec(rec, r);
    return leaves;
  }

  TrainConfig cfg_;
  std::vector<TaskInstance> taskset_;
  std::vector<TaskInstance> eval_taskset_;
  TrainingState state_;
  CostTable costs_;
};

}  // namespace maac
