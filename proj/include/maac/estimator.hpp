#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "maac/enumerate.hpp"
#include "maac/rollout.hpp"

namespace maac {

// ---------------------------------------------------------------------------
// Micro-environments for exact verification.

// Tabular two-agent environment: single-token actions, reward from a
// caller-supplied table, no early termination. Each agent observes the other
// agent's previous action, so local histories stay informative.
class MicroEnv final : public Env {
 public:
  using RewardFn = std::function<double(int turn, int a0, int a1)>;

  MicroEnv(int vocab_size, int horizon, RewardFn reward)
      : vocab_size_(vocab_size), horizon_(horizon), reward_(std::move(reward)) {
    if (vocab_size_ < 2) throw ConfigError("micro env: vocab size must be >= 2");
  }

  int n_agents() const override { return 2; }
  int horizon() const override { return horizon_; }
  Vocab vocab(int) const override { return Vocab{vocab_size_, -1, -1}; }
  int max_action_len(int) const override { return 1; }
  double reward_cap() const override { return 1.0; }

  std::vector<TokenSeq> reset(std::uint64_t seed) override {
    begin_episode();
    (void)seed;
    return {{0}, {0}};
  }

  StepOutcome step(const std::vector<ActionSeq>& joint_action, RngStream&) override {
    pre_step(joint_action);
    int a0 = joint_action[0].tokens[0];
    int a1 = joint_action[1].tokens[0];
    StepOutcome out;
    out.reward = reward_(turn(), a0, a1);
    out.terminated = false;
    out.next_obs = {{a1}, {a0}};
    post_step(out, 0.0);
    return out;
  }

  std::unique_ptr<Env> clone() const override { return std::make_unique<MicroEnv>(*this); }

 private:
  int vocab_size_;
  int horizon_;
  RewardFn reward_;
};

// Exogenous-noise environment: rewards are i.i.d. standard-normal draws at
// the final turn, taken from the step's rng stream and independent of all
// actions. The shared-noise variant adds one per-episode draw to every
// leaf, violating the independence assumption on purpose.
class NoiseEnv final : public Env {
 public:
  NoiseEnv(int horizon, bool shared_noise = false) : horizon_(horizon), shared_noise_(shared_noise) {}

  int n_agents() const override { return 2; }
  int horizon() const override { return horizon_; }
  Vocab vocab(int) const override { return Vocab{2, -1, -1}; }
  int max_action_len(int) const override { return 1; }
  double reward_cap() const override { return 1.0; }

  std::vector<TokenSeq> reset(std::uint64_t seed) override {
    begin_episode();
    // The shared component is amplified so its variance clearly dominates
    // the averaged idiosyncratic part in the control runs.
    shared_draw_ = shared_noise_ ? 2.0 * RngStream(seed ^ 0x5a5aull).next_normal() : 0.0;
    return {{0}, {0}};
  }

  StepOutcome step(const std::vector<ActionSeq>& joint_action, RngStream& rng) override {
    pre_step(joint_action);
    StepOutcome out;
    out.reward = turn() + 1 == horizon_ ? shared_draw_ + rng.next_normal() : 0.0;
    out.terminated = false;
    out.next_obs = {{0}, {0}};
    post_step(out, 0.0);
    return out;
  }

  std::unique_ptr<Env> clone() const override { return std::make_unique<NoiseEnv>(*this); }

 private:
  int horizon_;
  bool shared_noise_;
  double shared_draw_ = 0.0;
};

// Zero-reward environment with a configurable agent count, used for call
// accounting sweeps over n.
class CountEnv final : public Env {
 public:
  CountEnv(int n_agents, int horizon) : n_(n_agents), horizon_(horizon) {
    if (n_ < 1) throw ConfigError("count env: n_agents must be >= 1");
  }

  int n_agents() const override { return n_; }
  int horizon() const override { return horizon_; }
  Vocab vocab(int) const override { return Vocab{2, -1, -1}; }
  int max_action_len(int) const override { return 1; }
  double reward_cap() const override { return 1.0; }

  std::vector<TokenSeq> reset(std::uint64_t seed) override {
    begin_episode();
    (void)seed;
    return std::vector<TokenSeq>(static_cast<std::size_t>(n_), TokenSeq{0});
  }

  StepOutcome step(const std::vector<ActionSeq>& joint_action, RngStream&) override {
    pre_step(joint_action);
    StepOutcome out;
    out.next_obs = std::vector<TokenSeq>(static_cast<std::size_t>(n_), TokenSeq{0});
    post_step(out, 0.0);
    return out;
  }

  std::unique_ptr<Env> clone() const override { return std::make_unique<CountEnv>(*this); }

 private:
  int n_;
  int horizon_;
};

// ---------------------------------------------------------------------------
// Enumeration oracles.

namespace detail {

inline JointHistory initial_histories(const std::vector<std::vector<TokenSeq>>& observations, int n) {
  JointHistory h(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) h[static_cast<std::size_t>(i)].entries.push_back(observations[0][static_cast<std::size_t>(i)]);
  return h;
}

inline std::string history_key(const LocalHistory& h) {
  std::string key;
  for (const auto& e : h.entries) {
    for (Token t : e) key += std::to_string(t) + ",";
    key += "|";
  }
  return key;
}

inline std::string joint_key(const JointHistory& jh) {
  std::string key;
  for (const auto& h : jh) key += history_key(h) + "//";
  return key;
}

}  // namespace detail

struct ExactGradient {
  std::vector<Vec> total;                  // per agent
  std::vector<std::vector<Vec>> per_turn;  // [turn][agent]
  double expected_return = 0.0;            // J(theta), for finite differences
};

// Exact policy gradient by exhaustive trajectory enumeration:
// sum over trajectories of p(tau) * sum_t grad log pi_i(a_{i,t} | h_{i,t})
// * G_t(tau), with G_t the realized discounted return from t.
inline ExactGradient exact_policy_gradient(const Env& env_template, const std::vector<PolicyParams>& policies,
                                           double gamma, std::uint64_t seed = 0, const EnumerationCaps& caps = {}) {
  const int n = env_template.n_agents();
  const int horizon = env_template.horizon();
  if (static_cast<int>(policies.size()) != n) throw ConfigError("exact gradient: one policy per agent required");
  auto trajectories = enumerate_trajectories(env_template, seed, caps);

  ExactGradient out;
  for (int i = 0; i < n; ++i) out.total.emplace_back(policies[static_cast<std::size_t>(i)].weights.size(), 0.0);
  out.per_turn.resize(static_cast<std::size_t>(horizon));
  for (auto& turn_block : out.per_turn)
    for (int i = 0; i < n; ++i) turn_block.emplace_back(policies[static_cast<std::size_t>(i)].weights.size(), 0.0);

  for (const auto& traj : trajectories) {
    const int T = static_cast<int>(traj.actions.size());
    // Trajectory probability and per-(agent, turn) score gradients.
    double logp = 0.0;
    JointHistory histories = detail::initial_histories(traj.observations, n);
    std::vector<std::vector<Vec>> scores(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
      for (int i = 0; i < n; ++i) {
        const auto& h = histories[static_cast<std::size_t>(i)];
        const auto& a = traj.actions[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
        logp += sequence_logprob(policies[static_cast<std::size_t>(i)], h, a).total;
        scores[static_cast<std::size_t>(t)].push_back(sequence_logprob_grad(policies[static_cast<std::size_t>(i)], h, a));
      }
      if (t + 1 < T)
        for (int i = 0; i < n; ++i)
          histories[static_cast<std::size_t>(i)].push_turn(traj.actions[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)].tokens,
                                                           traj.observations[static_cast<std::size_t>(t) + 1][static_cast<std::size_t>(i)]);
    }
    const double p = std::exp(logp);

    std::vector<double> g_from(static_cast<std::size_t>(T));
    double acc = 0.0;
    for (int t = T - 1; t >= 0; --t) {
      acc = traj.rewards[static_cast<std::size_t>(t)] + gamma * acc;
      g_from[static_cast<std::size_t>(t)] = acc;
    }
    out.expected_return += p * (T > 0 ? g_from[0] : 0.0);

    for (int t = 0; t < T; ++t)
      for (int i = 0; i < n; ++i) {
        axpy(p * g_from[static_cast<std::size_t>(t)], scores[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)],
             out.per_turn[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)]);
        axpy(p * g_from[static_cast<std::size_t>(t)], scores[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)],
             out.total[static_cast<std::size_t>(i)]);
      }
  }
  return out;
}

// Backward-induction value tables under a fixed joint policy. joint maps a
// serialized joint history to V(h_t); local[i] maps agent i's serialized
// local history to the policy-induced conditional expectation E[V | h_i].
struct DPValues {
  std::map<std::string, double> joint;
  std::vector<std::map<std::string, double>> local;
};

inline DPValues dp_values(const Env& env_template, const std::vector<PolicyParams>& policies, double gamma,
                          std::uint64_t seed = 0, const EnumerationCaps& caps = {}) {
  const int n = env_template.n_agents();
  auto trajectories = enumerate_trajectories(env_template, seed, caps);

  // For each visited (joint history, local history) at each turn, accumulate
  // p(tau) and p(tau) * G_t(tau); the conditional expectation is the ratio.
  std::map<std::string, std::pair<double, double>> joint_acc;
  std::vector<std::map<std::string, std::pair<double, double>>> local_acc(static_cast<std::size_t>(n));

  for (const auto& traj : trajectories) {
    const int T = static_cast<int>(traj.actions.size());
    double logp = 0.0;
    JointHistory histories = detail::initial_histories(traj.observations, n);
    std::vector<JointHistory> history_at(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
      history_at[static_cast<std::size_t>(t)] = histories;
      for (int i = 0; i < n; ++i)
        logp += sequence_logprob(policies[static_cast<std::size_t>(i)], histories[static_cast<std::size_t>(i)],
                                 traj.actions[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)]).total;
      if (t + 1 < T)
        for (int i = 0; i < n; ++i)
          histories[static_cast<std::size_t>(i)].push_turn(traj.actions[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)].tokens,
                                                           traj.observations[static_cast<std::size_t>(t) + 1][static_cast<std::size_t>(i)]);
    }
    const double p = std::exp(logp);

    double acc = 0.0;
    std::vector<double> g_from(static_cast<std::size_t>(T));
    for (int t = T - 1; t >= 0; --t) {
      acc = traj.rewards[static_cast<std::size_t>(t)] + gamma * acc;
      g_from[static_cast<std::size_t>(t)] = acc;
    }

    for (int t = 0; t < T; ++t) {
      auto& j = joint_acc[detail::joint_key(history_at[static_cast<std::size_t>(t)])];
      j.first += p;
      j.second += p * g_from[static_cast<std::size_t>(t)];
      for (int i = 0; i < n; ++i) {
        auto& l = local_acc[static_cast<std::size_t>(i)][detail::history_key(history_at[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)])];
        l.first += p;
        l.second += p * g_from[static_cast<std::size_t>(t)];
      }
    }
  }

  DPValues out;
  out.local.resize(static_cast<std::size_t>(n));
  for (const auto& [key, acc] : joint_acc) out.joint[key] = acc.second / acc.first;
  for (int i = 0; i < n; ++i)
    for (const auto& [key, acc] : local_acc[static_cast<std::size_t>(i)])
      out.local[static_cast<std::size_t>(i)][key] = acc.second / acc.first;
  return out;
}

// ---------------------------------------------------------------------------
// Statistical verification harnesses.

struct UnbiasednessReport {
  int components = 0;
  int components_in_ci = 0;
  double pass_fraction = 0.0;
  bool passed = false;
};

// Root-level estimator mean vs the enumeration oracle. Draws `replicates`
// independent K-trees, forms the mean of g-bar_{i,0} per component, and
// checks that the exact value lies inside the 99% normal CI for at least
// 95% of components. inject_return_bias deliberately corrupts the returns
// (sign-correlated with the sampled token) to validate test power.
inline UnbiasednessReport unbiasedness_test(const Env& env_template, const std::vector<PolicyParams>& policies,
                                            int K, int replicates, std::uint64_t seed,
                                            double inject_return_bias = 0.0) {
  const int n = env_template.n_agents();
  ExactGradient exact = exact_policy_gradient(env_template, policies, 1.0, seed);

  std::vector<Vec> mean, m2;  // Welford accumulators per agent
  for (int i = 0; i < n; ++i) {
    mean.emplace_back(policies[static_cast<std::size_t>(i)].weights.size(), 0.0);
    m2.emplace_back(policies[static_cast<std::size_t>(i)].weights.size(), 0.0);
  }

  for (int r = 0; r < replicates; ++r) {
    auto env = env_template.clone();
    RngStream rng(RngStream::mix(seed + 0x77ull) + static_cast<std::uint64_t>(r));
    TreeResult tree = expand_tree(*env, policies, K, seed, rng);
    backup_returns(tree.roots, 1.0);

    std::vector<Vec> est;
    for (int i = 0; i < n; ++i) est.emplace_back(policies[static_cast<std::size_t>(i)].weights.size(), 0.0);
    for (const auto& root : tree.roots) {
      for (int i = 0; i < n; ++i) {
        double g = root.G;
        if (inject_return_bias != 0.0)
          g += inject_return_bias * (root.joint_action[static_cast<std::size_t>(i)].tokens[0] == 1 ? 1.0 : -1.0);
        Vec score = sequence_logprob_grad(policies[static_cast<std::size_t>(i)],
                                          root.joint_history[static_cast<std::size_t>(i)],
                                          root.joint_action[static_cast<std::size_t>(i)]);
        axpy(g / static_cast<double>(tree.roots.size()), score, est[static_cast<std::size_t>(i)]);
      }
    }
    const double inv = 1.0 / static_cast<double>(r + 1);
    for (int i = 0; i < n; ++i)
      for (std::size_t j = 0; j < est[static_cast<std::size_t>(i)].size(); ++j) {
        double x = est[static_cast<std::size_t>(i)][j];
        double d = x - mean[static_cast<std::size_t>(i)][j];
        mean[static_cast<std::size_t>(i)][j] += d * inv;
        m2[static_cast<std::size_t>(i)][j] += d * (x - mean[static_cast<std::size_t>(i)][j]);
      }
  }

  const double z99 = 2.5758293035489;
  UnbiasednessReport report;
  for (int i = 0; i < n; ++i)
    for (std::size_t j = 0; j < mean[static_cast<std::size_t>(i)].size(); ++j) {
      double se = std::sqrt(m2[static_cast<std::size_t>(i)][j] / (static_cast<double>(replicates) - 1.0) /
                            static_cast<double>(replicates));
      double lo = mean[static_cast<std::size_t>(i)][j] - z99 * se;
      double hi = mean[static_cast<std::size_t>(i)][j] + z99 * se;
      double target = exact.per_turn[0][static_cast<std::size_t>(i)][j];
      // Components the estimator cannot touch (never-active features) match
      // exactly and count as covered.
      bool in = (se == 0.0) ? std::abs(target - mean[static_cast<std::size_t>(i)][j]) < 1e-12
                            : (target >= lo && target <= hi);
      report.components += 1;
      report.components_in_ci += in ? 1 : 0;
    }
  report.pass_fraction = static_cast<double>(report.components_in_ci) / report.components;
  report.passed = report.pass_fraction >= 0.95;
  return report;
}

struct VarianceCell {
  int K = 0;
  int depth_to_go = 0;  // H - t at the measured root (t = 0)
  double variance = 0.0;
  double ratio_to_k1 = 0.0;
  double predicted_ratio = 0.0;
  bool within_tolerance = false;
};

struct VarianceReport {
  std::vector<VarianceCell> cells;
  int replicates = 0;
  bool passed = false;
};

// Measures Var of a fixed scalar projection of g-bar_{i,0} on the noise
// environment across K, comparing Var(K)/Var(1) with 1/K^(H-t).
inline VarianceReport variance_scaling_test(const std::vector<int>& k_values, const std::vector<int>& horizons,
                                            int replicates, std::uint64_t seed, bool shared_noise = false,
                                            double tolerance = 0.2) {
  if (replicates < 2) throw ConfigError("variance test: need at least 2 replicates");
  VarianceReport report;
  report.replicates = replicates;
  report.passed = true;

  for (int horizon : horizons) {
    NoiseEnv env_template(horizon, shared_noise);
    FeatureEncoder enc;
    enc.dim = 16;
    enc.window = 8;
    enc.max_turn = horizon;
    enc.hash_seed = 42;
    std::vector<PolicyParams> policies(2, PolicyParams::zeros(env_template.vocab(0), enc, 1.0));

    // Fixed random unit projection, seeded.
    RngStream proj_rng(seed ^ 0x9999ull);
    Vec u(policies[0].weights.size());
    for (auto& x : u) x = proj_rng.next_normal();
    double norm = l2_norm(u);
    for (auto& x : u) x /= norm;

    std::map<int, double> var_by_k;
    for (int K : k_values) {
      double mean = 0.0, m2 = 0.0;
      for (int r = 0; r < replicates; ++r) {
        auto env = env_template.clone();
        std::uint64_t rep_seed = RngStream::mix(seed + static_cast<std::uint64_t>(horizon) * 1000003ull +
                                                static_cast<std::uint64_t>(K) * 7919ull) +
                                 static_cast<std::uint64_t>(r);
        RngStream rng(rep_seed);
        TreeResult tree = expand_tree(*env, policies, K, rep_seed, rng);
        backup_returns(tree.roots, 1.0);
        Vec est(policies[0].weights.size(), 0.0);
        for (const auto& root : tree.roots) {
          Vec score = sequence_logprob_grad(policies[0], root.joint_history[0], root.joint_action[0]);
          axpy(root.G / static_cast<double>(tree.roots.size()), score, est);
        }
        double s = dot(u, est);
        double d = s - mean;
        mean += d / static_cast<double>(r + 1);
        m2 += d * (s - mean);
      }
      var_by_k[K] = m2 / (static_cast<double>(replicates) - 1.0);
    }

    for (int K : k_values) {
      VarianceCell cell;
      cell.K = K;
      cell.depth_to_go = horizon;
      cell.variance = var_by_k[K];
      cell.ratio_to_k1 = var_by_k[K] / var_by_k[k_values.front()];
      cell.predicted_ratio = 1.0 / std::pow(static_cast<double>(K), horizon);
      cell.within_tolerance = std::abs(cell.ratio_to_k1 - cell.predicted_ratio) <= tolerance * cell.predicted_ratio;
      report.passed = report.passed && cell.within_tolerance;
      report.cells.push_back(cell);
    }
  }
  return report;
}

}  // namespace maac
