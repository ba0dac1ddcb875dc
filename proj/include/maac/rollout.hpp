#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "maac/critic.hpp"
#include "maac/env.hpp"
#include "maac/policy.hpp"

namespace maac {

struct CallCounter {
  std::uint64_t generation_calls = 0;  // one per agent per sampled action
  std::uint64_t tf_calls = 0;          // teacher-forced evaluations
};

// One replay-buffer row (Alg.-style bookkeeping): everything needed to
// recompute current log-probs and critic targets later. Behavior log-probs
// are recorded at sampling time and never recomputed.
struct TransitionRecord {
  JointHistory joint_history;           // h_t per agent
  GlobalInfo global;                    // m_t
  std::vector<ActionSeq> joint_action;  // a_t
  double reward = 0.0;                  // r_t
  std::vector<TokenSeq> next_obs;       // o_{t+1}
  GlobalInfo next_global;               // m_{t+1}
  std::vector<SeqLogProb> behavior_logprobs;
  bool terminal = false;                // episode ended after this turn
};

// h_{i,t+1} = {h_{i,t}, a_{i,t}, o_{i,t+1}}, reconstructed from the record.
inline JointHistory next_history(const TransitionRecord& rec) {
  JointHistory out = rec.joint_history;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i].push_turn(rec.joint_action[i].tokens, rec.next_obs[i]);
  return out;
}

struct ReplayBuffer {
  std::vector<TransitionRecord> records;
  void clear() { records.clear(); }
  std::size_t size() const { return records.size(); }
};

struct EpisodeResult {
  ReplayBuffer buffer;
  double episode_return = 0.0;  // undiscounted sum of joint rewards
  CallCounter calls;
};

// Single-path rollout: one joint action per turn, histories extended as
// h_{i,t+1} = {h_{i,t}, a_{i,t}, o_{i,t+1}}.
inline EpisodeResult rollout_episode(Env& env, const std::vector<PolicyParams>& policies,
                                     std::uint64_t seed, RngStream& rng) {
  const int n = env.n_agents();
  if (static_cast<int>(policies.size()) != n) throw ConfigError("rollout: one policy per agent required");

  EpisodeResult result;
  std::vector<TokenSeq> obs = env.reset(seed);
  JointHistory histories(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) histories[static_cast<std::size_t>(i)].entries.push_back(obs[static_cast<std::size_t>(i)]);

  for (int t = 0; t < env.horizon() && !env.done(); ++t) {
    TransitionRecord rec;
    rec.joint_history = histories;
    rec.global = env.global();
    for (int i = 0; i < n; ++i) {
      RngStream agent_rng = rng.child(static_cast<std::uint64_t>(t) * 131 + static_cast<std::uint64_t>(i));
      auto [action, lp] = sample_sequence(policies[static_cast<std::size_t>(i)], histories[static_cast<std::size_t>(i)],
                                          env.max_action_len(i), agent_rng);
      rec.joint_action.push_back(action);
      rec.behavior_logprobs.push_back(lp);
      result.calls.generation_calls += 1;
      result.calls.tf_calls += 1;  // the post-sampling TF pass is folded into sampling
    }
    StepOutcome out;
    try {
      out = env.step(rec.joint_action, rng);
    } catch (const std::exception& e) {
      throw UsageError("env fault at turn " + std::to_string(t) + ": " + e.what());
    }
    rec.reward = out.reward;
    rec.next_obs = out.next_obs;
    rec.next_global = out.global;
    rec.terminal = out.terminated;
    result.episode_return += out.reward;
    for (int i = 0; i < n; ++i)
      histories[static_cast<std::size_t>(i)].push_turn(rec.joint_action[static_cast<std::size_t>(i)].tokens,
                                                       out.next_obs[static_cast<std::size_t>(i)]);
    result.buffer.records.push_back(std::move(rec));
  }
  return result;
}

// One node of the K-ary sampling tree: the joint action sampled at this
// node, conditioned on joint_history, plus the backed-up return G.
struct RolloutTreeNode {
  int depth = 0;
  JointHistory joint_history;           // conditioning history h_t
  std::vector<ActionSeq> joint_action;
  std::vector<SeqLogProb> behavior_logprobs;
  double reward = 0.0;
  bool terminated = false;
  double G = 0.0;
  std::vector<RolloutTreeNode> children;
};

struct TreeResult {
  std::vector<RolloutTreeNode> roots;  // K actions sampled at h_0
  CallCounter calls;
};

namespace detail {

inline void expand_node(const Env& env_state, const JointHistory& histories, int depth, int K,
                        const std::vector<PolicyParams>& policies, RngStream stream,
                        std::vector<RolloutTreeNode>& siblings, CallCounter& calls) {
  const int n = env_state.n_agents();
  for (int k = 0; k < K; ++k) {
    RngStream edge = stream.child(static_cast<std::uint64_t>(k));
    RolloutTreeNode node;
    node.depth = depth;
    node.joint_history = histories;
    for (int i = 0; i < n; ++i) {
      RngStream agent_rng = edge.child(0x100 + static_cast<std::uint64_t>(i));
      auto [action, lp] = sample_sequence(policies[static_cast<std::size_t>(i)], histories[static_cast<std::size_t>(i)],
                                          env_state.max_action_len(i), agent_rng);
      node.joint_action.push_back(action);
      node.behavior_logprobs.push_back(lp);
      calls.generation_calls += 1;
      calls.tf_calls += 1;
    }
    auto child_env = env_state.clone();
    RngStream env_rng = edge.child(0x200);
    StepOutcome out = child_env->step(node.joint_action, env_rng);
    node.reward = out.reward;
    node.terminated = out.terminated;
    if (!out.terminated && depth + 1 < env_state.horizon()) {
      JointHistory next = histories;
      for (int i = 0; i < n; ++i)
        next[static_cast<std::size_t>(i)].push_turn(node.joint_action[static_cast<std::size_t>(i)].tokens,
                                                    out.next_obs[static_cast<std::size_t>(i)]);
      expand_node(*child_env, next, depth + 1, K, policies, edge.child(0x300), node.children, calls);
    }
    siblings.push_back(std::move(node));
  }
}

}  // namespace detail

// Full K-ary rollout tree from a fresh episode. Sibling subtrees use
// independent derived rng streams; environment branching is by state clone,
// which is equivalent to prefix replay for deterministic environments.
inline TreeResult expand_tree(Env& env, const std::vector<PolicyParams>& policies, int K,
                              std::uint64_t seed, RngStream& rng) {
  if (K < 1) throw ConfigError("expand_tree: K must be >= 1");
  const int n = env.n_agents();
  if (static_cast<int>(policies.size()) != n) throw ConfigError("expand_tree: one policy per agent required");

  TreeResult result;
  std::vector<TokenSeq> obs = env.reset(seed);
  JointHistory histories(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) histories[static_cast<std::size_t>(i)].entries.push_back(obs[static_cast<std::size_t>(i)]);
  detail::expand_node(env, histories, 0, K, policies, rng.child(0xabc), result.roots, result.calls);
  return result;
}

// Monte Carlo backup: leaf G = r; internal G = r + gamma * mean(children G);
// early-terminated nodes keep G = r and spawn no children.
inline void backup_returns(std::vector<RolloutTreeNode>& roots, double gamma) {
  auto rec = [gamma](auto&& self, RolloutTreeNode& node) -> void {
    if (node.children.empty()) {
      node.G = node.reward;
      return;
    }
    double acc = 0.0;
    for (auto& c : node.children) {
      self(self, c);
      acc += c.G;
    }
    node.G = node.reward + gamma * acc / static_cast<double>(node.children.size());
  };
  for (auto& r : roots) rec(rec, r);
}

// Closed-form inference-call count for a full K-ary depth-H tree with n
// agents: nK(K^H - 1)/(K - 1), degenerating to nH at K = 1.
inline std::uint64_t predicted_calls(int n, int K, int H) {
  if (n < 1 || K < 1 || H < 1) throw ConfigError("predicted_calls: n, K, H must be >= 1");
  if (K == 1) return static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(H);
  unsigned __int128 pow = 1;
  for (int t = 0; t < H; ++t) {
    pow *= static_cast<unsigned>(K);
    if (pow > (static_cast<unsigned __int128>(1) << 100)) throw ValidationError("predicted_calls: K^H overflows");
  }
  unsigned __int128 result = static_cast<unsigned>(n) * static_cast<unsigned>(K) * (pow - 1) / static_cast<unsigned>(K - 1);
  if (result > ~static_cast<std::uint64_t>(0)) throw ValidationError("predicted_calls: result overflows 64 bits");
  return static_cast<std::uint64_t>(result);
}

struct CallAudit {
  std::uint64_t predicted = 0;
  std::uint64_t measured = 0;
  bool early_termination = false;
  std::vector<std::uint64_t> pruned_subtree_calls;  // generation calls saved per pruned subtree
};

namespace detail {

// Generation calls a full subtree rooted below a node at `depth` would cost.
inline std::uint64_t full_subtree_calls(int n, int K, int H, int depth) {
  std::uint64_t total = 0;
  std::uint64_t width = static_cast<std::uint64_t>(K);
  for (int t = depth + 1; t < H; ++t) {
    total += width * static_cast<std::uint64_t>(n);
    width *= static_cast<std::uint64_t>(K);
  }
  return total;
}

inline void collect_pruned(const RolloutTreeNode& node, int n, int K, int H, CallAudit& audit) {
  if (node.terminated && node.depth + 1 < H) {
    audit.early_termination = true;
    audit.pruned_subtree_calls.push_back(full_subtree_calls(n, K, H, node.depth));
    return;
  }
  for (const auto& c : node.children) collect_pruned(c, n, K, H, audit);
}

}  // namespace detail

inline CallAudit audit_calls(const CallCounter& counter, int n, int K, int H,
                             const std::vector<RolloutTreeNode>& roots) {
  CallAudit audit;
  audit.predicted = predicted_calls(n, K, H);
  audit.measured = counter.generation_calls;
  for (const auto& r : roots) detail::collect_pruned(r, n, K, H, audit);
  if (!audit.early_termination && audit.measured != audit.predicted)
    throw ValidationError("call accounting mismatch: measured " + std::to_string(audit.measured) +
                          " != predicted " + std::to_string(audit.predicted) + " with no early termination");
  if (audit.early_termination && audit.measured >= audit.predicted)
    throw ValidationError("call accounting mismatch: early termination but measured " +
                          std::to_string(audit.measured) + " >= predicted " + std::to_string(audit.predicted));
  return audit;
}

}  // namespace maac
