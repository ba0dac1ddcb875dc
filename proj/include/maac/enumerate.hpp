#pragma once

#include <cstdint>
#include <vector>

#include "maac/env.hpp"

namespace maac {

// All sequences the autoregressive sampler can emit: length < max_len ending
// in END (when the vocab has one), or exactly max_len with END allowed only
// at the last position. Ordering is deterministic (lexicographic by prefix).
inline std::vector<ActionSeq> enumerate_actions(const Vocab& vocab, int max_len) {
  vocab.check();
  if (max_len < 1) throw ConfigError("enumerate_actions: max_len must be >= 1");
  std::vector<ActionSeq> out;
  TokenSeq cur;
  auto rec = [&](auto&& self, int depth) -> void {
    for (Token t = 0; t < vocab.size; ++t) {
      cur.push_back(t);
      bool is_end = vocab.has_end() && t == vocab.end_id;
      if (is_end || depth + 1 == max_len) {
        out.push_back(ActionSeq{cur});
      } else {
        self(self, depth + 1);
      }
      cur.pop_back();
    }
  };
  rec(rec, 0);
  return out;
}

struct JointTrajectory {
  std::vector<std::vector<ActionSeq>> actions;     // [turn][agent]
  std::vector<double> rewards;                     // [turn]
  std::vector<std::vector<TokenSeq>> observations; // [turn+1][agent], includes initial
  std::vector<GlobalInfo> globals;                 // [turn], post-step
  GlobalInfo initial_global;
  bool terminated_early = false;
};

struct EnumerationCaps {
  std::uint64_t max_trajectories = 1000000;
};

namespace detail {

inline std::uint64_t joint_action_count(const Env& env) {
  std::uint64_t total = 1;
  for (int i = 0; i < env.n_agents(); ++i) {
    // Count without materializing: sequences of length < M ending in END plus
    // full-length sequences. Sizes here are tiny; enumerate directly.
    total *= static_cast<std::uint64_t>(enumerate_actions(env.vocab(i), env.max_action_len(i)).size());
  }
  return total;
}

}  // namespace detail

// Exhaustive deterministic enumeration of all reachable joint trajectories.
// Environments must be deterministic given (seed, action prefix); the rng
// handed to step is a fixed stream, so any env that consumed noise would
// break determinism and has no business being enumerated.
inline std::vector<JointTrajectory> enumerate_trajectories(const Env& env_template, std::uint64_t seed,
                                                           const EnumerationCaps& caps = {}) {
  const int n = env_template.n_agents();
  const int horizon = env_template.horizon();

  std::uint64_t per_turn = detail::joint_action_count(env_template);
  std::uint64_t estimate = 1;
  for (int t = 0; t < horizon; ++t) {
    if (estimate > caps.max_trajectories / per_turn) {
      estimate = ~0ull;
      break;
    }
    estimate *= per_turn;
  }
  if (estimate > caps.max_trajectories)
    throw ConfigError("enumeration cap exceeded: about " +
                      (estimate == ~0ull ? std::string(">10^19") : std::to_string(estimate)) + " trajectories, cap " +
                      std::to_string(caps.max_trajectories));

  std::vector<std::vector<ActionSeq>> per_agent_actions;
  for (int i = 0; i < n; ++i) per_agent_actions.push_back(enumerate_actions(env_template.vocab(i), env_template.max_action_len(i)));

  auto fresh = env_template.clone();
  std::vector<TokenSeq> initial_obs = fresh->reset(seed);
  GlobalInfo initial_global = fresh->global();

  std::vector<JointTrajectory> out;
  JointTrajectory cur;
  cur.observations.push_back(initial_obs);
  cur.initial_global = initial_global;

  auto rec = [&](auto&& self, const Env& state) -> void {
    int t = static_cast<int>(cur.actions.size());
    // Iterate the joint action space in mixed-radix order.
    std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
    bool more = true;
    while (more) {
      std::vector<ActionSeq> joint;
      for (int i = 0; i < n; ++i) joint.push_back(per_agent_actions[static_cast<std::size_t>(i)][idx[static_cast<std::size_t>(i)]]);

      auto child = state.clone();
      RngStream rng(seed ^ RngStream::mix(static_cast<std::uint64_t>(t)));
      StepOutcome outcome = child->step(joint, rng);

      cur.actions.push_back(joint);
      cur.rewards.push_back(outcome.reward);
      cur.observations.push_back(outcome.next_obs);
      cur.globals.push_back(outcome.global);
      if (outcome.terminated) {
        cur.terminated_early = t + 1 < horizon;
        out.push_back(cur);
        cur.terminated_early = false;
      } else {
        self(self, *child);
      }
      cur.actions.pop_back();
      cur.rewards.pop_back();
      cur.observations.pop_back();
      cur.globals.pop_back();

      // advance mixed-radix counter
      int pos = n - 1;
      while (pos >= 0) {
        if (++idx[static_cast<std::size_t>(pos)] < per_agent_actions[static_cast<std::size_t>(pos)].size()) break;
        idx[static_cast<std::size_t>(pos)] = 0;
        --pos;
      }
      more = pos >= 0;
    }
  };
  rec(rec, *fresh);
  return out;
}

}  // namespace maac
