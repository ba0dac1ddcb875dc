#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "maac/common.hpp"
#include "maac/policy.hpp"
#include "maac/rng.hpp"

namespace maac {

// Training-time side information appended to critic inputs.
struct GlobalInfo {
  int turn = 0;
  double progress = 0.0;
  double last_reward_norm = 0.0;
};

struct StepOutcome {
  double reward = 0.0;
  std::vector<TokenSeq> next_obs;
  GlobalInfo global;
  bool terminated = false;
};

// Dec-POMDP environment over token-sequence observations and actions.
// Instances are value-cloneable so rollout trees can branch mid-episode;
// a fresh clone continues deterministically from the captured state.
// The rng stream passed to step is ignored by the deterministic task
// environments and consumed only by exogenous-noise test environments.
class Env {
 public:
  virtual ~Env() = default;

  virtual int n_agents() const = 0;
  virtual int horizon() const = 0;
  virtual Vocab vocab(int agent) const = 0;
  virtual int max_action_len(int agent) const = 0;
  virtual double reward_cap() const = 0;

  virtual std::vector<TokenSeq> reset(std::uint64_t seed) = 0;
  virtual StepOutcome step(const std::vector<ActionSeq>& joint_action, RngStream& rng) = 0;

  virtual std::unique_ptr<Env> clone() const = 0;

  GlobalInfo global() const { return global_; }
  bool done() const { return done_; }
  int turn() const { return global_.turn; }

 protected:
  void begin_episode() {
    global_ = GlobalInfo{};
    done_ = false;
    started_ = true;
  }

  // Shared bookkeeping every step must run through: arity check, action
  // validation, termination monotonicity, horizon exhaustion.
  void pre_step(const std::vector<ActionSeq>& joint_action) const {
    if (!started_) throw UsageError("step before reset");
    if (done_) throw UsageError("step on terminated episode");
    if (static_cast<int>(joint_action.size()) != n_agents())
      throw UsageError("expected " + std::to_string(n_agents()) + " actions, got " + std::to_string(joint_action.size()));
    for (int i = 0; i < n_agents(); ++i) joint_action[static_cast<std::size_t>(i)].check(vocab(i), max_action_len(i));
  }

  void post_step(StepOutcome& out, double progress) {
    global_.turn += 1;
    global_.progress = std::max(global_.progress, progress);
    global_.last_reward_norm = out.reward / reward_cap();
    if (global_.turn >= horizon()) out.terminated = true;
    done_ = out.terminated;
    out.global = global_;
  }

  GlobalInfo global_;
  bool done_ = false;
  bool started_ = false;
};

enum class EnvKind { PairWrite, CoopCode, GridBuild };

inline std::string to_string(EnvKind k) {
  switch (k) {
    case EnvKind::PairWrite: return "pairwrite";
    case EnvKind::CoopCode: return "coopcode";
    case EnvKind::GridBuild: return "gridbuild";
  }
  return "?";
}

}  // namespace maac
