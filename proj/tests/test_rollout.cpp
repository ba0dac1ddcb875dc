#include <doctest.h>

#include <cmath>

#include "maac/envs/coopcode.hpp"
#include "maac/estimator.hpp"

namespace {

std::vector<maac::PolicyParams> zero_policies(const maac::Env& env, int max_turn) {
  maac::FeatureEncoder enc;
  enc.dim = 16;
  enc.window = 8;
  enc.max_turn = max_turn;
  enc.hash_seed = 77;
  std::vector<maac::PolicyParams> out;
  for (int i = 0; i < env.n_agents(); ++i) out.push_back(maac::PolicyParams::zeros(env.vocab(i), enc, 1.0));
  return out;
}

}  // namespace

TEST_CASE("rollout_episode: records reconstruct histories and sum rewards") {
  maac::MicroEnv env(3, 3, [](int t, int a0, int a1) { return a0 + 2.0 * a1 + t; });
  auto pols = zero_policies(env, 3);
  maac::RngStream rng(1);
  auto ep = maac::rollout_episode(env, pols, 5, rng);

  REQUIRE(ep.buffer.size() == 3);
  double total = 0.0;
  for (const auto& rec : ep.buffer.records) total += rec.reward;
  CHECK(total == doctest::Approx(ep.episode_return).epsilon(1e-12));
  CHECK(ep.calls.generation_calls == 6);  // 2 agents x 3 turns

  // h_{t+1} of record t equals h_t of record t+1.
  for (std::size_t t = 0; t + 1 < ep.buffer.size(); ++t) {
    maac::JointHistory next = maac::next_history(ep.buffer.records[t]);
    for (int i = 0; i < 2; ++i)
      CHECK(next[static_cast<std::size_t>(i)].entries ==
            ep.buffer.records[t + 1].joint_history[static_cast<std::size_t>(i)].entries);
  }
  CHECK(ep.buffer.records.back().terminal);

  // Behavior log-probs match a teacher-forced recompute under the same params.
  for (const auto& rec : ep.buffer.records)
    for (int i = 0; i < 2; ++i) {
      double tf = maac::sequence_logprob(pols[static_cast<std::size_t>(i)],
                                         rec.joint_history[static_cast<std::size_t>(i)],
                                         rec.joint_action[static_cast<std::size_t>(i)]).total;
      CHECK(tf == doctest::Approx(rec.behavior_logprobs[static_cast<std::size_t>(i)].total).epsilon(1e-12));
    }
}

TEST_CASE("rollout_episode: deterministic under a fixed seed") {
  maac::MicroEnv env(3, 2, [](int, int a0, int a1) { return static_cast<double>(a0 - a1); });
  auto pols = zero_policies(env, 2);
  maac::RngStream r1(9), r2(9);
  auto e1 = maac::rollout_episode(env, pols, 3, r1);
  maac::MicroEnv env2 = env;
  auto e2 = maac::rollout_episode(env2, pols, 3, r2);
  REQUIRE(e1.buffer.size() == e2.buffer.size());
  for (std::size_t t = 0; t < e1.buffer.size(); ++t)
    for (int i = 0; i < 2; ++i)
      CHECK(e1.buffer.records[t].joint_action[static_cast<std::size_t>(i)].tokens ==
            e2.buffer.records[t].joint_action[static_cast<std::size_t>(i)].tokens);
}

TEST_CASE("expand_tree: full K-ary structure and exact call accounting") {
  const int K = 4, H = 2;
  maac::MicroEnv env(2, H, [](int, int, int) { return 1.0; });
  auto pols = zero_policies(env, H);
  maac::RngStream rng(3);
  auto tree = maac::expand_tree(env, pols, K, 0, rng);

  REQUIRE(tree.roots.size() == K);
  std::size_t nodes = 0, leaves = 0;
  auto walk = [&](auto&& self, const maac::RolloutTreeNode& n) -> void {
    ++nodes;
    if (n.children.empty()) ++leaves;
    for (const auto& c : n.children) self(self, c);
  };
  for (const auto& r : tree.roots) walk(walk, r);
  CHECK(nodes == 20);   // K + K^2: the worked 20-joint-node case
  CHECK(leaves == 16);  // K^H rollouts
  CHECK(tree.calls.generation_calls == maac::predicted_calls(2, K, H));
  CHECK(tree.calls.generation_calls == 40);  // n K (K^H - 1)/(K - 1) = 2*4*5

  auto audit = maac::audit_calls(tree.calls, 2, K, H, tree.roots);
  CHECK_FALSE(audit.early_termination);
  CHECK(audit.measured == audit.predicted);
}

TEST_CASE("predicted_calls: closed form and K=1 degeneration") {
  CHECK(maac::predicted_calls(2, 1, 5) == 10);        // nH
  CHECK(maac::predicted_calls(3, 2, 3) == 3 * 2 * 7); // n K (K^H-1)/(K-1)
  CHECK(maac::predicted_calls(1, 4, 2) == 20);
  CHECK_THROWS_AS(maac::predicted_calls(0, 2, 2), maac::ConfigError);
  CHECK_THROWS_AS(maac::predicted_calls(2, 3, 80), maac::ValidationError);  // overflow guard
}

TEST_CASE("backup_returns: leaf G = r, internal G = r + gamma mean(children)") {
  maac::RolloutTreeNode root;
  root.reward = 1.0;
  maac::RolloutTreeNode c1, c2;
  c1.reward = 2.0;
  c2.reward = 4.0;
  maac::RolloutTreeNode gc;
  gc.reward = 10.0;
  c1.children.push_back(gc);
  root.children = {c1, c2};
  std::vector<maac::RolloutTreeNode> roots = {root};
  maac::backup_returns(roots, 0.5);
  // c1: 2 + 0.5*10 = 7; c2: 4; root: 1 + 0.5*(7+4)/2 = 3.75.
  CHECK(roots[0].G == doctest::Approx(3.75).epsilon(1e-12));
}

TEST_CASE("expand_tree: early termination prunes subtrees and the audit notices") {
  // CoopCode with an unreachable test: most programs gate-fail at turn 0,
  // so nearly every root is terminal and spawns no children.
  maac::CoopCodePayload payload;
  payload.tests = {{0, 1}};
  payload.max_len = 1;
  maac::CoopCodeEnv env(payload, 2);
  auto pols = zero_policies(env, 2);
  const int K = 3;
  maac::RngStream rng(11);
  auto tree = maac::expand_tree(env, pols, K, 0, rng);
  REQUIRE(tree.roots.size() == K);

  bool any_terminated = false;
  for (const auto& r : tree.roots) any_terminated = any_terminated || r.terminated;
  if (any_terminated) {
    auto audit = maac::audit_calls(tree.calls, 2, K, 2, tree.roots);
    CHECK(audit.early_termination);
    CHECK(audit.measured < audit.predicted);
    CHECK_FALSE(audit.pruned_subtree_calls.empty());
    // Saved calls reconcile exactly: measured + saved = predicted.
    std::uint64_t saved = 0;
    for (auto s : audit.pruned_subtree_calls) saved += s;
    CHECK(audit.measured + saved == audit.predicted);
  }
}

TEST_CASE("audit_calls: mismatch without early termination is an error") {
  maac::MicroEnv env(2, 2, [](int, int, int) { return 0.0; });
  auto pols = zero_policies(env, 2);
  maac::RngStream rng(5);
  auto tree = maac::expand_tree(env, pols, 2, 0, rng);
  maac::CallCounter corrupted = tree.calls;
  corrupted.generation_calls -= 1;
  CHECK_THROWS_AS(maac::audit_calls(corrupted, 2, 2, 2, tree.roots), maac::ValidationError);
}

TEST_CASE("expand_tree: sibling subtrees draw from independent streams") {
  maac::MicroEnv env(3, 1, [](int, int, int) { return 0.0; });
  auto pols = zero_policies(env, 1);
  maac::RngStream rng(21);
  auto tree = maac::expand_tree(env, pols, 8, 0, rng);
  // Under the uniform policy, 8 sibling draws over 9 joint outcomes should
  // not all coincide; identical streams would produce identical actions.
  bool all_same = true;
  for (const auto& r : tree.roots)
    all_same = all_same && r.joint_action[0].tokens == tree.roots[0].joint_action[0].tokens &&
               r.joint_action[1].tokens == tree.roots[0].joint_action[1].tokens;
  CHECK_FALSE(all_same);
}

TEST_CASE("tree node histories condition on the branch prefix") {
  maac::MicroEnv env(2, 2, [](int, int, int) { return 0.0; });
  auto pols = zero_policies(env, 2);
  maac::RngStream rng(31);
  auto tree = maac::expand_tree(env, pols, 2, 0, rng);
  for (const auto& root : tree.roots) {
    CHECK(root.joint_history[0].turn() == 0);
    for (const auto& child : root.children) {
      CHECK(child.depth == 1);
      CHECK(child.joint_history[0].turn() == 1);
      // The child's history embeds this root's action (MicroEnv echoes the
      // other agent's action as the observation).
      REQUIRE(child.joint_history[0].entries.size() == 3);
      CHECK(child.joint_history[0].entries[1] == root.joint_action[0].tokens);
      CHECK(child.joint_history[0].entries[2] == root.joint_action[1].tokens);
    }
  }
}
