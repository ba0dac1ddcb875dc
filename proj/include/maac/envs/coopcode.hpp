#pragma once

#include <algorithm>
#include <string>
#include <tuple>
#include <vector>

#include "maac/env.hpp"

namespace maac {

// Two coders over a micro-grammar: an auxiliary agent emits a utility
// (payload tokens defining an offset function) and a main agent emits the
// core logic. The joint program is evaluated against small integer test
// cases. Gates: the main must open with its header token, and the
// concatenation must parse under the toy grammar; either failure zeroes the
// reward and terminates the episode.
namespace coopcode_tokens {
inline constexpr int kEnd = 0;
inline constexpr int kPad = 1;
inline constexpr int kMainHeader = 2;
inline constexpr int kAuxHeader = 3;
inline constexpr int kCallAux = 4;
inline constexpr int kUseResult = 5;
inline constexpr int kAdd1 = 6;
inline constexpr int kDouble = 7;
inline constexpr int kPayloadBase = 8;  // P0..P3, digit value = token - base
inline constexpr int kNumPayload = 4;
inline constexpr int kRoleAux = 12;
inline constexpr int kRoleMain = 13;
inline constexpr int kFeedbackBase = 14;  // failing-test index, capped
inline constexpr int kNumFeedback = 5;
inline constexpr int kVocabSize = 19;

inline bool is_payload(Token t) { return t >= kPayloadBase && t < kPayloadBase + kNumPayload; }
inline bool is_logic(Token t) { return t == kAdd1 || t == kDouble || is_payload(t); }
}  // namespace coopcode_tokens

struct CoopTest {
  long long input = 0;
  long long expected = 0;
};

struct CoopCodeWeights {
  double tests = 0.7;
  double cooperation = 0.3;
  double discard_deduction = 0.15;
};

struct CoopCodeResult {
  double reward = 0.0;
  bool gate_failed = false;   // structure or syntax gate
  bool all_passed = false;
  int first_failing = -1;     // -1 when all pass or gates fail
  double pass_fraction = 0.0;
};

namespace detail {

inline TokenSeq content_tokens(const ActionSeq& a, const Vocab& v) {
  TokenSeq out;
  for (Token t : a.tokens)
    if (t != v.end_id) out.push_back(t);
  return out;
}

}  // namespace detail

inline CoopCodeResult coopcode_evaluate(const ActionSeq& aux, const ActionSeq& main,
                                        const std::vector<CoopTest>& tests, const CoopCodeWeights& w) {
  namespace ct = coopcode_tokens;
  if (tests.empty()) throw ConfigError("coopcode: test set is empty");
  CoopCodeResult res;
  Vocab v{ct::kVocabSize, ct::kEnd, ct::kPad};
  TokenSeq aux_body = detail::content_tokens(aux, v);
  TokenSeq main_body = detail::content_tokens(main, v);

  // Structure gate: the main function must open with its header.
  if (main_body.empty() || main_body[0] != ct::kMainHeader) {
    res.gate_failed = true;
    return res;
  }

  // Syntax gate over the concatenated program.
  bool saw_call = false;
  TokenSeq program = aux_body;
  program.insert(program.end(), main_body.begin(), main_body.end());
  for (std::size_t i = 0; i < program.size(); ++i) {
    Token t = program[i];
    if (t == ct::kPad) { res.gate_failed = true; return res; }
    bool in_main = i >= aux_body.size();
    if (t == ct::kMainHeader && !(in_main && i == aux_body.size())) { res.gate_failed = true; return res; }
    if (t == ct::kAuxHeader && in_main) { res.gate_failed = true; return res; }
    if (in_main && t == ct::kCallAux) saw_call = true;
    if (in_main && t == ct::kUseResult && !saw_call) { res.gate_failed = true; return res; }
  }

  // Aux utility: adds the sum of its payload digits.
  long long aux_offset = 0;
  for (Token t : aux_body)
    if (ct::is_payload(t)) aux_offset += t - ct::kPayloadBase;

  bool calls_aux = false, uses_result = false;
  int logic_count = 0;
  for (std::size_t i = 1; i < main_body.size(); ++i) {
    Token t = main_body[i];
    if (t == ct::kCallAux) calls_aux = true;
    if (t == ct::kUseResult) uses_result = true;
    if (ct::is_logic(t)) ++logic_count;
  }

  int passed = 0;
  for (std::size_t k = 0; k < tests.size(); ++k) {
    long long value = tests[k].input;
    if (calls_aux && uses_result) value += aux_offset;
    for (std::size_t i = 1; i < main_body.size(); ++i) {
      Token t = main_body[i];
      if (t == ct::kAdd1) value += 1;
      else if (t == ct::kDouble) value *= 2;
      else if (ct::is_payload(t)) value += t - ct::kPayloadBase;
    }
    if (value == tests[k].expected) {
      ++passed;
    } else if (res.first_failing < 0) {
      res.first_failing = static_cast<int>(k);
    }
  }
  res.pass_fraction = static_cast<double>(passed) / static_cast<double>(tests.size());
  res.all_passed = passed == static_cast<int>(tests.size());

  double coop = (calls_aux ? 0.6 : 0.0) + (logic_count >= 2 ? 0.4 : 0.0);
  res.reward = w.tests * res.pass_fraction + w.cooperation * coop;
  if (calls_aux && !uses_result) res.reward -= w.discard_deduction;
  return res;
}

// (reward, feedback tokens, all_passed) per the module contract.
inline std::tuple<double, TokenSeq, bool> coopcode_reward(const ActionSeq& aux, const ActionSeq& main,
                                                          const std::vector<CoopTest>& tests,
                                                          const CoopCodeWeights& w = {}) {
  namespace ct = coopcode_tokens;
  CoopCodeResult r = coopcode_evaluate(aux, main, tests, w);
  TokenSeq feedback;
  if (r.first_failing >= 0)
    feedback.push_back(ct::kFeedbackBase + std::min(r.first_failing, ct::kNumFeedback - 1));
  return {r.reward, feedback, r.all_passed};
}

struct CoopCodePayload {
  std::vector<CoopTest> tests;
  int max_len = 6;
  CoopCodeWeights weights;
};

class CoopCodeEnv final : public Env {
 public:
  CoopCodeEnv(const CoopCodePayload& payload, int horizon)
      : payload_(payload), horizon_(horizon) {
    if (horizon_ < 1) throw ConfigError("coopcode: horizon must be >= 1");
    if (payload_.tests.empty()) throw ConfigError("coopcode: payload.tests is empty");
    if (payload_.max_len < 1) throw ConfigError("coopcode: max_len must be >= 1");
  }

  int n_agents() const override { return 2; }
  int horizon() const override { return horizon_; }
  Vocab vocab(int) const override {
    return Vocab{coopcode_tokens::kVocabSize, coopcode_tokens::kEnd, coopcode_tokens::kPad};
  }
  int max_action_len(int) const override { return payload_.max_len; }
  double reward_cap() const override { return 1.0; }

  std::vector<TokenSeq> reset(std::uint64_t seed) override {
    begin_episode();
    namespace ct = coopcode_tokens;
    (void)seed;  // task identity is fully in the payload
    return {{ct::kRoleAux}, {ct::kRoleMain}};
  }

  StepOutcome step(const std::vector<ActionSeq>& joint_action, RngStream&) override {
    pre_step(joint_action);
    namespace ct = coopcode_tokens;
    CoopCodeResult r = coopcode_evaluate(joint_action[0], joint_action[1], payload_.tests, payload_.weights);
    StepOutcome out;
    out.reward = r.gate_failed ? 0.0 : r.reward;
    out.terminated = r.gate_failed || r.all_passed;
    TokenSeq feedback;
    if (r.first_failing >= 0)
      feedback.push_back(ct::kFeedbackBase + std::min(r.first_failing, ct::kNumFeedback - 1));
    out.next_obs = {feedback, feedback};
    out.next_obs[0].insert(out.next_obs[0].begin(), ct::kRoleAux);
    out.next_obs[1].insert(out.next_obs[1].begin(), ct::kRoleMain);
    post_step(out, r.pass_fraction);
    return out;
  }

  std::unique_ptr<Env> clone() const override { return std::make_unique<CoopCodeEnv>(*this); }

 private:
  CoopCodePayload payload_;
  int horizon_;
};

}  // namespace maac
