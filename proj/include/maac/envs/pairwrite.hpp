#pragma once

#include <array>
#include <cmath>
#include <set>

#include "maac/env.hpp"

namespace maac {

// Two writers produce token sequences scored on structure (length ratio of
// the detailed writer to the concise one), style (Jaccard similarity of
// token sets, capped), and coherence (log-diversity of transition-token
// categories used in the combined output).
namespace pairwrite_tokens {
inline constexpr int kEnd = 0;
inline constexpr int kPad = 1;
inline constexpr int kTransitionBase = 2;  // 12 categories x 2 tokens each
inline constexpr int kNumCategories = 12;
inline constexpr int kRoleConcise = 26;
inline constexpr int kRoleDetailed = 27;
inline constexpr int kTopicBase = 28;  // 4 topic tokens
inline constexpr int kVocabSize = 32;

inline int category_of(Token t) {
  if (t < kTransitionBase || t >= kTransitionBase + 2 * kNumCategories) return -1;
  return (t - kTransitionBase) / 2;
}
}  // namespace pairwrite_tokens

struct PairWriteWeights {
  double structure = 0.4;
  double style = 0.3;
  double coherence = 0.3;
};

struct PairWriteResult {
  double reward = 0.0;
  double structure = 0.0;
  double style = 0.0;
  double coherence = 0.0;
  bool band_violation = false;  // early-termination flag
};

// Content length: END is a terminator, not content.
inline int content_length(const ActionSeq& a, const Vocab& v) {
  int n = a.length();
  if (v.has_end() && !a.tokens.empty() && a.tokens.back() == v.end_id) --n;
  return n;
}

inline PairWriteResult pairwrite_score(const ActionSeq& concise, const ActionSeq& detailed,
                                       const PairWriteWeights& w, const Vocab& vocab) {
  namespace pt = pairwrite_tokens;
  PairWriteResult res;

  const int len1 = content_length(concise, vocab);
  const int len2 = content_length(detailed, vocab);
  if (len1 == 0 || len2 == 0) {
    res.band_violation = true;
    return res;
  }

  // Structure: full credit on [1.6, 3.2], linear ramps on [1.1, 1.6) and
  // (3.2, 5.0], zero (and termination) outside.
  const double ratio = static_cast<double>(len2) / static_cast<double>(len1);
  if (ratio >= 1.6 && ratio <= 3.2) {
    res.structure = 1.0;
  } else if (ratio >= 1.1 && ratio < 1.6) {
    res.structure = (ratio - 1.1) / 0.5;
  } else if (ratio > 3.2 && ratio <= 5.0) {
    res.structure = (5.0 - ratio) / 1.8;
  } else {
    res.band_violation = true;
    return res;
  }

  // Style: Jaccard similarity of content token sets, capped at 0.03.
  std::set<Token> s1, s2, uni, inter;
  auto content_set = [&](const ActionSeq& a, std::set<Token>& s) {
    for (Token t : a.tokens)
      if (t != vocab.end_id && t != vocab.pad_id) s.insert(t);
  };
  content_set(concise, s1);
  content_set(detailed, s2);
  uni = s1;
  uni.insert(s2.begin(), s2.end());
  for (Token t : s1)
    if (s2.count(t)) inter.insert(t);
  const double jaccard = uni.empty() ? 0.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
  res.style = std::min(jaccard, 0.03) / 0.03;

  // Coherence: diversity of transition categories across the joint output.
  std::set<int> cats;
  for (const auto* a : {&concise, &detailed})
    for (Token t : a->tokens) {
      int c = pt::category_of(t);
      if (c >= 0) cats.insert(c);
    }
  res.coherence = std::min(0.6 * std::log(static_cast<double>(cats.size()) + 1.0), 1.0);

  res.reward = w.structure * res.structure + w.style * res.style + w.coherence * res.coherence;
  return res;
}

inline double pairwrite_reward(const ActionSeq& concise, const ActionSeq& detailed, const PairWriteWeights& w) {
  if (concise.tokens.empty() || detailed.tokens.empty()) throw ValidationError("pairwrite_reward: empty action");
  Vocab v{pairwrite_tokens::kVocabSize, pairwrite_tokens::kEnd, pairwrite_tokens::kPad};
  return pairwrite_score(concise, detailed, w, v).reward;
}

struct PairWritePayload {
  int max_len = 8;
  PairWriteWeights weights;
};

class PairWriteEnv final : public Env {
 public:
  PairWriteEnv(const PairWritePayload& payload, int horizon)
      : payload_(payload), horizon_(horizon) {
    if (horizon_ < 1) throw ConfigError("pairwrite: horizon must be >= 1");
    if (payload_.max_len < 2) throw ConfigError("pairwrite: max_len must be >= 2");
  }

  int n_agents() const override { return 2; }
  int horizon() const override { return horizon_; }
  Vocab vocab(int) const override {
    return Vocab{pairwrite_tokens::kVocabSize, pairwrite_tokens::kEnd, pairwrite_tokens::kPad};
  }
  int max_action_len(int) const override { return payload_.max_len; }
  double reward_cap() const override { return 1.0; }

  std::vector<TokenSeq> reset(std::uint64_t seed) override {
    begin_episode();
    namespace pt = pairwrite_tokens;
    Token topic = pt::kTopicBase + static_cast<int>(RngStream::mix(seed) % 4);
    return {{pt::kRoleConcise, topic}, {pt::kRoleDetailed, topic}};
  }

  StepOutcome step(const std::vector<ActionSeq>& joint_action, RngStream&) override {
    pre_step(joint_action);
    namespace pt = pairwrite_tokens;
    PairWriteResult r = pairwrite_score(joint_action[0], joint_action[1], payload_.weights, vocab(0));
    StepOutcome out;
    out.reward = r.reward;
    out.terminated = r.band_violation;
    // Feedback: role marker plus a coarse quality signal (reuses topic slots).
    Token grade = pt::kTopicBase + std::min(3, static_cast<int>(r.reward * 4.0));
    out.next_obs = {{pt::kRoleConcise, grade}, {pt::kRoleDetailed, grade}};
    post_step(out, r.reward);
    return out;
  }

  std::unique_ptr<Env> clone() const override { return std::make_unique<PairWriteEnv>(*this); }

 private:
  PairWritePayload payload_;
  int horizon_;
};

}  // namespace maac
