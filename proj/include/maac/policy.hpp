#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "maac/common.hpp"
#include "maac/features.hpp"
#include "maac/rng.hpp"

namespace maac {

// Token alphabet. end_id terminates generation; pad_id is reserved filler.
// Either may be absent (-1) for micro-alphabets used by enumeration oracles.
struct Vocab {
  int size = 0;
  int end_id = -1;
  int pad_id = -1;

  void check() const {
    if (size < 2) throw ConfigError("vocab size must be >= 2");
    if (end_id >= size || pad_id >= size) throw ConfigError("reserved token id outside vocab");
  }

  bool has_end() const { return end_id >= 0; }
};

struct ActionSeq {
  TokenSeq tokens;

  int length() const { return static_cast<int>(tokens.size()); }

  void check(const Vocab& vocab, int max_len) const {
    if (tokens.empty()) throw ValidationError("action sequence is empty");
    if (length() > max_len) throw ValidationError("action length " + std::to_string(length()) + " exceeds cap " + std::to_string(max_len));
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tokens[i] < 0 || tokens[i] >= vocab.size)
        throw ValidationError("token " + std::to_string(tokens[i]) + " outside vocab of size " + std::to_string(vocab.size));
      if (vocab.has_end() && tokens[i] == vocab.end_id && i + 1 != tokens.size())
        throw ValidationError("END token before final position");
    }
  }
};

struct SeqLogProb {
  double total = 0.0;
  Vec per_token;
};

// Linear-softmax autoregressive policy: per position, logits = W f / T over
// the vocab, conditioned on hashed features of history ++ generated prefix.
struct PolicyParams {
  Vec weights;  // row-major |V| x d
  FeatureEncoder encoder;
  Vocab vocab;
  double temperature = 1.0;

  void check() const {
    vocab.check();
    if (temperature <= 0.0) throw ConfigError("temperature must be positive");
    if (weights.size() != static_cast<std::size_t>(vocab.size) * encoder.dim)
      throw ConfigError("weight block size mismatch: expected " + std::to_string(vocab.size * encoder.dim));
  }

  static PolicyParams zeros(const Vocab& v, const FeatureEncoder& enc, double temp) {
    PolicyParams p;
    p.vocab = v;
    p.encoder = enc;
    p.temperature = temp;
    p.weights.assign(static_cast<std::size_t>(v.size) * enc.dim, 0.0);
    p.check();
    return p;
  }
};

inline Vec encode_context(const LocalHistory& history, const TokenSeq& prefix, const PolicyParams& params) {
  return params.encoder.encode(history, prefix);
}

namespace detail {

// Softmax over logits = W f / T. Returns probabilities; throws on non-finite.
inline Vec next_token_probs(const PolicyParams& p, const Vec& features) {
  const int v = p.vocab.size;
  const int d = p.encoder.dim;
  Vec logits(static_cast<std::size_t>(v), 0.0);
  double maxl = -1e300;
  for (int a = 0; a < v; ++a) {
    double s = 0.0;
    const double* row = p.weights.data() + static_cast<std::size_t>(a) * d;
    for (int j = 0; j < d; ++j) s += row[j] * features[static_cast<std::size_t>(j)];
    s /= p.temperature;
    if (!std::isfinite(s))
      throw NumericFault("non-finite logit for token " + std::to_string(a) + " (|w| = " + std::to_string(l2_norm(p.weights)) + ")");
    logits[static_cast<std::size_t>(a)] = s;
    maxl = std::max(maxl, s);
  }
  double z = 0.0;
  for (int a = 0; a < v; ++a) {
    logits[static_cast<std::size_t>(a)] = std::exp(logits[static_cast<std::size_t>(a)] - maxl);
    z += logits[static_cast<std::size_t>(a)];
  }
  for (int a = 0; a < v; ++a) logits[static_cast<std::size_t>(a)] /= z;
  return logits;
}

}  // namespace detail

// Draw a sequence token by token; stops at END (when the vocab has one) or
// at max_len. The returned log-prob is the one a teacher-forced pass of the
// same action would produce.
inline std::pair<ActionSeq, SeqLogProb> sample_sequence(const PolicyParams& params, const LocalHistory& history,
                                                        int max_len, RngStream& rng) {
  params.check();
  if (max_len < 1) throw ConfigError("max_len must be >= 1");
  ActionSeq action;
  SeqLogProb lp;
  TokenSeq prefix;
  for (int mu = 0; mu < max_len; ++mu) {
    Vec f = params.encoder.encode(history, prefix);
    Vec probs = detail::next_token_probs(params, f);
    int tok = rng.next_categorical(probs);
    action.tokens.push_back(tok);
    double l = std::log(probs[static_cast<std::size_t>(tok)]);
    lp.per_token.push_back(l);
    lp.total += l;
    if (params.vocab.has_end() && tok == params.vocab.end_id) break;
    prefix.push_back(tok);
  }
  return {action, lp};
}

inline SeqLogProb sequence_logprob(const PolicyParams& params, const LocalHistory& history, const ActionSeq& action) {
  params.check();
  action.check(params.vocab, action.length());
  SeqLogProb lp;
  TokenSeq prefix;
  for (Token tok : action.tokens) {
    Vec f = params.encoder.encode(history, prefix);
    Vec probs = detail::next_token_probs(params, f);
    double l = std::log(probs[static_cast<std::size_t>(tok)]);
    lp.per_token.push_back(l);
    lp.total += l;
    prefix.push_back(tok);
  }
  return lp;
}

// Exact score gradient: sum_mu (onehot(a_mu) - softmax(logits_mu)) (x) f_mu / T.
inline Vec sequence_logprob_grad(const PolicyParams& params, const LocalHistory& history, const ActionSeq& action) {
  params.check();
  action.check(params.vocab, action.length());
  const int v = params.vocab.size;
  const int d = params.encoder.dim;
  Vec grad(static_cast<std::size_t>(v) * d, 0.0);
  TokenSeq prefix;
  for (Token tok : action.tokens) {
    Vec f = params.encoder.encode(history, prefix);
    Vec probs = detail::next_token_probs(params, f);
    for (int a = 0; a < v; ++a) {
      double coeff = ((a == tok) ? 1.0 : 0.0) - probs[static_cast<std::size_t>(a)];
      coeff /= params.temperature;
      if (coeff == 0.0) continue;
      double* row = grad.data() + static_cast<std::size_t>(a) * d;
      for (int j = 0; j < d; ++j) row[j] += coeff * f[static_cast<std::size_t>(j)];
    }
    prefix.push_back(tok);
  }
  return grad;
}

inline double importance_ratio(const SeqLogProb& lp_new, const SeqLogProb& lp_old) {
  if (lp_new.total == lp_old.total) return 1.0;
  double r = std::exp(lp_new.total - lp_old.total);
  if (!std::isfinite(r)) throw NumericFault("importance ratio overflow: " + std::to_string(lp_new.total) + " - " + std::to_string(lp_old.total));
  return r;
}

}  // namespace maac
