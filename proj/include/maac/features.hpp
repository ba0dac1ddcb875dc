#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "maac/common.hpp"
#include "maac/rng.hpp"

namespace maac {

// One agent's alternating observation/action record: o_0, a_0, o_1, ..., o_t.
// Always begins and ends with an observation.
struct LocalHistory {
  std::vector<TokenSeq> entries;

  int turn() const { return static_cast<int>(entries.size()) / 2; }

  void check() const {
    if (entries.empty() || entries.size() % 2 == 0)
      throw ValidationError("local history must alternate o,a,...,o (odd entry count)");
  }

  void push_turn(const TokenSeq& action, const TokenSeq& next_obs) {
    entries.push_back(action);
    entries.push_back(next_obs);
  }

  // All tokens in order, for feature extraction.
  TokenSeq flat() const {
    TokenSeq out;
    for (const auto& e : entries) out.insert(out.end(), e.begin(), e.end());
    return out;
  }
};

using JointHistory = std::vector<LocalHistory>;

// Hashed unigram+bigram count features over the last `window` tokens of
// history ++ prefix, with a one-hot turn indicator in the tail slots.
// Counts saturate at 255 per bucket so the vector norm stays bounded.
struct FeatureEncoder {
  int dim = 512;
  int window = 16;
  int max_turn = 8;  // turn one-hot occupies the last max_turn+1 slots
  std::uint64_t hash_seed = 0;

  int hash_dim() const { return dim - (max_turn + 1); }

  Vec encode(const LocalHistory& history, const TokenSeq& prefix) const {
    history.check();
    if (hash_dim() <= 0) throw ConfigError("feature dim too small for turn indicator");
    TokenSeq toks = history.flat();
    toks.insert(toks.end(), prefix.begin(), prefix.end());
    if (static_cast<int>(toks.size()) > window)
      toks.erase(toks.begin(), toks.end() - window);

    std::vector<std::uint16_t> counts(static_cast<std::size_t>(hash_dim()), 0);
    auto bump = [&](std::uint64_t h) {
      auto& c = counts[h % static_cast<std::uint64_t>(hash_dim())];
      if (c < 255) ++c;
    };
    for (std::size_t i = 0; i < toks.size(); ++i) {
      bump(RngStream::mix(hash_seed ^ RngStream::mix(0x01ull + static_cast<std::uint64_t>(toks[i]) * 2654435761ull)));
      if (i + 1 < toks.size()) {
        std::uint64_t pair = (static_cast<std::uint64_t>(toks[i]) << 21) ^ static_cast<std::uint64_t>(toks[i + 1]);
        bump(RngStream::mix(hash_seed ^ RngStream::mix(0x02ull + pair * 0x9e3779b9ull)));
      }
    }

    Vec out(static_cast<std::size_t>(dim), 0.0);
    for (int i = 0; i < hash_dim(); ++i) out[i] = static_cast<double>(counts[i]);
    int t = std::min(history.turn(), max_turn);
    out[static_cast<std::size_t>(hash_dim() + t)] = 1.0;
    return out;
  }
};

}  // namespace maac
