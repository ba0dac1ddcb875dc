#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "maac/common.hpp"

namespace maac {

// Splittable counter-based RNG. Child streams are derived by hashing the
// parent state with a tag, so sibling subtrees of a rollout tree draw from
// statistically independent streams while the whole run stays reproducible
// from one root seed. Platform-independent by construction (no libstdc++
// distribution objects).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(mix(seed ^ 0x9e3779b97f4a7c15ull)) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  // Uniform in [0, 1).
  double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = next_double();
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Index into a discrete distribution given cumulative weights summing to 1.
  int next_categorical(const std::vector<double>& probs) {
    if (probs.empty()) throw ConfigError("next_categorical: empty distribution");
    double u = next_double();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

  RngStream child(std::uint64_t tag) const { return RngStream(mix(state_ ^ mix(tag + 0x2545f4914f6cdd1dull))); }

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace maac
