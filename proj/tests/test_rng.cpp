#include <doctest.h>

#include <cmath>
#include <set>

#include "maac/rng.hpp"

using maac::RngStream;

TEST_CASE("rng: determinism and stream independence") {
  RngStream a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  bool any_diff = false;
  RngStream a2(42);
  for (int i = 0; i < 100; ++i) any_diff = any_diff || (a2.next_u64() != c.next_u64());
  CHECK(any_diff);
}

TEST_CASE("rng: child streams differ from the parent and each other") {
  RngStream parent(7);
  RngStream c0 = parent.child(0);
  RngStream c1 = parent.child(1);
  std::set<std::uint64_t> firsts;
  firsts.insert(RngStream(7).next_u64());
  firsts.insert(c0.next_u64());
  firsts.insert(c1.next_u64());
  CHECK(firsts.size() == 3);
}

TEST_CASE("rng: child derivation is const and repeatable") {
  RngStream parent(9);
  RngStream c1 = parent.child(5);
  RngStream c2 = parent.child(5);
  for (int i = 0; i < 10; ++i) CHECK(c1.next_u64() == c2.next_u64());
}

TEST_CASE("rng: uniform doubles live in [0, 1)") {
  RngStream rng(1);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    double x = rng.next_double();
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    sum += x;
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("rng: normal draws have unit moments") {
  RngStream rng(2);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = rng.next_normal();
    sum += x;
    sum2 += x * x;
  }
  CHECK(sum / n == doctest::Approx(0.0).epsilon(0.02));
  CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("rng: categorical frequencies match probabilities (chi-square)") {
  RngStream rng(3);
  std::vector<double> probs = {0.5, 0.25, 0.125, 0.125};
  std::vector<int> counts(probs.size(), 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) counts[static_cast<std::size_t>(rng.next_categorical(probs))]++;
  double chi2 = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    double expected = probs[k] * n;
    chi2 += (counts[k] - expected) * (counts[k] - expected) / expected;
  }
  CHECK(chi2 < 16.27);  // chi-square 99.9th percentile, df = 3
}

TEST_CASE("rng: categorical rejects a malformed distribution") {
  RngStream rng(4);
  CHECK_THROWS_AS(rng.next_categorical({}), maac::ConfigError);
}
