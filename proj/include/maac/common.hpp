#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace maac {

using Token = int;
using TokenSeq = std::vector<Token>;
using Vec = std::vector<double>;

// Error taxonomy. Configuration errors are caller mistakes in setup;
// validation errors are bad runtime data; numeric faults carry diagnostics
// for non-finite intermediate results; usage errors are interface misuse.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error("validation error: " + msg) {}
};

struct NumericFault : std::runtime_error {
  explicit NumericFault(const std::string& msg) : std::runtime_error("numeric fault: " + msg) {}
};

struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error("usage error: " + msg) {}
};

inline double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw ConfigError("dot: dimension mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline void axpy(double alpha, const Vec& x, Vec& y) {
  if (x.size() != y.size()) throw ConfigError("axpy: dimension mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline double l2_norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace maac
