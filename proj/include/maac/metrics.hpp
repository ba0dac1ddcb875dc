#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "maac/common.hpp"
#include "maac/rng.hpp"

namespace maac {

// Time-weighted exponential moving average over an irregularly spaced series:
// y'_k = (1 - w_k) y'_{k-1} + w_k y_k with w_k = 1 - (1 - alpha)^(x_k - x_{k-1}).
inline std::vector<std::pair<double, double>> ema_smooth(const std::vector<std::pair<double, double>>& series,
                                                         double alpha) {
  if (alpha <= 0.0 || alpha > 1.0) throw ConfigError("ema_smooth: alpha must be in (0, 1]");
  std::vector<std::pair<double, double>> out;
  out.reserve(series.size());
  for (std::size_t k = 0; k < series.size(); ++k) {
    if (k == 0) {
      out.push_back(series[k]);
      continue;
    }
    double dx = series[k].first - series[k - 1].first;
    if (dx <= 0.0) throw ValidationError("ema_smooth: x values must be strictly increasing");
    double w = 1.0 - std::pow(1.0 - alpha, dx);
    out.emplace_back(series[k].first, (1.0 - w) * out.back().second + w * series[k].second);
  }
  return out;
}

// Percentile bootstrap CI of the mean. Deterministic given seed.
inline std::pair<double, double> bootstrap_ci(const std::vector<double>& samples, double level, int resamples,
                                              std::uint64_t seed) {
  if (samples.size() < 2) throw ConfigError("bootstrap_ci: need at least 2 samples");
  if (level <= 0.0 || level >= 1.0) throw ConfigError("bootstrap_ci: level must be in (0, 1)");
  if (resamples < 1) throw ConfigError("bootstrap_ci: resamples must be >= 1");

  RngStream rng(RngStream::mix(seed ^ 0xb007ull));
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (int r = 0; r < resamples; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < samples.size(); ++j)
      s += samples[rng.next_u64() % samples.size()];
    means[static_cast<std::size_t>(r)] = s / static_cast<double>(samples.size());
  }
  std::sort(means.begin(), means.end());
  auto quantile = [&](double q) {
    double pos = q * (static_cast<double>(means.size()) - 1.0);
    std::size_t lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, means.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return means[lo] * (1.0 - frac) + means[hi] * frac;
  };
  double tail = (1.0 - level) / 2.0;
  return {quantile(tail), quantile(1.0 - tail)};
}

}  // namespace maac
