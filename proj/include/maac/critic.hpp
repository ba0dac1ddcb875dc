#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "maac/common.hpp"
#include "maac/env.hpp"
#include "maac/features.hpp"

namespace maac {

struct TDSample {
  double value = 0.0;
  double next_value = 0.0;
  double reward = 0.0;
  bool terminal = false;
};

inline double td_error(const TDSample& s, double gamma) {
  if (gamma < 0.0 || gamma > 1.0) throw ConfigError("td_error: gamma must be in [0, 1]");
  return s.reward + gamma * (s.terminal ? 0.0 : s.next_value) - s.value;
}

// One-hot turn indicator plus progress and normalized last reward: dim H+3.
inline Vec encode_global(const GlobalInfo& m, int horizon) {
  if (m.turn > horizon) throw ValidationError("encode_global: turn " + std::to_string(m.turn) + " exceeds horizon " + std::to_string(horizon));
  Vec out(static_cast<std::size_t>(horizon + 3), 0.0);
  out[static_cast<std::size_t>(m.turn)] = 1.0;
  out[static_cast<std::size_t>(horizon + 1)] = m.progress;
  out[static_cast<std::size_t>(horizon + 2)] = m.last_reward_norm;
  return out;
}

enum class CriticKind { Decentralized, Centralized };

// Linear value head over hashed history features. The encoder's hash seed is
// independent of the actors' so actor and critic features never alias.
struct CriticParams {
  Vec weights;
  FeatureEncoder encoder;  // per-agent history block encoder
  CriticKind kind = CriticKind::Decentralized;
  int agent_index = 0;     // decentralized only
  int n_agents = 1;        // centralized: number of concatenated blocks
  int horizon = 1;
  bool use_global = true;  // strict-DC mode drops m_t

  int global_dim() const { return use_global ? horizon + 3 : 0; }
  int expected_dim() const {
    int blocks = kind == CriticKind::Centralized ? n_agents : 1;
    return blocks * encoder.dim + global_dim();
  }

  void check() const {
    if (weights.size() != static_cast<std::size_t>(expected_dim()))
      throw ConfigError("critic weights dim " + std::to_string(weights.size()) + " != expected " + std::to_string(expected_dim()));
  }

  static CriticParams decentralized(int agent, const FeatureEncoder& enc, int horizon, bool use_global = true) {
    CriticParams p;
    p.kind = CriticKind::Decentralized;
    p.agent_index = agent;
    p.encoder = enc;
    p.horizon = horizon;
    p.use_global = use_global;
    p.weights.assign(static_cast<std::size_t>(p.expected_dim()), 0.0);
    return p;
  }

  static CriticParams centralized(int n_agents, const FeatureEncoder& enc, int horizon, bool use_global = true) {
    CriticParams p;
    p.kind = CriticKind::Centralized;
    p.n_agents = n_agents;
    p.encoder = enc;
    p.horizon = horizon;
    p.use_global = use_global;
    p.weights.assign(static_cast<std::size_t>(p.expected_dim()), 0.0);
    return p;
  }
};

inline Vec dc_features(const CriticParams& params, const LocalHistory& history, const GlobalInfo& m) {
  if (params.kind != CriticKind::Decentralized) throw ConfigError("dc_features on a centralized critic");
  Vec f = params.encoder.encode(history, {});
  if (params.use_global) {
    Vec g = encode_global(m, params.horizon);
    f.insert(f.end(), g.begin(), g.end());
  }
  return f;
}

inline Vec cc_features(const CriticParams& params, const JointHistory& joint, const GlobalInfo& m) {
  if (params.kind != CriticKind::Centralized) throw ConfigError("cc_features on a decentralized critic");
  if (static_cast<int>(joint.size()) != params.n_agents)
    throw ConfigError("cc_features: expected " + std::to_string(params.n_agents) + " histories, got " + std::to_string(joint.size()));
  Vec f;
  f.reserve(static_cast<std::size_t>(params.expected_dim()));
  for (const auto& h : joint) {
    Vec block = params.encoder.encode(h, {});
    f.insert(f.end(), block.begin(), block.end());
  }
  if (params.use_global) {
    Vec g = encode_global(m, params.horizon);
    f.insert(f.end(), g.begin(), g.end());
  }
  return f;
}

inline double dc_value(const CriticParams& params, const LocalHistory& history, const GlobalInfo& m) {
  params.check();
  return dot(params.weights, dc_features(params, history, m));
}

inline double cc_value(const CriticParams& params, const JointHistory& joint, const GlobalInfo& m) {
  params.check();
  return dot(params.weights, cc_features(params, joint, m));
}

// One frozen transition for value fitting; features are precomputed so the
// same row works for both critic kinds.
struct TDBatchRow {
  Vec features;
  Vec next_features;
  double reward = 0.0;
  bool terminal = false;
};

inline double td_mse(const CriticParams& params, const std::vector<TDBatchRow>& batch, double gamma) {
  params.check();
  if (batch.empty()) throw ConfigError("td_mse: empty batch");
  double s = 0.0;
  for (const auto& row : batch) {
    TDSample sample{dot(params.weights, row.features),
                    row.terminal ? 0.0 : dot(params.weights, row.next_features), row.reward, row.terminal};
    double d = td_error(sample, gamma);
    s += d * d;
  }
  return s / static_cast<double>(batch.size());
}

// Semi-gradient TD step: the bootstrap target r + gamma V(next) is treated as
// a constant, so the update is +alpha * mean(delta * features).
inline CriticParams critic_update(const CriticParams& params, const std::vector<TDBatchRow>& batch,
                                  double alpha_v, double gamma) {
  params.check();
  if (alpha_v <= 0.0) throw ConfigError("critic_update: alpha_v must be positive");
  if (batch.empty()) throw ConfigError("critic_update: empty batch");
  Vec step(params.weights.size(), 0.0);
  for (const auto& row : batch) {
    TDSample sample{dot(params.weights, row.features),
                    row.terminal ? 0.0 : dot(params.weights, row.next_features), row.reward, row.terminal};
    double d = td_error(sample, gamma);
    axpy(d / static_cast<double>(batch.size()), row.features, step);
  }
  for (double x : step)
    if (!std::isfinite(x)) throw NumericFault("critic update is non-finite; parameters unchanged");
  CriticParams out = params;
  axpy(alpha_v, step, out.weights);
  return out;
}

}  // namespace maac
