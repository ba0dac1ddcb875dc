#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "maac/taskfile.hpp"
#include "maac/trainers.hpp"

namespace maac {

namespace detail {

inline double parse_real_field(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ConfigError("missing key '" + key + "'");
  try {
    std::size_t pos = 0;
    double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a real number, got '" + it->second + "'");
  }
}

}  // namespace detail

inline Algorithm parse_algorithm(const std::string& name) {
  if (name == "mareinforce") return Algorithm::MaReinforce;
  if (name == "magrpo") return Algorithm::Magrpo;
  if (name == "collm_dc") return Algorithm::CollmDc;
  if (name == "collm_cc") return Algorithm::CollmCc;
  throw ConfigError("key 'algorithm': expected one of mareinforce|magrpo|collm_dc|collm_cc, got '" + name + "'");
}

inline EnvKind parse_env_kind(const std::string& name) {
  if (name == "pairwrite") return EnvKind::PairWrite;
  if (name == "coopcode") return EnvKind::CoopCode;
  if (name == "gridbuild") return EnvKind::GridBuild;
  throw ConfigError("key 'env': expected one of pairwrite|coopcode|gridbuild, got '" + name + "'");
}

inline TrainConfig parse_config(std::istream& in) {
  auto kv = detail::parse_kv_lines(in);
  static const std::set<std::string> known = {"algorithm", "env",     "turns",        "generations",
                                             "epochs",    "agent_lr", "critic_lr",    "gamma",
                                             "advantage_clip", "minibatch", "buffer", "eval_samples",
                                             "seed",      "out_dir"};
  for (const auto& [key, value] : kv) {
    (void)value;
    if (!known.count(key)) throw ConfigError("unknown key '" + key + "'");
  }

  TrainConfig cfg;
  auto text = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("missing key '" + key + "'");
    return it->second;
  };
  cfg.algorithm = parse_algorithm(text("algorithm"));
  cfg.env = parse_env_kind(text("env"));
  cfg.turns = detail::parse_int_field(kv, "turns");
  cfg.generations = detail::parse_int_field(kv, "generations");
  cfg.epochs = detail::parse_int_field(kv, "epochs");
  cfg.agent_lr = detail::parse_real_field(kv, "agent_lr");
  cfg.critic_lr = detail::parse_real_field(kv, "critic_lr");
  cfg.gamma = detail::parse_real_field(kv, "gamma");
  cfg.advantage_clip = detail::parse_real_field(kv, "advantage_clip");
  cfg.minibatch = detail::parse_int_field(kv, "minibatch");
  cfg.buffer = detail::parse_int_field(kv, "buffer");
  cfg.eval_samples = detail::parse_int_field(kv, "eval_samples");
  cfg.seed = static_cast<std::uint64_t>(detail::parse_int_field(kv, "seed"));
  cfg.out_dir = kv.count("out_dir") ? kv.at("out_dir") : std::string("run");
  cfg.check();
  return cfg;
}

inline TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

// Built-in task instance for a config without an explicit task file: the
// default payload for the chosen environment at the configured horizon.
inline TaskInstance make_default_task(EnvKind kind, int turns) {
  TaskInstance task;
  task.env_kind = kind;
  task.horizon = turns;
  task.n_agents = 2;
  switch (kind) {
    case EnvKind::PairWrite:
      task.payload = PairWritePayload{};
      break;
    case EnvKind::CoopCode: {
      CoopCodePayload p;
      p.tests = {{0, 2}, {1, 3}, {2, 4}, {3, 5}};  // expected = input + 2
      task.payload = p;
      break;
    }
    case EnvKind::GridBuild: {
      GridBuildPayload p;
      p.grid = GridSpec::from_rows({"##", "##"});
      task.payload = p;
      break;
    }
  }
  return task;
}

}  // namespace maac
