#pragma once

#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <variant>

#include "maac/envs/coopcode.hpp"
#include "maac/envs/gridbuild.hpp"
#include "maac/envs/pairwrite.hpp"

namespace maac {

struct TaskInstance {
  EnvKind env_kind = EnvKind::PairWrite;
  int horizon = 1;
  int n_agents = 2;
  std::variant<PairWritePayload, CoopCodePayload, GridBuildPayload> payload;
};

inline std::unique_ptr<Env> make_env(const TaskInstance& task) {
  if (task.horizon < 1) throw ConfigError("task: horizon must be >= 1");
  if (task.n_agents != 2) throw ConfigError("task: n_agents must be 2 for the built-in environments");
  switch (task.env_kind) {
    case EnvKind::PairWrite:
      return std::make_unique<PairWriteEnv>(std::get<PairWritePayload>(task.payload), task.horizon);
    case EnvKind::CoopCode:
      return std::make_unique<CoopCodeEnv>(std::get<CoopCodePayload>(task.payload), task.horizon);
    case EnvKind::GridBuild:
      return std::make_unique<GridBuildEnv>(std::get<GridBuildPayload>(task.payload), task.horizon);
  }
  throw ConfigError("task: unknown env_kind");
}

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline std::map<std::string, std::string> parse_kv_lines(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (kv.count(key)) throw ConfigError("duplicate key '" + key + "'");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline int parse_int_field(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ConfigError("missing field '" + key + "'");
  try {
    std::size_t pos = 0;
    int v = std::stoi(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("field '" + key + "': expected integer, got '" + it->second + "'");
  }
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

}  // namespace detail

inline TaskInstance parse_task(std::istream& in) {
  auto kv = detail::parse_kv_lines(in);
  auto take = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("missing field '" + key + "'");
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto take_int = [&](const std::string& key) {
    int v = detail::parse_int_field(kv, key);
    kv.erase(key);
    return v;
  };

  TaskInstance task;
  std::string kind = take("env_kind");
  task.horizon = take_int("horizon");
  task.n_agents = take_int("n_agents");

  if (kind == "pairwrite") {
    task.env_kind = EnvKind::PairWrite;
    PairWritePayload p;
    p.max_len = take_int("max_len");
    task.payload = p;
  } else if (kind == "coopcode") {
    task.env_kind = EnvKind::CoopCode;
    CoopCodePayload p;
    p.max_len = take_int("max_len");
    for (const auto& pair : detail::split(take("tests"), ',')) {
      auto io = detail::split(pair, ':');
      if (io.size() != 2) throw ConfigError("field 'tests': expected input:expected pairs, got '" + pair + "'");
      try {
        p.tests.push_back(CoopTest{std::stoll(io[0]), std::stoll(io[1])});
      } catch (const std::exception&) {
        throw ConfigError("field 'tests': bad integer in '" + pair + "'");
      }
    }
    task.payload = p;
  } else if (kind == "gridbuild") {
    task.env_kind = EnvKind::GridBuild;
    GridBuildPayload p;
    p.max_len = take_int("max_len");
    p.grid = GridSpec::from_rows(detail::split(take("grid"), '/'));
    if (kv.count("hazard")) p.hazard_enabled = take_int("hazard") != 0;
    task.payload = p;
  } else {
    throw ConfigError("field 'env_kind': unknown value '" + kind + "'");
  }

  if (!kv.empty()) throw ConfigError("unknown field '" + kv.begin()->first + "'");
  if (task.n_agents != 2) throw ConfigError("field 'n_agents': built-in environments are two-agent");
  return task;
}

inline TaskInstance load_task(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open task file '" + path + "'");
  return parse_task(in);
}

}  // namespace maac
