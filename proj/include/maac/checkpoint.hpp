#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "maac/critic.hpp"
#include "maac/policy.hpp"

namespace maac {

// Checkpoint file: per block, one text header line followed by the raw
// little-endian 64-bit reals, then a trailing fnv1a checksum line over
// everything before it. Round trips are bit-exact.

struct TrainingState {
  std::vector<PolicyParams> policies;
  std::vector<CriticParams> critics;
  std::uint64_t next_episode = 0;
  // Running generation-call and transition totals, persisted so that a
  // resumed run continues the cumulative metric columns without a reset.
  std::uint64_t cumulative_calls = 0;
  std::uint64_t cumulative_transitions = 0;
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline void put_doubles(std::ostream& out, const Vec& v) {
  for (double x : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, 8);
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(buf, 8);
  }
}

inline Vec get_doubles(std::istream& in, std::size_t count) {
  Vec v(count);
  for (std::size_t j = 0; j < count; ++j) {
    char buf[8];
    in.read(buf, 8);
    if (!in) throw ValidationError("checkpoint truncated inside a weight block");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    std::memcpy(&v[j], &bits, 8);
  }
  return v;
}

inline void write_encoder_fields(std::ostream& out, const FeatureEncoder& e) {
  out << " d=" << e.dim << " window=" << e.window << " max_turn=" << e.max_turn << " hash_seed=" << e.hash_seed;
}

inline std::string expect_token(std::istringstream& ss, const std::string& key) {
  std::string tok;
  if (!(ss >> tok) || tok.rfind(key + "=", 0) != 0)
    throw ValidationError("checkpoint header: expected " + key + "=..., got '" + tok + "'");
  return tok.substr(key.size() + 1);
}

inline long long expect_int(std::istringstream& ss, const std::string& key) { return std::stoll(expect_token(ss, key)); }

inline std::uint64_t expect_uint(std::istringstream& ss, const std::string& key) {
  return std::stoull(expect_token(ss, key));
}

}  // namespace detail

inline void save_checkpoint(const TrainingState& state, const std::string& path) {
  std::ostringstream body;
  body << "maacckpt v1 policies=" << state.policies.size() << " critics=" << state.critics.size()
       << " next_episode=" << state.next_episode << " calls=" << state.cumulative_calls
       << " transitions=" << state.cumulative_transitions << "\n";
  for (const auto& p : state.policies) {
    body << "policy";
    detail::write_encoder_fields(body, p.encoder);
    body << " vocab=" << p.vocab.size << " end=" << p.vocab.end_id << " pad=" << p.vocab.pad_id
         << " temperature=" << std::hexfloat << p.temperature << std::defaultfloat
         << " count=" << p.weights.size() << "\n";
    detail::put_doubles(body, p.weights);
    body << "\n";
  }
  for (const auto& c : state.critics) {
    body << "critic kind=" << (c.kind == CriticKind::Centralized ? "cc" : "dc");
    detail::write_encoder_fields(body, c.encoder);
    body << " agent=" << c.agent_index << " n_agents=" << c.n_agents << " horizon=" << c.horizon
         << " use_global=" << (c.use_global ? 1 : 0) << " count=" << c.weights.size() << "\n";
    detail::put_doubles(body, c.weights);
    body << "\n";
  }
  std::string payload = body.str();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint '" + path + "'");
  out << payload << "checksum " << std::hex << detail::fnv1a(payload) << "\n";
}

inline TrainingState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read checkpoint '" + path + "'");
  std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  auto checksum_at = raw.rfind("checksum ");
  if (checksum_at == std::string::npos) throw ValidationError("checksum failure: no checksum line in '" + path + "'");
  std::string payload = raw.substr(0, checksum_at);
  std::uint64_t stored = std::stoull(raw.substr(checksum_at + 9), nullptr, 16);
  if (stored != detail::fnv1a(payload))
    throw ValidationError("checksum failure: '" + path + "' is corrupt");

  std::istringstream ss(payload);
  std::string magic, version;
  ss >> magic >> version;
  if (magic != "maacckpt" || version != "v1") throw ValidationError("unrecognized checkpoint header");
  std::size_t n_policies = static_cast<std::size_t>(detail::expect_int(ss, "policies"));
  std::size_t n_critics = static_cast<std::size_t>(detail::expect_int(ss, "critics"));
  TrainingState state;
  state.next_episode = detail::expect_uint(ss, "next_episode");
  state.cumulative_calls = detail::expect_uint(ss, "calls");
  state.cumulative_transitions = detail::expect_uint(ss, "transitions");
  ss.ignore(1, '\n');

  std::string line;
  auto read_block = [&](const std::string& expected_tag) {
    if (!std::getline(ss, line)) throw ValidationError("checkpoint truncated before a " + expected_tag + " block");
    std::istringstream hs(line);
    std::string tag;
    hs >> tag;
    if (tag != expected_tag) throw ValidationError("expected " + expected_tag + " block, got '" + tag + "'");
    return hs;
  };

  for (std::size_t b = 0; b < n_policies; ++b) {
    std::istringstream hs = read_block("policy");
    PolicyParams p;
    p.encoder.dim = static_cast<int>(detail::expect_int(hs, "d"));
    p.encoder.window = static_cast<int>(detail::expect_int(hs, "window"));
    p.encoder.max_turn = static_cast<int>(detail::expect_int(hs, "max_turn"));
    p.encoder.hash_seed = detail::expect_uint(hs, "hash_seed");
    p.vocab.size = static_cast<int>(detail::expect_int(hs, "vocab"));
    p.vocab.end_id = static_cast<int>(detail::expect_int(hs, "end"));
    p.vocab.pad_id = static_cast<int>(detail::expect_int(hs, "pad"));
    p.temperature = std::strtod(detail::expect_token(hs, "temperature").c_str(), nullptr);
    std::size_t count = static_cast<std::size_t>(detail::expect_int(hs, "count"));
    p.weights = detail::get_doubles(ss, count);
    ss.ignore(1, '\n');
    p.check();
    state.policies.push_back(std::move(p));
  }
  for (std::size_t b = 0; b < n_critics; ++b) {
    std::istringstream hs = read_block("critic");
    CriticParams c;
    std::string kind = detail::expect_token(hs, "kind");
    c.kind = kind == "cc" ? CriticKind::Centralized : CriticKind::Decentralized;
    c.encoder.dim = static_cast<int>(detail::expect_int(hs, "d"));
    c.encoder.window = static_cast<int>(detail::expect_int(hs, "window"));
    c.encoder.max_turn = static_cast<int>(detail::expect_int(hs, "max_turn"));
    c.encoder.hash_seed = detail::expect_uint(hs, "hash_seed");
    c.agent_index = static_cast<int>(detail::expect_int(hs, "agent"));
    c.n_agents = static_cast<int>(detail::expect_int(hs, "n_agents"));
    c.horizon = static_cast<int>(detail::expect_int(hs, "horizon"));
    c.use_global = detail::expect_int(hs, "use_global") != 0;
    std::size_t count = static_cast<std::size_t>(detail::expect_int(hs, "count"));
    c.weights = detail::get_doubles(ss, count);
    ss.ignore(1, '\n');
    c.check();
    state.critics.push_back(std::move(c));
  }
  return state;
}

}  // namespace maac
