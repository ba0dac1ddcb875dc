#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "maac/env.hpp"

namespace maac {

// Two builders place textured blocks on a small grid to cover a target
// pattern. Coverage is rewarded, wasted blocks and same-texture adjacency
// are penalized, and an optional hazard term deducts for accumulated damage.

struct GridSpec {
  int rows = 0;
  int cols = 0;
  std::vector<bool> target;  // row-major over the bounding box

  static GridSpec from_rows(const std::vector<std::string>& lines) {
    GridSpec g;
    g.rows = static_cast<int>(lines.size());
    if (g.rows == 0) throw ConfigError("grid: no rows");
    g.cols = static_cast<int>(lines[0].size());
    if (g.cols == 0) throw ConfigError("grid: empty row");
    for (const auto& line : lines) {
      if (static_cast<int>(line.size()) != g.cols) throw ConfigError("grid: ragged rows");
      for (char c : line) {
        if (c != '#' && c != '.') throw ConfigError(std::string("grid: bad cell char '") + c + "'");
        g.target.push_back(c == '#');
      }
    }
    if (target_count_of(g) == 0) throw ConfigError("grid: target has no cells");
    return g;
  }

  int cell_count() const { return rows * cols; }
  bool in_bounds(int cell) const { return cell >= 0 && cell < cell_count(); }
  static int target_count_of(const GridSpec& g) {
    return static_cast<int>(std::count(g.target.begin(), g.target.end(), true));
  }
  int target_count() const { return target_count_of(*this); }
};

struct Placement {
  int cell = 0;
  int texture = 0;
};

// Board score for a set of placements. Out-of-bounds cells are not built but
// still count as wasted resources; textures outside the allowed set are a
// caller error. Duplicate placements on an occupied cell also count as waste.
inline double gridbuild_reward(const std::vector<Placement>& placements, const GridSpec& target,
                               const std::set<int>& allowed_textures = {0, 1, 2, 3}) {
  const int n_target = target.target_count();
  std::vector<int> board(static_cast<std::size_t>(target.cell_count()), -1);
  int extra = 0;
  for (const auto& p : placements) {
    if (!allowed_textures.count(p.texture))
      throw ValidationError("gridbuild: texture " + std::to_string(p.texture) + " not in the allowed set");
    if (!target.in_bounds(p.cell)) {
      ++extra;  // wasted, not an error
      continue;
    }
    if (board[static_cast<std::size_t>(p.cell)] >= 0) {
      ++extra;
      continue;
    }
    board[static_cast<std::size_t>(p.cell)] = p.texture;
    if (!target.target[static_cast<std::size_t>(p.cell)]) ++extra;
  }

  int covered = 0;
  for (int c = 0; c < target.cell_count(); ++c)
    if (target.target[static_cast<std::size_t>(c)] && board[static_cast<std::size_t>(c)] >= 0) ++covered;

  // Unordered side-sharing pairs among placed cells.
  int pairs = 0, same_texture_pairs = 0;
  auto consider = [&](int a, int b) {
    if (board[static_cast<std::size_t>(a)] < 0 || board[static_cast<std::size_t>(b)] < 0) return;
    ++pairs;
    if (board[static_cast<std::size_t>(a)] == board[static_cast<std::size_t>(b)]) ++same_texture_pairs;
  };
  for (int r = 0; r < target.rows; ++r)
    for (int c = 0; c < target.cols; ++c) {
      int cell = r * target.cols + c;
      if (c + 1 < target.cols) consider(cell, cell + 1);
      if (r + 1 < target.rows) consider(cell, cell + target.cols);
    }

  double reward = 2.0 * covered / n_target - 1.5 * extra / n_target;
  if (pairs > 0) reward -= static_cast<double>(same_texture_pairs) / (2.0 * pairs);
  return reward;
}

inline double hazard_penalty(double total_damage, double player_hp) {
  if (player_hp <= 0.0) throw ValidationError("hazard: player_hp must be positive");
  if (total_damage < 0.0) throw ValidationError("hazard: damage must be non-negative");
  return std::min(1.0, total_damage / player_hp) * 0.2;
}

struct GridBuildPayload {
  GridSpec grid;
  int max_len = 3;          // placements per agent per turn (plus END)
  bool hazard_enabled = false;
  double player_hp = 20.0;
  double spider_damage_per_turn = 2.0;
};

// Per-agent vocab: END, PAD, then one placement token per (cell, own-texture
// slot). Agent i owns global textures {2i, 2i+1}, so an agent can never emit
// a texture outside its assigned materials.
class GridBuildEnv final : public Env {
 public:
  GridBuildEnv(const GridBuildPayload& payload, int horizon)
      : payload_(payload), horizon_(horizon) {
    if (horizon_ < 1) throw ConfigError("gridbuild: horizon must be >= 1");
    if (payload_.max_len < 1) throw ConfigError("gridbuild: max_len must be >= 1");
    board_.assign(static_cast<std::size_t>(payload_.grid.cell_count()), -1);
  }

  static constexpr int kEnd = 0;
  static constexpr int kPad = 1;
  static constexpr int kPlacementBase = 2;

  int n_agents() const override { return 2; }
  int horizon() const override { return horizon_; }
  Vocab vocab(int) const override {
    return Vocab{kPlacementBase + payload_.grid.cell_count() * 2, kEnd, kPad};
  }
  int max_action_len(int) const override { return payload_.max_len; }
  double reward_cap() const override { return 2.0; }

  Placement decode(int agent, Token t) const {
    int idx = t - kPlacementBase;
    return Placement{idx / 2, agent * 2 + (idx % 2)};
  }

  std::vector<TokenSeq> reset(std::uint64_t seed) override {
    begin_episode();
    board_.assign(board_.size(), -1);
    extra_ = 0;
    damage_ = 0.0;
    (void)seed;
    TokenSeq obs = missing_cells_obs();
    return {obs, obs};
  }

  StepOutcome step(const std::vector<ActionSeq>& joint_action, RngStream&) override {
    pre_step(joint_action);
    for (int i = 0; i < 2; ++i)
      for (Token t : joint_action[static_cast<std::size_t>(i)].tokens) {
        if (t == kEnd || t == kPad) continue;
        Placement p = decode(i, t);
        if (board_[static_cast<std::size_t>(p.cell)] >= 0) {
          ++extra_;
        } else {
          board_[static_cast<std::size_t>(p.cell)] = p.texture;
          if (!payload_.grid.target[static_cast<std::size_t>(p.cell)]) ++extra_;
        }
      }

    StepOutcome out;
    out.reward = board_score();
    if (payload_.hazard_enabled) {
      damage_ += payload_.spider_damage_per_turn;
      out.reward -= hazard_penalty(damage_, payload_.player_hp);
    }
    out.terminated = false;
    TokenSeq obs = missing_cells_obs();
    out.next_obs = {obs, obs};
    post_step(out, coverage_fraction());
    return out;
  }

  std::unique_ptr<Env> clone() const override { return std::make_unique<GridBuildEnv>(*this); }

 private:
  double coverage_fraction() const {
    int covered = 0;
    for (int c = 0; c < payload_.grid.cell_count(); ++c)
      if (payload_.grid.target[static_cast<std::size_t>(c)] && board_[static_cast<std::size_t>(c)] >= 0) ++covered;
    return static_cast<double>(covered) / payload_.grid.target_count();
  }

  double board_score() const {
    const GridSpec& g = payload_.grid;
    int covered = 0;
    for (int c = 0; c < g.cell_count(); ++c)
      if (g.target[static_cast<std::size_t>(c)] && board_[static_cast<std::size_t>(c)] >= 0) ++covered;
    int pairs = 0, same = 0;
    auto consider = [&](int a, int b) {
      if (board_[static_cast<std::size_t>(a)] < 0 || board_[static_cast<std::size_t>(b)] < 0) return;
      ++pairs;
      if (board_[static_cast<std::size_t>(a)] == board_[static_cast<std::size_t>(b)]) ++same;
    };
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c) {
        int cell = r * g.cols + c;
        if (c + 1 < g.cols) consider(cell, cell + 1);
        if (r + 1 < g.rows) consider(cell, cell + g.cols);
      }
    double reward = 2.0 * covered / g.target_count() - 1.5 * extra_ / g.target_count();
    if (pairs > 0) reward -= static_cast<double>(same) / (2.0 * pairs);
    return reward;
  }

  // First missing target cells (capped at 8), encoded as texture-0 slots.
  TokenSeq missing_cells_obs() const {
    TokenSeq obs;
    for (int c = 0; c < payload_.grid.cell_count() && obs.size() < 8; ++c)
      if (payload_.grid.target[static_cast<std::size_t>(c)] && board_[static_cast<std::size_t>(c)] < 0)
        obs.push_back(kPlacementBase + c * 2);
    if (obs.empty()) obs.push_back(kPad);  // complete
    return obs;
  }

  GridBuildPayload payload_;
  int horizon_;
  std::vector<int> board_;
  int extra_ = 0;
  double damage_ = 0.0;
};

}  // namespace maac
