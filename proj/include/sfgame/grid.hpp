#pragma once

// Pursuer-evader grid game. The evader is the ego (maximizer), the pursuer
// the other agent (minimizer). Coordinates are 0-indexed (x, y) with y
// growing upward; the default start row is y = 0.

#include <compare>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "sfgame/game.hpp"

namespace sfgame {

struct Cell {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

/// Action ids shared by both agents.
enum class Move : std::size_t { up = 0, down = 1, left = 2, right = 3 };
inline constexpr std::size_t kNumMoves = 4;

enum class Outcome { ongoing, evader_win, pursuer_win, tie };

/// "ongoing", "ewin", "pwin", "tie".
std::string_view outcome_name(Outcome outcome);

struct GridConfig {
  int width = 5;
  int height = 5;
  std::vector<Cell> walls;
  std::vector<Cell> goals;
  double agent_norm = 3.4641016151377544;  // sqrt(12)
  double goal_norm = 3.0;                  // sqrt(9)
  /// Value of the goal-indicator feature while the evader stands on a goal.
  double token = 1.0;
  int step_limit = 30;

  [[nodiscard]] std::size_t num_cells() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  /// 1 + 2 * number of goals.
  [[nodiscard]] std::size_t feature_dim() const { return 1 + 2 * goals.size(); }
  [[nodiscard]] bool inside(Cell c) const {
    return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height;
  }
  [[nodiscard]] bool is_wall(Cell c) const;
  /// Throws ConfigError when an invariant is broken.
  void validate() const;
};

/// 5x5 grid with goals top-center (2,4), middle (2,2) and bottom-center (2,0).
GridConfig default_grid();
/// 5 columns x 6 rows with goals (2,5), (2,4), (2,1), (2,0).
GridConfig quantitative_grid();

struct GridState {
  Cell evader;
  Cell pursuer;
  int steps_elapsed = 0;
  Outcome status = Outcome::ongoing;

  friend bool operator==(const GridState&, const GridState&) = default;
};

struct TaskWeights {
  std::string task_id;
  std::vector<double> w;
  /// Index into GridConfig::goals of the goal that ends the episode.
  std::size_t goal = 0;

  friend bool operator==(const TaskWeights&, const TaskWeights&) = default;
};

/// Goal whose indicator weight is largest; used when a task omits its goal.
std::size_t infer_goal(std::span<const double> w);

int manhattan(Cell p, Cell q);

/// Feature vector of the post-turn state `next`:
/// [d(e,o)/agent_norm, d(e,g1)/goal_norm, [e==g1], d(e,g2)/goal_norm, [e==g2], ...]
/// with distance components clamped to [0, 1].
std::vector<double> features(const GridConfig& cfg, const GridState& prev,
                             const GridState& next);

struct TurnResult {
  GridState next;
  std::vector<double> phi;
  Outcome outcome = Outcome::ongoing;
};

/// One full turn: the evader moves (catch, then active-goal check), then the
/// pursuer moves (catch check), then the step counter advances and the step
/// limit may declare a tie. Blocked moves leave the agent in place.
TurnResult step_turn(const GridConfig& cfg, const GridState& state, std::size_t ego_action,
                     std::size_t other_action, std::size_t active_goal);

/// Flat state index of the compiled game: evader_cell * |cells| + pursuer_cell.
std::size_t state_index(const GridConfig& cfg, const GridState& state);
GridState state_from_index(const GridConfig& cfg, std::size_t index);
/// |cells|^2 + 1; the last state absorbs finished episodes.
std::size_t compiled_state_count(const GridConfig& cfg);
std::size_t absorbing_state(const GridConfig& cfg);

/// phi(s, a, b) of the post-turn state for every compiled (s, a, b).
FeatureTable compile_features(const GridConfig& cfg, std::size_t active_goal);

/// Flattens the grid game for `task` into a GameSpec with reward phi . w.
GameSpec compile(const GridConfig& cfg, const TaskWeights& task, double discount = 0.9);

/// Preset task groups: "default" (Tasks 1-3, d = 7) and "quantitative"
/// (Tasks 1-4 on quantitative_grid(), d = 9).
std::vector<TaskWeights> task_weight_presets(std::string_view group = "default");

/// The nine start pairs x_e, x_o in {1,2,3} on row y = 0.
std::vector<GridState> canonical_starts();
/// Evader bottom-left, pursuer bottom-right: equal distance to every
/// default goal.
GridState equal_distance_start(const GridConfig& cfg);

}  // namespace sfgame
