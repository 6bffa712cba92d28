#include "sfgame/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

#include "sfgame/errors.hpp"

namespace sfgame {
namespace {

Cell shifted(Cell c, std::size_t action) {
  switch (static_cast<Move>(action)) {
    case Move::up:
      return {c.x, c.y + 1};
    case Move::down:
      return {c.x, c.y - 1};
    case Move::left:
      return {c.x - 1, c.y};
    case Move::right:
      return {c.x + 1, c.y};
  }
  throw ContractViolation("action id out of range: " + std::to_string(action));
}

Cell apply_move(const GridConfig& cfg, Cell c, std::size_t action) {
  const Cell target = shifted(c, action);
  return (cfg.inside(target) && !cfg.is_wall(target)) ? target : c;
}

std::size_t cell_index(const GridConfig& cfg, Cell c) {
  return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(cfg.width) +
         static_cast<std::size_t>(c.x);
}

Cell cell_at(const GridConfig& cfg, std::size_t index) {
  const auto width = static_cast<std::size_t>(cfg.width);
  return {static_cast<int>(index % width), static_cast<int>(index / width)};
}

// Turn dynamics without the step limit; shared by the simulator and compile().
GridState advance(const GridConfig& cfg, const GridState& state, std::size_t ego_action,
                  std::size_t other_action, std::size_t active_goal) {
  GridState next = state;
  next.evader = apply_move(cfg, state.evader, ego_action);
  if (next.evader == next.pursuer) {
    next.status = Outcome::pursuer_win;
  } else if (next.evader == cfg.goals[active_goal]) {
    next.status = Outcome::evader_win;
  } else {
    next.pursuer = apply_move(cfg, state.pursuer, other_action);
    if (next.pursuer == next.evader) next.status = Outcome::pursuer_win;
  }
  next.steps_elapsed = state.steps_elapsed + 1;
  return next;
}

}  // namespace

std::string_view outcome_name(Outcome outcome) {
  switch (outcome) {
    case Outcome::ongoing:
      return "ongoing";
    case Outcome::evader_win:
      return "ewin";
    case Outcome::pursuer_win:
      return "pwin";
    case Outcome::tie:
      return "tie";
  }
  return "unknown";
}

bool GridConfig::is_wall(Cell c) const {
  return std::find(walls.begin(), walls.end(), c) != walls.end();
}

void GridConfig::validate() const {
  if (width < 1 || height < 1) throw ConfigError("grid width and height must be >= 1");
  if (goals.empty()) throw ConfigError("grid needs at least one goal");
  for (std::size_t i = 0; i < goals.size(); ++i) {
    if (!inside(goals[i])) {
      throw ConfigError("goal " + std::to_string(i + 1) + " lies outside the grid");
    }
    if (is_wall(goals[i])) throw ConfigError("goal " + std::to_string(i + 1) + " is a wall");
    for (std::size_t j = 0; j < i; ++j) {
      if (goals[i] == goals[j]) throw ConfigError("goals must be distinct");
    }
  }
  for (const Cell& w : walls) {
    if (!inside(w)) throw ConfigError("wall outside the grid");
  }
  if (!(agent_norm > 0.0) || !(goal_norm > 0.0)) {
    throw ConfigError("feature normalizers must be positive");
  }
  if (step_limit < 1) throw ConfigError("step_limit must be >= 1");
}

GridConfig default_grid() {
  GridConfig cfg;
  cfg.goals = {{2, 4}, {2, 2}, {2, 0}};
  return cfg;
}

GridConfig quantitative_grid() {
  GridConfig cfg;
  cfg.height = 6;
  cfg.goals = {{2, 5}, {2, 4}, {2, 1}, {2, 0}};
  return cfg;
}

std::size_t infer_goal(std::span<const double> w) {
  std::size_t best = 0;
  double best_weight = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 2 < w.size(); ++k) {
    if (w[2 * k + 2] > best_weight) {
      best_weight = w[2 * k + 2];
      best = k;
    }
  }
  return best;
}

int manhattan(Cell p, Cell q) { return std::abs(p.x - q.x) + std::abs(p.y - q.y); }

std::vector<double> features(const GridConfig& cfg, const GridState& /*prev*/,
                             const GridState& next) {
  std::vector<double> phi(cfg.feature_dim(), 0.0);
  phi[0] = std::min(1.0, manhattan(next.evader, next.pursuer) / cfg.agent_norm);
  for (std::size_t k = 0; k < cfg.goals.size(); ++k) {
    phi[2 * k + 1] = std::min(1.0, manhattan(next.evader, cfg.goals[k]) / cfg.goal_norm);
    phi[2 * k + 2] = next.evader == cfg.goals[k] ? cfg.token : 0.0;
  }
  return phi;
}

TurnResult step_turn(const GridConfig& cfg, const GridState& state, std::size_t ego_action,
                     std::size_t other_action, std::size_t active_goal) {
  if (state.status != Outcome::ongoing) {
    throw ContractViolation("step_turn called on a finished episode");
  }
  if (ego_action >= kNumMoves || other_action >= kNumMoves) {
    throw ContractViolation("action id out of range");
  }
  if (active_goal >= cfg.goals.size()) throw ContractViolation("active goal out of range");
  if (!cfg.inside(state.evader) || !cfg.inside(state.pursuer)) {
    throw ContractViolation("agent position outside the grid");
  }

  TurnResult result;
  result.next = advance(cfg, state, ego_action, other_action, active_goal);
  if (result.next.status == Outcome::ongoing && result.next.steps_elapsed >= cfg.step_limit) {
    result.next.status = Outcome::tie;
  }
  result.outcome = result.next.status;
  result.phi = features(cfg, state, result.next);
  return result;
}

std::size_t state_index(const GridConfig& cfg, const GridState& state) {
  return cell_index(cfg, state.evader) * cfg.num_cells() + cell_index(cfg, state.pursuer);
}

GridState state_from_index(const GridConfig& cfg, std::size_t index) {
  if (index >= cfg.num_cells() * cfg.num_cells()) {
    throw ContractViolation("state index does not name a grid position");
  }
  GridState state;
  state.evader = cell_at(cfg, index / cfg.num_cells());
  state.pursuer = cell_at(cfg, index % cfg.num_cells());
  return state;
}

std::size_t compiled_state_count(const GridConfig& cfg) {
  return cfg.num_cells() * cfg.num_cells() + 1;
}

std::size_t absorbing_state(const GridConfig& cfg) { return compiled_state_count(cfg) - 1; }

FeatureTable compile_features(const GridConfig& cfg, std::size_t active_goal) {
  cfg.validate();
  if (active_goal >= cfg.goals.size()) throw ContractViolation("active goal out of range");
  const std::size_t states = compiled_state_count(cfg);
  FeatureTable phi(states, kNumMoves, kNumMoves, cfg.feature_dim());
  for (std::size_t s = 0; s + 1 < states; ++s) {
    const GridState state = state_from_index(cfg, s);
    for (std::size_t a = 0; a < kNumMoves; ++a) {
      for (std::size_t b = 0; b < kNumMoves; ++b) {
        const GridState next = advance(cfg, state, a, b, active_goal);
        const auto f = features(cfg, state, next);
        std::copy(f.begin(), f.end(), phi(s, a, b).begin());
      }
    }
  }
  return phi;
}

GameSpec compile(const GridConfig& cfg, const TaskWeights& task, double discount) {
  cfg.validate();
  if (task.w.size() != cfg.feature_dim()) {
    throw DimensionError("task '" + task.task_id + "' has " + std::to_string(task.w.size()) +
                         " weights but the grid has " + std::to_string(cfg.feature_dim()) +
                         " features");
  }
  if (task.goal >= cfg.goals.size()) throw ContractViolation("task goal out of range");

  const std::size_t states = compiled_state_count(cfg);
  const std::size_t absorbing = absorbing_state(cfg);
  GameSpec game = GameSpec::with_sizes(states, kNumMoves, kNumMoves, discount);
  game.terminal[absorbing] = true;
  for (std::size_t a = 0; a < kNumMoves; ++a) {
    for (std::size_t b = 0; b < kNumMoves; ++b) {
      game.transition[game.index(absorbing, a, b)] = {{absorbing, 1.0}};
    }
  }
  for (std::size_t s = 0; s < absorbing; ++s) {
    const GridState state = state_from_index(cfg, s);
    for (std::size_t a = 0; a < kNumMoves; ++a) {
      for (std::size_t b = 0; b < kNumMoves; ++b) {
        const GridState next = advance(cfg, state, a, b, task.goal);
        const auto phi = features(cfg, state, next);
        double r = 0.0;
        for (std::size_t k = 0; k < phi.size(); ++k) r += phi[k] * task.w[k];
        const std::size_t flat = game.index(s, a, b);
        game.reward[flat] = r;
        const std::size_t target =
            next.status == Outcome::ongoing ? state_index(cfg, next) : absorbing;
        game.transition[flat] = {{target, 1.0}};
      }
    }
  }
  return game;
}

std::vector<TaskWeights> task_weight_presets(std::string_view group) {
  if (group == "default") {
    return {
        {"task1", {0.7, -1.3, 0.7, 0, 0, 0, 0}, 0},
        {"task2", {0.7, 0, 0, -1.3, 0.7, 0, 0}, 1},
        {"task3", {0.7, 0, 0, 0, 0, -1.3, 0.7}, 2},
    };
  }
  if (group == "quantitative") {
    return {
        {"task1", {0.7, -1.3, 0.7, 0, 0, 0, 0, 0, 0}, 0},
        {"task2", {0.7, 0, 0, -1.3, 0.7, 0, 0, 0, 0}, 1},
        {"task3", {0.7, 0, 0, 0, 0, -1.3, 0.7, 0, 0}, 2},
        {"task4", {0.7, 0, 0, 0, 0, 0, 0, -1.3, 0.7}, 3},
    };
  }
  throw ConfigError("unknown preset group '" + std::string(group) + "'");
}

std::vector<GridState> canonical_starts() {
  std::vector<GridState> starts;
  for (int xe = 1; xe <= 3; ++xe) {
    for (int xo = 1; xo <= 3; ++xo) {
      starts.push_back({{xe, 0}, {xo, 0}, 0, Outcome::ongoing});
    }
  }
  return starts;
}

GridState equal_distance_start(const GridConfig& cfg) {
  return {{0, 0}, {cfg.width - 1, 0}, 0, Outcome::ongoing};
}

}  // namespace sfgame
