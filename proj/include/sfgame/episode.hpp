#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sfgame/grid.hpp"

namespace sfgame {

struct EpisodeResult {
  std::string task_id;
  std::size_t episode_index = 0;
  Outcome winner = Outcome::tie;
  /// sum_t gamma^t r_t from the ego's side.
  double ego_return = 0.0;
  /// Turns elapsed.
  int path_length = 0;
  GridState start;
};

/// One turn of a trajectory; positions are the pre-turn state.
struct TurnRecord {
  std::size_t episode = 0;
  int step = 0;
  Cell evader;
  Cell pursuer;
  std::size_t a = 0;
  std::size_t b = 0;
  double reward = 0.0;
  Outcome outcome = Outcome::ongoing;
};

}  // namespace sfgame
