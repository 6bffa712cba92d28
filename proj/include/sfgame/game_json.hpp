#pragma once

#include <json.hpp>

#include "sfgame/game.hpp"

namespace sfgame {

/// JSON form of a game; schema in docs/formats.md.
nlohmann::json game_to_json(const GameSpec& game);
/// Parses and validates; throws ConfigError on schema problems.
GameSpec game_from_json(const nlohmann::json& doc);

nlohmann::json policy_to_json(const JointPolicy& policy);

}  // namespace sfgame
