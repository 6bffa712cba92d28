#include "sfgame/game_json.hpp"

#include <string>

#include "sfgame/errors.hpp"

namespace sfgame {

using nlohmann::json;

json game_to_json(const GameSpec& game) {
  json transition = json::array();
  json reward = json::array();
  for (std::size_t s = 0; s < game.num_states; ++s) {
    json t_s = json::array();
    json r_s = json::array();
    for (std::size_t a = 0; a < game.num_ego_actions; ++a) {
      json t_sa = json::array();
      json r_sa = json::array();
      for (std::size_t b = 0; b < game.num_other_actions; ++b) {
        json row = json::array();
        for (const Transition& t : game.next(s, a, b)) {
          row.push_back({{"next_state", t.next}, {"prob", t.prob}});
        }
        t_sa.push_back(std::move(row));
        r_sa.push_back(game.r(s, a, b));
      }
      t_s.push_back(std::move(t_sa));
      r_s.push_back(std::move(r_sa));
    }
    transition.push_back(std::move(t_s));
    reward.push_back(std::move(r_s));
  }
  json terminal = json::array();
  for (std::size_t s = 0; s < game.num_states; ++s) {
    if (game.is_terminal(s)) terminal.push_back(s);
  }
  return {{"num_states", game.num_states},
          {"num_ego_actions", game.num_ego_actions},
          {"num_other_actions", game.num_other_actions},
          {"discount", game.discount},
          {"terminal", std::move(terminal)},
          {"transition", std::move(transition)},
          {"reward", std::move(reward)}};
}

GameSpec game_from_json(const json& doc) {
  try {
    GameSpec game = GameSpec::with_sizes(
        doc.at("num_states").get<std::size_t>(), doc.at("num_ego_actions").get<std::size_t>(),
        doc.at("num_other_actions").get<std::size_t>(), doc.at("discount").get<double>());
    const json& transition = doc.at("transition");
    const json& reward = doc.at("reward");
    if (transition.size() != game.num_states || reward.size() != game.num_states) {
      throw ConfigError("transition/reward outer length must equal num_states");
    }
    for (std::size_t s = 0; s < game.num_states; ++s) {
      if (transition[s].size() != game.num_ego_actions ||
          reward[s].size() != game.num_ego_actions) {
        throw ConfigError("state " + std::to_string(s) + " has wrong ego action count");
      }
      for (std::size_t a = 0; a < game.num_ego_actions; ++a) {
        if (transition[s][a].size() != game.num_other_actions ||
            reward[s][a].size() != game.num_other_actions) {
          throw ConfigError("state " + std::to_string(s) + " has wrong other action count");
        }
        for (std::size_t b = 0; b < game.num_other_actions; ++b) {
          auto& row = game.transition[game.index(s, a, b)];
          for (const json& t : transition[s][a][b]) {
            row.push_back({t.at("next_state").get<std::size_t>(), t.at("prob").get<double>()});
          }
          game.reward[game.index(s, a, b)] = reward[s][a][b].get<double>();
        }
      }
    }
    for (const json& t : doc.at("terminal")) {
      const auto s = t.get<std::size_t>();
      if (s >= game.num_states) throw ConfigError("terminal state id out of range");
      game.terminal[s] = true;
    }
    game.validate();
    return game;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("game document: ") + e.what());
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("game document: ") + e.what());
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("game document: ") + e.what());
  }
}

json policy_to_json(const JointPolicy& policy) {
  return {{"ego", policy.ego}, {"other", policy.other}};
}

}  // namespace sfgame
