#pragma once

// Independent reference computations used only by tests. None of these call
// the solvers they are used to check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "sfgame/game.hpp"

namespace sfgame::testing {

/// Single-state game with a self-loop and constant reward.
inline GameSpec absorbing_game(double reward, double gamma, std::size_t na = 2,
                               std::size_t nb = 2) {
  GameSpec g = GameSpec::with_sizes(1, na, nb, gamma);
  for (std::size_t i = 0; i < g.num_entries(); ++i) {
    g.reward[i] = reward;
    g.transition[i] = {{0, 1.0}};
  }
  return g;
}

/// V^Pi by plain fixed-point iteration until the update is below 1e-14.
inline std::vector<double> iterate_policy_value(const GameSpec& g, const JointPolicy& p) {
  std::vector<double> v(g.num_states, 0.0);
  for (int iter = 0; iter < 100000; ++iter) {
    std::vector<double> next(g.num_states, 0.0);
    double change = 0.0;
    for (std::size_t s = 0; s < g.num_states; ++s) {
      const std::size_t a = p.ego[s];
      const std::size_t b = p.other[s * g.num_ego_actions + a];
      double total = g.r(s, a, b);
      if (!g.is_terminal(s)) {
        for (const Transition& t : g.next(s, a, b)) total += g.discount * t.prob * v[t.next];
      }
      next[s] = total;
      change = std::max(change, std::abs(next[s] - v[s]));
    }
    v = next;
    if (change < 1e-14) break;
  }
  return v;
}

/// Enumerates every deterministic (pi, mu) pair and returns
/// V*(s) = max_pi min_mu V^{pi,mu}(s), state by state.
inline std::vector<double> enumerate_maxmin_value(const GameSpec& g) {
  const std::size_t S = g.num_states;
  const std::size_t A = g.num_ego_actions;
  const std::size_t B = g.num_other_actions;
  auto power = [](std::size_t base, std::size_t exp) {
    std::size_t out = 1;
    for (std::size_t i = 0; i < exp; ++i) out *= base;
    return out;
  };
  const std::size_t n_pi = power(A, S);
  const std::size_t n_mu = power(B, S * A);
  std::vector<double> best(S, -std::numeric_limits<double>::infinity());
  JointPolicy p;
  p.ego.resize(S);
  p.other.resize(S * A);
  for (std::size_t i = 0; i < n_pi; ++i) {
    std::size_t code = i;
    for (std::size_t s = 0; s < S; ++s) {
      p.ego[s] = code % A;
      code /= A;
    }
    std::vector<double> worst(S, std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < n_mu; ++j) {
      std::size_t c = j;
      for (std::size_t k = 0; k < S * A; ++k) {
        p.other[k] = c % B;
        c /= B;
      }
      const auto v = iterate_policy_value(g, p);
      for (std::size_t s = 0; s < S; ++s) worst[s] = std::min(worst[s], v[s]);
    }
    for (std::size_t s = 0; s < S; ++s) best[s] = std::max(best[s], worst[s]);
  }
  return best;
}

/// Q(s,a,b) = r + gamma * sum P V from a state-value vector.
inline QTable q_from_values(const GameSpec& g, const std::vector<double>& v) {
  QTable q = QTable::like(g);
  for (std::size_t s = 0; s < g.num_states; ++s) {
    for (std::size_t a = 0; a < g.num_ego_actions; ++a) {
      for (std::size_t b = 0; b < g.num_other_actions; ++b) {
        double total = g.r(s, a, b);
        if (!g.is_terminal(s)) {
          for (const Transition& t : g.next(s, a, b)) total += g.discount * t.prob * v[t.next];
        }
        q(s, a, b) = total;
      }
    }
  }
  return q;
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace sfgame::testing
