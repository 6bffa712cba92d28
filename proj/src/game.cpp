#include "sfgame/game.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sfgame/errors.hpp"

namespace sfgame {
namespace {

void require_shape(const QTable& q, const GameSpec& game) {
  if (!q.shaped_for(game)) {
    throw ShapeError("Q table shape " + std::to_string(q.num_states()) + "x" +
                     std::to_string(q.num_ego_actions()) + "x" +
                     std::to_string(q.num_other_actions()) + " does not match game " +
                     std::to_string(game.num_states) + "x" +
                     std::to_string(game.num_ego_actions) + "x" +
                     std::to_string(game.num_other_actions));
  }
}

// Row-stochastic matrix of the chain induced by a joint policy; terminal rows
// are left empty so that I - gamma*P pins V(t) = r(t, pi, mu).
Eigen::MatrixXd policy_system(const GameSpec& game, const JointPolicy& policy) {
  const auto n = static_cast<Eigen::Index>(game.num_states);
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
  for (std::size_t s = 0; s < game.num_states; ++s) {
    if (game.is_terminal(s)) continue;
    const std::size_t a = policy.ego_action(s);
    const std::size_t b = policy.other_action(s, a);
    for (const Transition& t : game.next(s, a, b)) {
      system(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t.next)) -=
          game.discount * t.prob;
    }
  }
  return system;
}

}  // namespace

GameSpec GameSpec::with_sizes(std::size_t states, std::size_t ego_actions,
                              std::size_t other_actions, double discount) {
  GameSpec game;
  game.num_states = states;
  game.num_ego_actions = ego_actions;
  game.num_other_actions = other_actions;
  game.discount = discount;
  game.transition.resize(game.num_entries());
  game.reward.assign(game.num_entries(), 0.0);
  game.terminal.assign(states, false);
  return game;
}

void GameSpec::validate() const {
  if (num_states == 0 || num_ego_actions == 0 || num_other_actions == 0) {
    throw ShapeError("game must have at least one state and one action per agent");
  }
  if (transition.size() != num_entries() || reward.size() != num_entries() ||
      terminal.size() != num_states) {
    throw ShapeError("game arrays do not match |S|x|A|x|B|");
  }
  if (!(discount >= 0.0 && discount < 1.0)) {
    throw ContractViolation("discount must lie in [0, 1), got " + std::to_string(discount));
  }
  for (std::size_t i = 0; i < num_entries(); ++i) {
    if (!std::isfinite(reward[i])) {
      throw ContractViolation("non-finite reward at flat index " + std::to_string(i));
    }
    double total = 0.0;
    for (const Transition& t : transition[i]) {
      if (t.next >= num_states) {
        throw ShapeError("transition to unknown state " + std::to_string(t.next));
      }
      if (!(t.prob >= 0.0)) {
        throw ContractViolation("negative transition probability at flat index " +
                                std::to_string(i));
      }
      total += t.prob;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw ContractViolation("transition row " + std::to_string(i) + " sums to " +
                              std::to_string(total));
    }
  }
}

QTable::QTable(std::size_t states, std::size_t ego_actions, std::size_t other_actions,
               double discount, double fill)
    : states_(states),
      ego_actions_(ego_actions),
      other_actions_(other_actions),
      discount_(discount),
      values_(states * ego_actions * other_actions, fill) {}

QTable QTable::like(const GameSpec& game, double fill) {
  return QTable(game.num_states, game.num_ego_actions, game.num_other_actions,
                game.discount, fill);
}

bool QTable::shaped_for(const GameSpec& game) const {
  return states_ == game.num_states && ego_actions_ == game.num_ego_actions &&
         other_actions_ == game.num_other_actions;
}

double QTable::max_min(std::size_t s) const {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < ego_actions_; ++a) {
    const auto r = row(s, a);
    best = std::max(best, *std::min_element(r.begin(), r.end()));
  }
  return best;
}

FeatureTable::FeatureTable(std::size_t states, std::size_t ego_actions,
                           std::size_t other_actions, std::size_t dim)
    : states_(states),
      ego_actions_(ego_actions),
      other_actions_(other_actions),
      dim_(dim),
      values_(states * ego_actions * other_actions * dim, 0.0) {}

double FeatureTable::dot(std::size_t s, std::size_t a, std::size_t b,
                         std::span<const double> w) const {
  const double* psi = values_.data() + offset(s, a, b);
  double total = 0.0;
  for (std::size_t k = 0; k < dim_; ++k) total += psi[k] * w[k];
  return total;
}

QTable FeatureTable::contract(std::span<const double> w, double discount) const {
  if (w.size() != dim_) {
    throw DimensionError("weight length " + std::to_string(w.size()) +
                         " does not match feature dimension " + std::to_string(dim_));
  }
  QTable q(states_, ego_actions_, other_actions_, discount);
  auto& out = q.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double* psi = values_.data() + i * dim_;
    double total = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) total += psi[k] * w[k];
    out[i] = total;
  }
  return q;
}

void JointPolicy::check_against(const GameSpec& game) const {
  if (ego.size() != game.num_states ||
      other.size() != game.num_states * game.num_ego_actions) {
    throw ContractViolation("joint policy is not total over the game's state/action spaces");
  }
  for (std::size_t a : ego) {
    if (a >= game.num_ego_actions) throw ContractViolation("ego action out of range");
  }
  for (std::size_t b : other) {
    if (b >= game.num_other_actions) throw ContractViolation("other action out of range");
  }
}

std::size_t argmax_first(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

std::size_t argmin_first(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] < v[best]) best = i;
  }
  return best;
}

QTable bellman_backup(const QTable& q, const GameSpec& game) {
  require_shape(q, game);
  std::vector<double> value(game.num_states);
  for (std::size_t s = 0; s < game.num_states; ++s) value[s] = q.max_min(s);

  QTable out = QTable::like(game);
  for (std::size_t s = 0; s < game.num_states; ++s) {
    const bool terminal = game.is_terminal(s);
    for (std::size_t a = 0; a < game.num_ego_actions; ++a) {
      for (std::size_t b = 0; b < game.num_other_actions; ++b) {
        double target = game.r(s, a, b);
        if (!terminal) {
          double expected = 0.0;
          for (const Transition& t : game.next(s, a, b)) expected += t.prob * value[t.next];
          target += game.discount * expected;
        }
        out(s, a, b) = target;
      }
    }
  }
  return out;
}

QviResult solve_qvi(const GameSpec& game, double tol, std::size_t max_iters) {
  if (!(tol > 0.0)) throw ContractViolation("solve_qvi tolerance must be positive");
  // Iterates are kept in binary128. In double, rounding (~1 ulp of |Q|)
  // dominates the sup-norm change once it falls below ~1e-3, and the
  // measured residuals stop contracting by gamma.
  using Wide = __float128;
  const std::size_t S = game.num_states;
  const std::size_t A = game.num_ego_actions;
  const std::size_t B = game.num_other_actions;
  std::vector<Wide> q(game.num_entries(), Wide(0));
  std::vector<Wide> next(q.size());
  std::vector<Wide> value(S);
  const Wide discount = game.discount;
  QviResult result;
  while (result.iterations < max_iters) {
    for (std::size_t s = 0; s < S; ++s) {
      Wide best = 0;
      for (std::size_t a = 0; a < A; ++a) {
        Wide worst = q[(s * A + a) * B];
        for (std::size_t b = 1; b < B; ++b) worst = std::min(worst, q[(s * A + a) * B + b]);
        best = a == 0 ? worst : std::max(best, worst);
      }
      value[s] = best;
    }
    Wide change = 0;
    for (std::size_t s = 0; s < S; ++s) {
      const bool terminal = game.is_terminal(s);
      for (std::size_t a = 0; a < A; ++a) {
        for (std::size_t b = 0; b < B; ++b) {
          const std::size_t i = (s * A + a) * B + b;
          Wide target = game.r(s, a, b);
          if (!terminal) {
            Wide expected = 0;
            for (const Transition& t : game.next(s, a, b)) expected += Wide(t.prob) * value[t.next];
            target += discount * expected;
          }
          next[i] = target;
          const Wide d = target > q[i] ? target - q[i] : q[i] - target;
          change = std::max(change, d);
        }
      }
    }
    q.swap(next);
    result.residual = static_cast<double>(change);
    result.residuals.push_back(result.residual);
    ++result.iterations;
    if (result.residual <= tol) {
      result.converged = true;
      break;
    }
  }
  result.q = QTable::like(game);
  for (std::size_t i = 0; i < q.size(); ++i) result.q.values()[i] = static_cast<double>(q[i]);
  return result;
}

JointPolicy greedy_minmax_policy(const QTable& q) {
  const std::size_t states = q.num_states();
  const std::size_t na = q.num_ego_actions();
  JointPolicy policy;
  policy.ego.resize(states);
  policy.other.resize(states * na);
  std::vector<double> worst(na);
  for (std::size_t s = 0; s < states; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      const auto r = q.row(s, a);
      const std::size_t b = argmin_first(r);
      policy.other[s * na + a] = b;
      worst[a] = r[b];
    }
    policy.ego[s] = argmax_first(worst);
  }
  return policy;
}

QTable evaluate_policy(const GameSpec& game, const JointPolicy& policy) {
  policy.check_against(game);
  const auto n = static_cast<Eigen::Index>(game.num_states);
  Eigen::VectorXd rhs(n);
  for (std::size_t s = 0; s < game.num_states; ++s) {
    const std::size_t a = policy.ego_action(s);
    rhs(static_cast<Eigen::Index>(s)) = game.r(s, a, policy.other_action(s, a));
  }
  const Eigen::VectorXd value = policy_system(game, policy).partialPivLu().solve(rhs);

  QTable q = QTable::like(game);
  for (std::size_t s = 0; s < game.num_states; ++s) {
    const bool terminal = game.is_terminal(s);
    for (std::size_t a = 0; a < game.num_ego_actions; ++a) {
      for (std::size_t b = 0; b < game.num_other_actions; ++b) {
        double total = game.r(s, a, b);
        if (!terminal) {
          double expected = 0.0;
          for (const Transition& t : game.next(s, a, b)) {
            expected += t.prob * value(static_cast<Eigen::Index>(t.next));
          }
          total += game.discount * expected;
        }
        q(s, a, b) = total;
      }
    }
  }
  return q;
}

FeatureTable evaluate_policy_features(const GameSpec& game, const FeatureTable& features,
                                      const JointPolicy& policy) {
  policy.check_against(game);
  if (features.num_states() != game.num_states ||
      features.num_ego_actions() != game.num_ego_actions ||
      features.num_other_actions() != game.num_other_actions) {
    throw ShapeError("feature table shape does not match game");
  }
  const std::size_t d = features.dim();
  const auto n = static_cast<Eigen::Index>(game.num_states);
  const auto cols = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd rhs(n, cols);
  for (std::size_t s = 0; s < game.num_states; ++s) {
    const std::size_t a = policy.ego_action(s);
    const auto phi = features(s, a, policy.other_action(s, a));
    for (std::size_t k = 0; k < d; ++k) {
      rhs(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k)) = phi[k];
    }
  }
  const Eigen::MatrixXd value = policy_system(game, policy).partialPivLu().solve(rhs);

  FeatureTable psi(game.num_states, game.num_ego_actions, game.num_other_actions, d);
  for (std::size_t s = 0; s < game.num_states; ++s) {
    const bool terminal = game.is_terminal(s);
    for (std::size_t a = 0; a < game.num_ego_actions; ++a) {
      for (std::size_t b = 0; b < game.num_other_actions; ++b) {
        auto out = psi(s, a, b);
        const auto phi = features(s, a, b);
        std::copy(phi.begin(), phi.end(), out.begin());
        if (terminal) continue;
        for (const Transition& t : game.next(s, a, b)) {
          const double weight = game.discount * t.prob;
          for (std::size_t k = 0; k < d; ++k) {
            out[k] += weight * value(static_cast<Eigen::Index>(t.next),
                                     static_cast<Eigen::Index>(k));
          }
        }
      }
    }
  }
  return psi;
}

double sup_distance(const QTable& lhs, const QTable& rhs) {
  if (lhs.values().size() != rhs.values().size()) {
    throw ShapeError("sup_distance: tables differ in shape");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < lhs.values().size(); ++i) {
    worst = std::max(worst, std::abs(lhs.values()[i] - rhs.values()[i]));
  }
  return worst;
}

}  // namespace sfgame
