#pragma once

// Finite alternating two-player zero-sum Markov games: the ego (maximizer)
// picks a, the other agent (minimizer) observes a and picks b, the game moves
// to s' ~ P(.|s,a,b) and pays r(s,a,b) to the ego.

#include <cstddef>
#include <span>
#include <vector>

namespace sfgame {

struct Transition {
  std::size_t next = 0;
  double prob = 0.0;
};

struct GameSpec {
  std::size_t num_states = 0;
  std::size_t num_ego_actions = 0;
  std::size_t num_other_actions = 0;
  /// Indexed by flat (s, a, b); each row is a sparse distribution over s'.
  std::vector<std::vector<Transition>> transition;
  /// Indexed by flat (s, a, b).
  std::vector<double> reward;
  double discount = 0.9;
  /// Terminal states absorb; their backups carry r only.
  std::vector<bool> terminal;

  [[nodiscard]] std::size_t index(std::size_t s, std::size_t a, std::size_t b) const {
    return (s * num_ego_actions + a) * num_other_actions + b;
  }
  [[nodiscard]] std::size_t num_entries() const {
    return num_states * num_ego_actions * num_other_actions;
  }
  [[nodiscard]] double r(std::size_t s, std::size_t a, std::size_t b) const {
    return reward[index(s, a, b)];
  }
  [[nodiscard]] const std::vector<Transition>& next(std::size_t s, std::size_t a,
                                                    std::size_t b) const {
    return transition[index(s, a, b)];
  }
  [[nodiscard]] bool is_terminal(std::size_t s) const { return terminal[s]; }

  /// Allocates dense storage for the given sizes with every state non-terminal.
  static GameSpec with_sizes(std::size_t states, std::size_t ego_actions,
                             std::size_t other_actions, double discount);

  /// Throws ShapeError / ContractViolation when an invariant is broken:
  /// row sums within 1e-12 of 1, discount in [0, 1), finite rewards.
  void validate() const;
};

/// Dense Q(s, a, b) table.
class QTable {
 public:
  QTable() = default;
  QTable(std::size_t states, std::size_t ego_actions, std::size_t other_actions,
         double discount, double fill = 0.0);
  static QTable like(const GameSpec& game, double fill = 0.0);

  double& operator()(std::size_t s, std::size_t a, std::size_t b) {
    return values_[(s * ego_actions_ + a) * other_actions_ + b];
  }
  double operator()(std::size_t s, std::size_t a, std::size_t b) const {
    return values_[(s * ego_actions_ + a) * other_actions_ + b];
  }
  /// Q(s, a, .) over the other agent's actions.
  [[nodiscard]] std::span<const double> row(std::size_t s, std::size_t a) const {
    return {values_.data() + (s * ego_actions_ + a) * other_actions_, other_actions_};
  }

  [[nodiscard]] std::size_t num_states() const { return states_; }
  [[nodiscard]] std::size_t num_ego_actions() const { return ego_actions_; }
  [[nodiscard]] std::size_t num_other_actions() const { return other_actions_; }
  [[nodiscard]] double discount() const { return discount_; }
  [[nodiscard]] bool shaped_for(const GameSpec& game) const;

  [[nodiscard]] std::vector<double>& values() { return values_; }
  [[nodiscard]] const std::vector<double>& values() const { return values_; }

  /// max_a min_b Q(s, a, b).
  [[nodiscard]] double max_min(std::size_t s) const;

  friend bool operator==(const QTable&, const QTable&) = default;

 private:
  std::size_t states_ = 0;
  std::size_t ego_actions_ = 0;
  std::size_t other_actions_ = 0;
  double discount_ = 0.0;
  std::vector<double> values_;
};

/// Dense vector-valued table psi(s, a, b) in R^d; also used for features phi.
class FeatureTable {
 public:
  FeatureTable() = default;
  FeatureTable(std::size_t states, std::size_t ego_actions, std::size_t other_actions,
               std::size_t dim);

  std::span<double> operator()(std::size_t s, std::size_t a, std::size_t b) {
    return {values_.data() + offset(s, a, b), dim_};
  }
  std::span<const double> operator()(std::size_t s, std::size_t a, std::size_t b) const {
    return {values_.data() + offset(s, a, b), dim_};
  }
  /// psi(s, a, b) . w
  [[nodiscard]] double dot(std::size_t s, std::size_t a, std::size_t b,
                           std::span<const double> w) const;
  /// Q table psi . w, one entry per (s, a, b).
  [[nodiscard]] QTable contract(std::span<const double> w, double discount) const;

  [[nodiscard]] std::size_t num_states() const { return states_; }
  [[nodiscard]] std::size_t num_ego_actions() const { return ego_actions_; }
  [[nodiscard]] std::size_t num_other_actions() const { return other_actions_; }
  [[nodiscard]] std::size_t dim() const { return dim_; }
  [[nodiscard]] std::vector<double>& values() { return values_; }
  [[nodiscard]] const std::vector<double>& values() const { return values_; }

  friend bool operator==(const FeatureTable&, const FeatureTable&) = default;

 private:
  [[nodiscard]] std::size_t offset(std::size_t s, std::size_t a, std::size_t b) const {
    return ((s * ego_actions_ + a) * other_actions_ + b) * dim_;
  }

  std::size_t states_ = 0;
  std::size_t ego_actions_ = 0;
  std::size_t other_actions_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

/// Deterministic stationary joint policy: ego pi(s), other mu(s, a).
struct JointPolicy {
  std::vector<std::size_t> ego;    // size |S|
  std::vector<std::size_t> other;  // size |S| * |A|, indexed s * |A| + a

  [[nodiscard]] std::size_t ego_action(std::size_t s) const { return ego[s]; }
  [[nodiscard]] std::size_t other_action(std::size_t s, std::size_t a) const {
    return other[s * (other.size() / ego.size()) + a];
  }
  /// Throws ContractViolation unless both mappings are total over the game.
  void check_against(const GameSpec& game) const;

  friend bool operator==(const JointPolicy&, const JointPolicy&) = default;
};

struct QviResult {
  QTable q;
  std::size_t iterations = 0;
  double residual = 0.0;
  bool converged = false;
  /// Sup-norm change after each sweep.
  std::vector<double> residuals;
};

inline constexpr double kDefaultQviTolerance = 1e-10;
inline constexpr std::size_t kDefaultQviMaxIters = 100000;
inline constexpr double kPolicyEvalTolerance = 1e-12;

/// (FQ)(s,a,b) = r(s,a,b) + gamma * sum_s' P(s'|s,a,b) max_a' min_b' Q(s',a',b').
QTable bellman_backup(const QTable& q, const GameSpec& game);

/// Iterates bellman_backup from Q = 0 until the sup-norm change is <= tol.
/// A run that hits max_iters comes back with converged == false.
[[nodiscard]] QviResult solve_qvi(const GameSpec& game, double tol = kDefaultQviTolerance,
                                  std::size_t max_iters = kDefaultQviMaxIters);

/// ego(s) = argmax_a min_b Q, other(s, a) = argmin_b Q; ties go to the lowest index.
JointPolicy greedy_minmax_policy(const QTable& q);

/// Exact Q^Pi of a joint policy (dense linear solve).
QTable evaluate_policy(const GameSpec& game, const JointPolicy& policy);

/// Exact successor features psi^Pi = phi + gamma P_Pi psi, componentwise.
FeatureTable evaluate_policy_features(const GameSpec& game, const FeatureTable& features,
                                      const JointPolicy& policy);

[[nodiscard]] double sup_distance(const QTable& lhs, const QTable& rhs);

/// Index of the largest / smallest element, lowest index on ties.
std::size_t argmax_first(std::span<const double> v);
std::size_t argmin_first(std::span<const double> v);

}  // namespace sfgame
