#pragma once

// Empirical checks of the GGPI improvement bound, the reward-similarity
// bound and their composition on seeded random alternating games, using the
// exact solvers in game.hpp.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfgame/game.hpp"
#include "sfgame/learning.hpp"
#include "sfgame/rng.hpp"

namespace sfgame {

struct GameSizes {
  std::size_t states = 6;
  std::size_t ego_actions = 3;
  std::size_t other_actions = 3;
};

/// Rewards U[-1, 1]; each transition row is i.i.d. U(0, 1) weights
/// normalized to sum to one. Deterministic in `seed`.
GameSpec random_game(std::uint64_t seed, const GameSizes& sizes, double gamma);

/// Shared dynamics with per-(s,a,b) features phi in [-1, 1]^dim; a task's
/// reward is phi . w.
struct FeatureGame {
  GameSpec dynamics;
  FeatureTable phi;

  /// Copy of the dynamics with reward phi . w.
  [[nodiscard]] GameSpec with_reward(std::span<const double> w) const;
};

FeatureGame random_feature_game(std::uint64_t seed, const GameSizes& sizes, double gamma,
                                std::size_t dim);

/// Uniform draw over deterministic joint policies.
JointPolicy random_joint_policy(const GameSpec& game, Rng& rng);

/// Exact best reply of the minimizing agent to a fixed ego policy, at every
/// (s, a) (policy iteration; ties to the lowest index). Keeps policy.ego.
JointPolicy best_response(const GameSpec& game, const JointPolicy& policy);

/// How library policies are formed and how the GGPI policy is scored.
enum class PolicyPairing {
  /// Random ego policy paired with the other agent's exact best response;
  /// every policy (library and GGPI) is scored against a best responder.
  best_response,
  /// Both halves drawn uniformly; the GGPI joint policy is scored as is.
  uniform_joint,
};

std::string_view pairing_name(PolicyPairing pairing);
PolicyPairing parse_pairing(std::string_view name);

struct AuditOptions {
  double tolerance = 1e-9;
  /// Test hook: subtracted from every measured slack.
  double bound_offset = 0.0;
  PolicyPairing pairing = PolicyPairing::best_response;
  Aggregator aggregator = Aggregator::min_over_tasks;
};

struct BoundReport {
  std::string audit;
  std::size_t games_tested = 0;
  std::size_t checks = 0;
  double min_slack = 0.0;
  std::size_t violations = 0;
  /// Violating game (JSON) plus indices, or null.
  nlohmann::json worst_case;
  /// Theorem audit only: the same check with the one-step constant
  /// eps (1 + gamma) / (1 - gamma) in place of 2 eps / (1 - gamma).
  double sharper_min_slack = 0.0;
  std::size_t sharper_violations = 0;
  /// Lemma audit only: largest deviation from equality of the constant-shift
  /// witness.
  double witness_max_error = 0.0;

  [[nodiscard]] bool passed() const { return violations == 0; }
};

/// Counts add, slacks take the minimum, the first worst case is kept.
BoundReport merge_reports(std::span<const BoundReport> reports);

nlohmann::json report_to_json(const BoundReport& report);

/// Per game: n library policies with exact Q^{Pi_i}, entrywise U[-eps, eps]
/// perturbation to Q~_i, GGPI policy from the Q~ set, exact evaluation, and
/// the pointwise check Q^Pi >= min_i Q^{Pi_i} - 2 eps / (1 - gamma).
BoundReport audit_theorem1(std::span<const std::uint64_t> seeds, const GameSizes& sizes,
                           std::size_t n_policies, double epsilon_inject, double gamma = 0.9,
                           const AuditOptions& options = {});

/// Per game: reward pair (r_i, r_j) and a uniform joint policy; checks
/// |Q_i - Q_j| <= delta_ij / (1 - gamma) and the constant-shift witness
/// r_j = r_i + c, which must hold with equality.
BoundReport audit_lemma1(std::span<const std::uint64_t> seeds, const GameSizes& sizes,
                         double gamma = 0.9, const AuditOptions& options = {});

struct PropositionParams {
  std::size_t feature_dim = 4;
  std::size_t library_size = 2;
  /// Library weights are the target weights plus U[-spread, spread] noise.
  double task_spread = 0.5;
};

/// Per game: library of optimal policies for tasks j, GGPI policy for the
/// target task i from perturbed SF views, and the check
/// Q*_i - Q^Pi_i <= 2 min_j delta_ij / (1 - gamma) + 2 eps / (1 - gamma).
BoundReport audit_proposition1(std::span<const std::uint64_t> seeds, const GameSizes& sizes,
                               double epsilon_inject, double gamma = 0.9,
                               const PropositionParams& params = {},
                               const AuditOptions& options = {});

/// Seeds first, first + 1, ..., first + count - 1.
std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count);

}  // namespace sfgame
