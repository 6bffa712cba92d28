#include "sfgame/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sfgame/errors.hpp"
#include "sfgame/game_json.hpp"

namespace sfgame {
namespace {

using nlohmann::json;

constexpr double kImprovementMargin = 1e-12;
constexpr std::size_t kMaxPolicyIterations = 1000;

void check_sizes(const GameSizes& sizes) {
  if (sizes.states == 0 || sizes.ego_actions == 0 || sizes.other_actions == 0) {
    throw ContractViolation("random game sizes must be >= 1");
  }
}

// Tracks the smallest slack of one audit and the game that produced it.
class SlackTracker {
 public:
  SlackTracker(BoundReport& report, const AuditOptions& options)
      : report_(report), options_(options) {
    report_.min_slack = std::numeric_limits<double>::infinity();
    report_.sharper_min_slack = std::numeric_limits<double>::infinity();
  }

  // Returns true when the check is a violation.
  bool check(double slack, const GameSpec& game, std::uint64_t seed, std::size_t s,
             std::size_t a, std::size_t b, double lhs, double rhs) {
    slack -= options_.bound_offset;
    ++report_.checks;
    const bool violated = slack < -options_.tolerance;
    if (violated) ++report_.violations;
    if (slack < report_.min_slack) {
      report_.min_slack = slack;
      if (violated) {
        report_.worst_case = {{"seed", seed}, {"state", s},         {"ego_action", a},
                              {"other_action", b}, {"lhs", lhs},   {"rhs", rhs},
                              {"slack", slack},     {"game", game_to_json(game)}};
      }
    }
    return violated;
  }

  void sharper(double slack) {
    slack -= options_.bound_offset;
    report_.sharper_min_slack = std::min(report_.sharper_min_slack, slack);
    if (slack < -options_.tolerance) ++report_.sharper_violations;
  }

 private:
  BoundReport& report_;
  const AuditOptions& options_;
};

void finish(BoundReport& report) {
  if (report.checks == 0) {
    report.min_slack = 0.0;
    report.sharper_min_slack = 0.0;
  }
  if (!std::isfinite(report.sharper_min_slack)) report.sharper_min_slack = 0.0;
}

std::vector<QTable> perturbed(const std::vector<QTable>& tables, double epsilon, Rng& rng) {
  std::vector<QTable> out = tables;
  if (epsilon <= 0.0) return out;
  for (QTable& q : out) {
    for (double& v : q.values()) v += rng.uniform(-epsilon, epsilon);
  }
  return out;
}

// Score of a GGPI policy: the ego half against a best responder (and the
// joint policy itself, whichever is lower) or the joint policy as drawn.
QTable score_policy(const GameSpec& game, const JointPolicy& policy, PolicyPairing pairing) {
  QTable joint = evaluate_policy(game, policy);
  if (pairing == PolicyPairing::uniform_joint) return joint;
  const QTable reply = evaluate_policy(game, best_response(game, policy));
  auto& v = joint.values();
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::min(v[k], reply.values()[k]);
  return joint;
}

}  // namespace

GameSpec random_game(std::uint64_t seed, const GameSizes& sizes, double gamma) {
  check_sizes(sizes);
  Rng rng = Rng(seed).split("random_game");
  GameSpec game =
      GameSpec::with_sizes(sizes.states, sizes.ego_actions, sizes.other_actions, gamma);
  std::vector<double> weight(sizes.states);
  for (std::size_t i = 0; i < game.num_entries(); ++i) {
    game.reward[i] = rng.uniform(-1.0, 1.0);
    double total = 0.0;
    for (double& w : weight) {
      // Keep every weight strictly positive so no row can be all zero.
      w = rng.uniform() + 1e-9;
      total += w;
    }
    auto& row = game.transition[i];
    row.reserve(sizes.states);
    for (std::size_t s = 0; s < sizes.states; ++s) row.push_back({s, weight[s] / total});
  }
  game.validate();
  return game;
}

GameSpec FeatureGame::with_reward(std::span<const double> w) const {
  GameSpec game = dynamics;
  game.reward = phi.contract(w, dynamics.discount).values();
  return game;
}

FeatureGame random_feature_game(std::uint64_t seed, const GameSizes& sizes, double gamma,
                                std::size_t dim) {
  if (dim == 0) throw DimensionError("feature dimension must be >= 1");
  FeatureGame out{random_game(seed, sizes, gamma),
                  FeatureTable(sizes.states, sizes.ego_actions, sizes.other_actions, dim)};
  Rng rng = Rng(seed).split("features");
  for (double& v : out.phi.values()) v = rng.uniform(-1.0, 1.0);
  std::fill(out.dynamics.reward.begin(), out.dynamics.reward.end(), 0.0);
  return out;
}

JointPolicy random_joint_policy(const GameSpec& game, Rng& rng) {
  JointPolicy policy;
  policy.ego.resize(game.num_states);
  policy.other.resize(game.num_states * game.num_ego_actions);
  for (auto& a : policy.ego) a = rng.index(game.num_ego_actions);
  for (auto& b : policy.other) b = rng.index(game.num_other_actions);
  return policy;
}

JointPolicy best_response(const GameSpec& game, const JointPolicy& policy) {
  policy.check_against(game);
  JointPolicy current = policy;
  std::fill(current.other.begin(), current.other.end(), 0);
  for (std::size_t iter = 0; iter < kMaxPolicyIterations; ++iter) {
    const QTable q = evaluate_policy(game, current);
    bool changed = false;
    for (std::size_t s = 0; s < game.num_states; ++s) {
      for (std::size_t a = 0; a < game.num_ego_actions; ++a) {
        const auto row = q.row(s, a);
        const std::size_t best = argmin_first(row);
        std::size_t& b = current.other[s * game.num_ego_actions + a];
        if (row[best] < row[b] - kImprovementMargin) {
          b = best;
          changed = true;
        }
      }
    }
    if (!changed) return current;
  }
  throw ContractViolation("best-response policy iteration did not settle");
}

std::string_view pairing_name(PolicyPairing pairing) {
  return pairing == PolicyPairing::best_response ? "best_response" : "uniform_joint";
}

PolicyPairing parse_pairing(std::string_view name) {
  if (name == "best_response") return PolicyPairing::best_response;
  if (name == "uniform_joint") return PolicyPairing::uniform_joint;
  throw ConfigError("unknown policy pairing '" + std::string(name) + "'");
}

BoundReport merge_reports(std::span<const BoundReport> reports) {
  BoundReport out;
  if (reports.empty()) return out;
  out.audit = reports.front().audit;
  out.min_slack = std::numeric_limits<double>::infinity();
  out.sharper_min_slack = std::numeric_limits<double>::infinity();
  for (const BoundReport& r : reports) {
    out.games_tested += r.games_tested;
    out.checks += r.checks;
    out.violations += r.violations;
    out.sharper_violations += r.sharper_violations;
    out.min_slack = std::min(out.min_slack, r.min_slack);
    out.sharper_min_slack = std::min(out.sharper_min_slack, r.sharper_min_slack);
    out.witness_max_error = std::max(out.witness_max_error, r.witness_max_error);
    if (out.worst_case.is_null() && !r.worst_case.is_null()) out.worst_case = r.worst_case;
  }
  return out;
}

json report_to_json(const BoundReport& report) {
  return {{"audit", report.audit},
          {"games_tested", report.games_tested},
          {"checks", report.checks},
          {"min_slack", report.min_slack},
          {"violations", report.violations},
          {"sharper_min_slack", report.sharper_min_slack},
          {"sharper_violations", report.sharper_violations},
          {"witness_max_error", report.witness_max_error},
          {"worst_case", report.worst_case}};
}

BoundReport audit_theorem1(std::span<const std::uint64_t> seeds, const GameSizes& sizes,
                           std::size_t n_policies, double epsilon_inject, double gamma,
                           const AuditOptions& options) {
  if (!(epsilon_inject >= 0.0)) throw ContractViolation("epsilon_inject must be >= 0");
  if (n_policies == 0) throw ContractViolation("the library needs at least one policy");
  BoundReport report;
  report.audit = "theorem1";
  SlackTracker tracker(report, options);
  const double penalty = 2.0 * epsilon_inject / (1.0 - gamma);
  const double sharper_penalty = epsilon_inject * (1.0 + gamma) / (1.0 - gamma);

  for (const std::uint64_t seed : seeds) {
    const GameSpec game = random_game(seed, sizes, gamma);
    Rng rng = Rng(seed).split("theorem1");
    std::vector<QTable> exact;
    for (std::size_t i = 0; i < n_policies; ++i) {
      JointPolicy policy = random_joint_policy(game, rng);
      if (options.pairing == PolicyPairing::best_response) {
        policy = best_response(game, policy);
      }
      exact.push_back(evaluate_policy(game, policy));
    }
    Rng noise = Rng(seed).split("theorem1/noise");
    const auto approx = perturbed(exact, epsilon_inject, noise);
    const JointPolicy ggpi = ggpi_policy(approx, options.aggregator);
    const QTable value = score_policy(game, ggpi, options.pairing);
    const QTable floor = aggregate_tables(exact, Aggregator::min_over_tasks);

    for (std::size_t s = 0; s < game.num_states; ++s) {
      for (std::size_t a = 0; a < game.num_ego_actions; ++a) {
        for (std::size_t b = 0; b < game.num_other_actions; ++b) {
          const double lhs = value(s, a, b);
          const double rhs = floor(s, a, b) - penalty;
          tracker.check(lhs - rhs, game, seed, s, a, b, lhs, rhs);
          tracker.sharper(lhs - (floor(s, a, b) - sharper_penalty));
        }
      }
    }
    ++report.games_tested;
  }
  finish(report);
  return report;
}

BoundReport audit_lemma1(std::span<const std::uint64_t> seeds, const GameSizes& sizes,
                         double gamma, const AuditOptions& options) {
  BoundReport report;
  report.audit = "lemma1";
  SlackTracker tracker(report, options);
  for (const std::uint64_t seed : seeds) {
    const GameSpec game_i = random_game(seed, sizes, gamma);
    Rng rng = Rng(seed).split("lemma1");
    GameSpec game_j = game_i;
    double delta = 0.0;
    for (std::size_t k = 0; k < game_j.reward.size(); ++k) {
      game_j.reward[k] = rng.uniform(-1.0, 1.0);
      delta = std::max(delta, std::abs(game_j.reward[k] - game_i.reward[k]));
    }
    const JointPolicy policy = random_joint_policy(game_i, rng);
    const QTable q_i = evaluate_policy(game_i, policy);
    const QTable q_j = evaluate_policy(game_j, policy);
    const double bound = delta / (1.0 - gamma);

    const double c = rng.uniform(-1.0, 1.0);
    GameSpec shifted = game_i;
    for (double& r : shifted.reward) r += c;
    const QTable q_c = evaluate_policy(shifted, policy);
    const double tight = std::abs(c) / (1.0 - gamma);

    for (std::size_t s = 0; s < game_i.num_states; ++s) {
      for (std::size_t a = 0; a < game_i.num_ego_actions; ++a) {
        for (std::size_t b = 0; b < game_i.num_other_actions; ++b) {
          const double gap = std::abs(q_i(s, a, b) - q_j(s, a, b));
          tracker.check(bound - gap, game_i, seed, s, a, b, gap, bound);
          // The witness must meet its bound with equality.
          const double shift_gap = std::abs(q_c(s, a, b) - q_i(s, a, b));
          const double error = std::abs(shift_gap - tight);
          report.witness_max_error = std::max(report.witness_max_error, error);
          if (error > options.tolerance) {
            ++report.violations;
            if (report.worst_case.is_null()) {
              report.worst_case = {{"seed", seed}, {"state", s}, {"ego_action", a},
                                   {"other_action", b}, {"witness_gap", shift_gap},
                                   {"witness_bound", tight}, {"game", game_to_json(shifted)}};
            }
          }
        }
      }
    }
    ++report.games_tested;
  }
  finish(report);
  return report;
}

BoundReport audit_proposition1(std::span<const std::uint64_t> seeds, const GameSizes& sizes,
                               double epsilon_inject, double gamma,
                               const PropositionParams& params, const AuditOptions& options) {
  if (!(epsilon_inject >= 0.0)) throw ContractViolation("epsilon_inject must be >= 0");
  if (params.library_size == 0) throw ContractViolation("the library needs at least one task");
  BoundReport report;
  report.audit = "proposition1";
  SlackTracker tracker(report, options);

  for (const std::uint64_t seed : seeds) {
    const FeatureGame fg = random_feature_game(seed, sizes, gamma, params.feature_dim);
    Rng rng = Rng(seed).split("proposition1");
    std::vector<double> w_target(params.feature_dim);
    for (double& v : w_target) v = rng.uniform(-1.0, 1.0);
    const GameSpec target = fg.with_reward(w_target);

    std::vector<QTable> views;
    double best_delta = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < params.library_size; ++j) {
      std::vector<double> w_j = w_target;
      for (double& v : w_j) v += rng.uniform(-params.task_spread, params.task_spread);
      const GameSpec task_j = fg.with_reward(w_j);
      const JointPolicy optimal = greedy_minmax_policy(solve_qvi(task_j, 1e-12).q);
      const FeatureTable psi = evaluate_policy_features(fg.dynamics, fg.phi, optimal);
      views.push_back(psi.contract(w_target, gamma));
      double delta = 0.0;
      for (std::size_t k = 0; k < target.reward.size(); ++k) {
        delta = std::max(delta, std::abs(target.reward[k] - task_j.reward[k]));
      }
      best_delta = std::min(best_delta, delta);
    }
    Rng noise = Rng(seed).split("proposition1/noise");
    const auto approx = perturbed(views, epsilon_inject, noise);
    const JointPolicy ggpi = ggpi_policy(approx, options.aggregator);
    const QTable value = score_policy(target, ggpi, options.pairing);
    const QTable optimal_value = solve_qvi(target, 1e-12).q;
    const double bound = 2.0 * best_delta / (1.0 - gamma) + 2.0 * epsilon_inject / (1.0 - gamma);

    for (std::size_t s = 0; s < target.num_states; ++s) {
      for (std::size_t a = 0; a < target.num_ego_actions; ++a) {
        for (std::size_t b = 0; b < target.num_other_actions; ++b) {
          const double lhs = optimal_value(s, a, b) - value(s, a, b);
          tracker.check(bound - lhs, target, seed, s, a, b, lhs, bound);
        }
      }
    }
    ++report.games_tested;
  }
  finish(report);
  return report;
}

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count) {
  std::vector<std::uint64_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = first + i;
  return out;
}

}  // namespace sfgame
