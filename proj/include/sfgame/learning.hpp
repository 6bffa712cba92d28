#pragma once

// Tabular learners for the alternating pursuer-evader game: turn-based
// min-max Q-learning, successor-feature min-max learning with game
// generalized policy improvement (GGPI), its epsilon-reset ablation, and a
// two-agent adaptation of probabilistic policy reuse (PRQL).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sfgame/episode.hpp"
#include "sfgame/game.hpp"
#include "sfgame/grid.hpp"
#include "sfgame/rng.hpp"

namespace sfgame {

enum class AgentRole : std::size_t { ego = 0, other = 1 };

/// How library value estimates are combined across tasks before the
/// max-min selection.
enum class Aggregator { min_over_tasks, max_over_tasks };

enum class LearnerKind { minmax, sfminmax, sf_reset, prql };

/// Initial SF tables for a newly started task.
enum class NewTaskInit { copy_last, zero };

std::string_view learner_kind_name(LearnerKind kind);
LearnerKind parse_learner_kind(std::string_view name);
std::string_view aggregator_name(Aggregator agg);
Aggregator parse_aggregator(std::string_view name);
std::string_view new_task_init_name(NewTaskInit init);
NewTaskInit parse_new_task_init(std::string_view name);

/// Probabilistic policy reuse knobs (softmax temperature schedule and the
/// per-step decay of the reuse probability).
struct ReuseParams {
  double tau0 = 0.0;
  double delta_tau = 0.05;
  double upsilon = 0.95;
  double psi0 = 1.0;
};

struct LearnerConfig {
  double alpha = 0.5;
  double gamma = 0.9;
  double epsilon0 = 0.1;
  /// Multiplicative per-episode decay (minmax, prql, sf_reset).
  double epsilon_decay = 0.999;
  std::uint64_t seed = 0;
  Aggregator gpi_aggregator = Aggregator::min_over_tasks;
  NewTaskInit new_task_init = NewTaskInit::copy_last;
  ReuseParams reuse;

  /// Throws ConfigError when a rate is out of range.
  void validate() const;
};

/// Successor features of one task's policy, one table per agent role.
struct SFTable {
  std::string task_id;
  FeatureTable ego;
  FeatureTable other;

  SFTable() = default;
  SFTable(std::string id, std::size_t states, std::size_t ego_actions,
          std::size_t other_actions, std::size_t dim);

  FeatureTable& role(AgentRole r) { return r == AgentRole::ego ? ego : other; }
  [[nodiscard]] const FeatureTable& role(AgentRole r) const {
    return r == AgentRole::ego ? ego : other;
  }
  [[nodiscard]] std::size_t dim() const { return ego.dim(); }

  friend bool operator==(const SFTable&, const SFTable&) = default;
};

struct JointAction {
  std::size_t a = 0;
  std::size_t b = 0;
  friend bool operator==(const JointAction&, const JointAction&) = default;
};

struct Experience {
  std::size_t s = 0;
  std::size_t a = 0;
  std::size_t b = 0;
  double r = 0.0;
  std::size_t next = 0;
  bool terminal = false;
};

struct FeatureExperience {
  std::size_t s = 0;
  std::size_t a = 0;
  std::size_t b = 0;
  std::span<const double> phi;
  std::size_t next = 0;
  bool terminal = false;
};

/// Q(s,a,b) += alpha * (r + gamma * max_a' min_b' Q(s',a',b') - Q(s,a,b));
/// a terminal s' uses the target r.
void minmax_q_step(QTable& q, const Experience& step, const LearnerConfig& cfg);

/// psi(role,s,a,b) += alpha * (phi + gamma * psi(role,s',a',b') - psi(role,s,a,b)),
/// componentwise; a terminal s' uses the target phi.
void sf_td_step(SFTable& table, AgentRole role, const FeatureExperience& step,
                JointAction next_choice, const LearnerConfig& cfg);

/// Entrywise min (or max) over a non-empty set of Q tables.
QTable aggregate_tables(std::span<const QTable> tables, Aggregator agg);

/// Greedy max-min joint policy over the aggregated tables.
JointPolicy ggpi_policy(std::span<const QTable> tables, Aggregator agg);

/// GGPI selection at one state from the role-side SF tables of a library:
/// Q_i = psi_i . w, aggregated over i. The ego gets argmax_a min_b plus the
/// anticipated reply; the other agent gets argmin_b for the observed ego
/// action. Ties go to the lowest index.
JointAction ggpi_action(std::span<const SFTable> tables, std::span<const double> w,
                        std::size_t s, AgentRole role,
                        std::optional<std::size_t> observed_a = std::nullopt,
                        Aggregator agg = Aggregator::min_over_tasks);

/// Reuse gains over past policies for one task (PRQL).
class PolicyReuse {
 public:
  PolicyReuse() = default;
  PolicyReuse(std::size_t library_size, const ReuseParams& params);

  /// Softmax over gains at temperature tau: P(k) ~ exp(tau * W_k). Zero
  /// temperature is uniform.
  [[nodiscard]] std::size_t choose(Rng& rng) const;
  /// Running-mean gain update for policy k, then tau += delta_tau.
  void record(std::size_t k, double episode_return);

  [[nodiscard]] double tau() const { return tau_; }
  [[nodiscard]] const std::vector<double>& gains() const { return gains_; }
  [[nodiscard]] std::size_t size() const { return gains_.size(); }

 private:
  std::vector<double> gains_;
  std::vector<std::size_t> uses_;
  double tau_ = 0.0;
  double delta_tau_ = 0.05;
};

/// One PRQL half-turn decision. With probability `psi` (drawn from
/// `reuse_rng`) the agent follows the greedy rule of library[chosen];
/// otherwise it is epsilon-greedy on `current` (drawn from `explore_rng`).
std::size_t prql_select(std::span<const QTable> library, const QTable& current, std::size_t s,
                        AgentRole role, std::optional<std::size_t> observed_a,
                        std::size_t chosen, double psi, double epsilon, Rng& reuse_rng,
                        Rng& explore_rng);

struct QPair {
  QTable ego;
  QTable other;
  QTable& role(AgentRole r) { return r == AgentRole::ego ? ego : other; }
  [[nodiscard]] const QTable& role(AgentRole r) const {
    return r == AgentRole::ego ? ego : other;
  }
};

struct EpisodeMode {
  bool explore = true;
  bool learn = true;
};
inline constexpr EpisodeMode kTrain{true, true};
inline constexpr EpisodeMode kGreedy{false, false};

/// One algorithm instance (both agents) on one grid, trained over a
/// sequence of tasks. Single-owner; not shareable while training.
class Learner {
 public:
  Learner(LearnerKind kind, const LearnerConfig& cfg, const GridConfig& grid);

  /// Starts a new task. SF learners append a table pair (frozen library
  /// otherwise); Q learners archive the current tables and restart from
  /// zero.
  void begin_task(const TaskWeights& task);

  [[nodiscard]] LearnerKind kind() const { return kind_; }
  [[nodiscard]] const LearnerConfig& config() const { return cfg_; }
  [[nodiscard]] const GridConfig& grid() const { return grid_; }
  [[nodiscard]] const TaskWeights& task() const;
  [[nodiscard]] const std::vector<TaskWeights>& tasks() const { return tasks_; }
  [[nodiscard]] double epsilon() const { return epsilon_; }
  [[nodiscard]] bool uses_successor_features() const;

  /// Per-task training episode counts, aligned with tasks().
  [[nodiscard]] const std::vector<std::size_t>& episodes_per_task() const {
    return episodes_per_task_;
  }

  [[nodiscard]] const std::vector<SFTable>& sf_library() const { return sf_library_; }
  /// Archived Q tables of finished tasks (Q learners).
  [[nodiscard]] const std::vector<QPair>& q_library() const { return q_library_; }
  [[nodiscard]] const QPair& q() const { return q_; }
  [[nodiscard]] const PolicyReuse& reuse() const { return reuse_; }

  /// Greedy (no exploration) action of each agent at a compiled state index.
  [[nodiscard]] std::size_t greedy_ego(std::size_t s) const;
  [[nodiscard]] std::size_t greedy_other(std::size_t s, std::size_t a) const;

  /// Behaviour-policy choices; may consume randomness.
  std::size_t choose_ego(std::size_t s, std::size_t turn, const EpisodeMode& mode);
  std::size_t choose_other(std::size_t s, std::size_t a, std::size_t turn,
                           const EpisodeMode& mode);

  /// TD updates for the current task after a completed turn.
  void observe(std::size_t s, std::size_t a, std::size_t b, std::span<const double> phi,
               double reward, std::size_t next, bool terminal);

  void begin_episode(const EpisodeMode& mode);
  void end_episode(const EpisodeMode& mode, double ego_return);

  /// V(s0) = max_a min_b of the learner's current value estimate for the task.
  [[nodiscard]] double state_value(const GridState& state) const;
  /// Value estimate for the current task over every compiled (s, a, b).
  [[nodiscard]] QTable value_table() const;

  /// Restores a persisted learner. Tables must match the grid.
  void restore(std::vector<TaskWeights> tasks, std::vector<std::size_t> episodes,
               std::vector<SFTable> sf_library, std::vector<QPair> q_library,
               std::optional<QPair> current, double epsilon);

 private:
  [[nodiscard]] double sf_value(std::size_t s, std::size_t a, std::size_t b) const;
  [[nodiscard]] JointAction sf_greedy_own(std::size_t s, AgentRole role) const;
  [[nodiscard]] bool reuse_active() const;
  void rebuild_reuse();
  void require_task() const;

  LearnerKind kind_;
  LearnerConfig cfg_;
  GridConfig grid_;
  std::size_t states_;
  std::vector<TaskWeights> tasks_;
  std::vector<std::size_t> episodes_per_task_;
  double epsilon_;
  Rng explore_rng_;
  Rng reuse_rng_;

  std::vector<SFTable> sf_library_;
  QPair q_;
  std::vector<QPair> q_library_;
  std::vector<QTable> reuse_ego_;
  std::vector<QTable> reuse_other_;
  PolicyReuse reuse_;
  std::size_t chosen_policy_ = 0;
  std::size_t turn_ = 0;
};

/// Plays one episode from `start`: each turn the ego picks a, the other agent
/// observes a and picks b, the grid advances, and (when learning) the current
/// task's tables are updated. Appends per-turn records to `log` when given.
EpisodeResult run_episode(Learner& learner, const GridState& start, const EpisodeMode& mode,
                          std::size_t episode_index = 0, std::vector<TurnRecord>* log = nullptr);

}  // namespace sfgame
