#include "sfgame/learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sfgame/errors.hpp"

namespace sfgame {
namespace {

// Greedy (a, b) of a scalar table: a = argmax_a min_b, b = argmin_b at a.
JointAction maxmin_action(const QTable& q, std::size_t s) {
  const std::size_t na = q.num_ego_actions();
  std::vector<double> worst(na);
  std::vector<std::size_t> reply(na);
  for (std::size_t a = 0; a < na; ++a) {
    const auto row = q.row(s, a);
    reply[a] = argmin_first(row);
    worst[a] = row[reply[a]];
  }
  const std::size_t a = argmax_first(worst);
  return {a, reply[a]};
}

std::size_t role_greedy(const QTable& q, std::size_t s, AgentRole role,
                        std::optional<std::size_t> observed_a) {
  if (role == AgentRole::ego) return maxmin_action(q, s).a;
  if (!observed_a) throw ContractViolation("the other agent must observe the ego action");
  return argmin_first(q.row(s, *observed_a));
}

void check_range(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

std::string_view learner_kind_name(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::minmax:
      return "minmax";
    case LearnerKind::sfminmax:
      return "sfminmax";
    case LearnerKind::sf_reset:
      return "sf_reset";
    case LearnerKind::prql:
      return "prql";
  }
  return "unknown";
}

LearnerKind parse_learner_kind(std::string_view name) {
  for (LearnerKind k : {LearnerKind::minmax, LearnerKind::sfminmax, LearnerKind::sf_reset,
                        LearnerKind::prql}) {
    if (learner_kind_name(k) == name) return k;
  }
  throw ConfigError("unknown algorithm '" + std::string(name) +
                    "' (expected minmax, sfminmax, sf_reset or prql)");
}

std::string_view aggregator_name(Aggregator agg) {
  return agg == Aggregator::min_over_tasks ? "min_over_tasks" : "max_over_tasks";
}

Aggregator parse_aggregator(std::string_view name) {
  if (name == "min_over_tasks") return Aggregator::min_over_tasks;
  if (name == "max_over_tasks") return Aggregator::max_over_tasks;
  throw ConfigError("unknown gpi_aggregator '" + std::string(name) + "'");
}

std::string_view new_task_init_name(NewTaskInit init) {
  return init == NewTaskInit::copy_last ? "copy_last" : "zero";
}

NewTaskInit parse_new_task_init(std::string_view name) {
  if (name == "copy_last") return NewTaskInit::copy_last;
  if (name == "zero") return NewTaskInit::zero;
  throw ConfigError("unknown new_task_init '" + std::string(name) + "'");
}

void LearnerConfig::validate() const {
  check_range(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
  check_range(gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0, 1)");
  check_range(epsilon0 >= 0.0 && epsilon0 <= 1.0, "epsilon0 must lie in [0, 1]");
  check_range(epsilon_decay > 0.0 && epsilon_decay <= 1.0, "epsilon_decay must lie in (0, 1]");
  check_range(reuse.upsilon > 0.0 && reuse.upsilon <= 1.0, "reuse upsilon must lie in (0, 1]");
  check_range(reuse.psi0 >= 0.0 && reuse.psi0 <= 1.0, "reuse psi0 must lie in [0, 1]");
  check_range(reuse.delta_tau >= 0.0 && reuse.tau0 >= 0.0, "reuse temperatures must be >= 0");
}

SFTable::SFTable(std::string id, std::size_t states, std::size_t ego_actions,
                 std::size_t other_actions, std::size_t dim)
    : task_id(std::move(id)),
      ego(states, ego_actions, other_actions, dim),
      other(states, ego_actions, other_actions, dim) {}

void minmax_q_step(QTable& q, const Experience& step, const LearnerConfig& cfg) {
  double target = step.r;
  if (!step.terminal) target += cfg.gamma * q.max_min(step.next);
  double& x = q(step.s, step.a, step.b);
  x += cfg.alpha * (target - x);
}

void sf_td_step(SFTable& table, AgentRole role, const FeatureExperience& step,
                JointAction next_choice, const LearnerConfig& cfg) {
  FeatureTable& psi = table.role(role);
  if (step.phi.size() != psi.dim()) {
    throw DimensionError("feature length " + std::to_string(step.phi.size()) +
                         " does not match SF dimension " + std::to_string(psi.dim()));
  }
  // Copy the bootstrap row first: (s', a', b') may alias (s, a, b).
  std::vector<double> target(step.phi.begin(), step.phi.end());
  if (!step.terminal) {
    const auto next = psi(step.next, next_choice.a, next_choice.b);
    for (std::size_t k = 0; k < target.size(); ++k) target[k] += cfg.gamma * next[k];
  }
  auto x = psi(step.s, step.a, step.b);
  for (std::size_t k = 0; k < target.size(); ++k) x[k] += cfg.alpha * (target[k] - x[k]);
}

QTable aggregate_tables(std::span<const QTable> tables, Aggregator agg) {
  if (tables.empty()) throw ContractViolation("cannot aggregate an empty library");
  QTable out = tables.front();
  auto& v = out.values();
  for (std::size_t i = 1; i < tables.size(); ++i) {
    const auto& t = tables[i].values();
    if (t.size() != v.size()) throw ShapeError("library tables differ in shape");
    for (std::size_t k = 0; k < v.size(); ++k) {
      v[k] = agg == Aggregator::min_over_tasks ? std::min(v[k], t[k]) : std::max(v[k], t[k]);
    }
  }
  return out;
}

JointPolicy ggpi_policy(std::span<const QTable> tables, Aggregator agg) {
  return greedy_minmax_policy(aggregate_tables(tables, agg));
}

JointAction ggpi_action(std::span<const SFTable> tables, std::span<const double> w,
                        std::size_t s, AgentRole role, std::optional<std::size_t> observed_a,
                        Aggregator agg) {
  if (tables.empty()) throw ContractViolation("GGPI needs a non-empty library");
  const FeatureTable& first = tables.front().role(role);
  for (const SFTable& t : tables) {
    if (t.role(role).dim() != w.size()) {
      throw DimensionError("task weights have length " + std::to_string(w.size()) +
                           " but table '" + t.task_id + "' has dimension " +
                           std::to_string(t.role(role).dim()));
    }
  }
  const std::size_t na = first.num_ego_actions();
  const std::size_t nb = first.num_other_actions();
  auto combined = [&](std::size_t a, std::size_t b) {
    double v = tables.front().role(role).dot(s, a, b, w);
    for (std::size_t i = 1; i < tables.size(); ++i) {
      const double q = tables[i].role(role).dot(s, a, b, w);
      v = agg == Aggregator::min_over_tasks ? std::min(v, q) : std::max(v, q);
    }
    return v;
  };

  std::vector<double> row(nb);
  if (role == AgentRole::other) {
    if (!observed_a) throw ContractViolation("the other agent must observe the ego action");
    if (*observed_a >= na) throw ContractViolation("observed ego action out of range");
    for (std::size_t b = 0; b < nb; ++b) row[b] = combined(*observed_a, b);
    return {*observed_a, argmin_first(row)};
  }

  JointAction best;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < na; ++a) {
    for (std::size_t b = 0; b < nb; ++b) row[b] = combined(a, b);
    const std::size_t b = argmin_first(row);
    if (row[b] > best_value) {
      best_value = row[b];
      best = {a, b};
    }
  }
  return best;
}

PolicyReuse::PolicyReuse(std::size_t library_size, const ReuseParams& params)
    : gains_(library_size, 0.0),
      uses_(library_size, 0),
      tau_(params.tau0),
      delta_tau_(params.delta_tau) {}

std::size_t PolicyReuse::choose(Rng& rng) const {
  if (gains_.empty()) throw ContractViolation("policy reuse over an empty library");
  const double top = *std::max_element(gains_.begin(), gains_.end());
  std::vector<double> weight(gains_.size());
  double total = 0.0;
  for (std::size_t k = 0; k < gains_.size(); ++k) {
    weight[k] = std::exp(tau_ * (gains_[k] - top));
    total += weight[k];
  }
  double u = rng.uniform() * total;
  for (std::size_t k = 0; k < weight.size(); ++k) {
    if (u < weight[k]) return k;
    u -= weight[k];
  }
  return weight.size() - 1;
}

void PolicyReuse::record(std::size_t k, double episode_return) {
  if (k >= gains_.size()) throw ContractViolation("reuse policy index out of range");
  ++uses_[k];
  gains_[k] += (episode_return - gains_[k]) / static_cast<double>(uses_[k]);
  tau_ += delta_tau_;
}

std::size_t prql_select(std::span<const QTable> library, const QTable& current, std::size_t s,
                        AgentRole role, std::optional<std::size_t> observed_a,
                        std::size_t chosen, double psi, double epsilon, Rng& reuse_rng,
                        Rng& explore_rng) {
  if (library.empty()) throw ContractViolation("PRQL needs a non-empty policy library");
  if (chosen >= library.size()) throw ContractViolation("reuse policy index out of range");
  if (reuse_rng.bernoulli(psi)) return role_greedy(library[chosen], s, role, observed_a);
  if (explore_rng.bernoulli(epsilon)) {
    const std::size_t n =
        role == AgentRole::ego ? current.num_ego_actions() : current.num_other_actions();
    return explore_rng.index(n);
  }
  return role_greedy(current, s, role, observed_a);
}

Learner::Learner(LearnerKind kind, const LearnerConfig& cfg, const GridConfig& grid)
    : kind_(kind),
      cfg_(cfg),
      grid_(grid),
      states_(0),
      epsilon_(cfg.epsilon0),
      explore_rng_(Rng(cfg.seed).split("explore")),
      reuse_rng_(Rng(cfg.seed).split("reuse")) {
  cfg_.validate();
  grid_.validate();
  states_ = compiled_state_count(grid_);
}

bool Learner::uses_successor_features() const {
  return kind_ == LearnerKind::sfminmax || kind_ == LearnerKind::sf_reset;
}

const TaskWeights& Learner::task() const {
  if (tasks_.empty()) throw ContractViolation("no task has been started");
  return tasks_.back();
}

void Learner::require_task() const {
  if (tasks_.empty()) throw ContractViolation("no task has been started");
}

void Learner::begin_task(const TaskWeights& task) {
  if (task.w.size() != grid_.feature_dim()) {
    throw DimensionError("task '" + task.task_id + "' has " + std::to_string(task.w.size()) +
                         " weights but the grid has " + std::to_string(grid_.feature_dim()) +
                         " features");
  }
  if (task.goal >= grid_.goals.size()) throw ContractViolation("task goal out of range");

  if (uses_successor_features()) {
    if (cfg_.new_task_init == NewTaskInit::copy_last && !sf_library_.empty()) {
      SFTable next = sf_library_.back();
      next.task_id = task.task_id;
      sf_library_.push_back(std::move(next));
    } else {
      sf_library_.emplace_back(task.task_id, states_, kNumMoves, kNumMoves, grid_.feature_dim());
    }
  } else {
    if (!tasks_.empty()) q_library_.push_back(q_);
    q_.ego = QTable(states_, kNumMoves, kNumMoves, cfg_.gamma);
    q_.other = q_.ego;
    if (kind_ == LearnerKind::prql) rebuild_reuse();
  }
  if (kind_ != LearnerKind::sfminmax) epsilon_ = cfg_.epsilon0;
  tasks_.push_back(task);
  episodes_per_task_.push_back(0);
}

bool Learner::reuse_active() const {
  return kind_ == LearnerKind::prql && !q_library_.empty();
}

double Learner::sf_value(std::size_t s, std::size_t a, std::size_t b) const {
  const auto& w = task().w;
  double v = sf_library_.front().ego.dot(s, a, b, w);
  for (std::size_t i = 1; i < sf_library_.size(); ++i) {
    const double q = sf_library_[i].ego.dot(s, a, b, w);
    v = cfg_.gpi_aggregator == Aggregator::min_over_tasks ? std::min(v, q) : std::max(v, q);
  }
  return v;
}

JointAction Learner::sf_greedy_own(std::size_t s, AgentRole role) const {
  // Max-min joint choice of the current task's own role table at s.
  const FeatureTable& psi = sf_library_.back().role(role);
  const auto& w = task().w;
  JointAction best;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < kNumMoves; ++a) {
    std::size_t reply = 0;
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < kNumMoves; ++b) {
      const double v = psi.dot(s, a, b, w);
      if (v < worst) {
        worst = v;
        reply = b;
      }
    }
    if (worst > best_value) {
      best_value = worst;
      best = {a, reply};
    }
  }
  return best;
}

std::size_t Learner::greedy_ego(std::size_t s) const {
  if (uses_successor_features()) {
    return ggpi_action(sf_library_, task().w, s, AgentRole::ego, std::nullopt,
                       cfg_.gpi_aggregator)
        .a;
  }
  return maxmin_action(q_.ego, s).a;
}

std::size_t Learner::greedy_other(std::size_t s, std::size_t a) const {
  if (uses_successor_features()) {
    return ggpi_action(sf_library_, task().w, s, AgentRole::other, a, cfg_.gpi_aggregator).b;
  }
  return argmin_first(q_.other.row(s, a));
}

void Learner::begin_episode(const EpisodeMode& mode) {
  require_task();
  turn_ = 0;
  if (mode.explore && reuse_active()) chosen_policy_ = reuse_.choose(reuse_rng_);
}

std::size_t Learner::choose_ego(std::size_t s, std::size_t turn, const EpisodeMode& mode) {
  turn_ = turn;
  if (mode.explore && reuse_active()) {
    const double psi = cfg_.reuse.psi0 * std::pow(cfg_.reuse.upsilon, static_cast<double>(turn));
    return prql_select(reuse_ego_, q_.ego, s, AgentRole::ego, std::nullopt,
                       chosen_policy_, psi, epsilon_, reuse_rng_, explore_rng_);
  }
  if (mode.explore && explore_rng_.bernoulli(epsilon_)) return explore_rng_.index(kNumMoves);
  return greedy_ego(s);
}

std::size_t Learner::choose_other(std::size_t s, std::size_t a, std::size_t turn,
                                  const EpisodeMode& mode) {
  turn_ = turn;
  if (mode.explore && reuse_active()) {
    const double psi = cfg_.reuse.psi0 * std::pow(cfg_.reuse.upsilon, static_cast<double>(turn));
    return prql_select(reuse_other_, q_.other, s, AgentRole::other, a,
                       chosen_policy_, psi, epsilon_, reuse_rng_, explore_rng_);
  }
  if (mode.explore && explore_rng_.bernoulli(epsilon_)) return explore_rng_.index(kNumMoves);
  return greedy_other(s, a);
}

void Learner::observe(std::size_t s, std::size_t a, std::size_t b, std::span<const double> phi,
                      double reward, std::size_t next, bool terminal) {
  if (uses_successor_features()) {
    SFTable& current = sf_library_.back();
    for (AgentRole role : {AgentRole::ego, AgentRole::other}) {
      const JointAction choice = terminal ? JointAction{} : sf_greedy_own(next, role);
      sf_td_step(current, role, {s, a, b, phi, next, terminal}, choice, cfg_);
    }
    return;
  }
  const Experience step{s, a, b, reward, next, terminal};
  minmax_q_step(q_.ego, step, cfg_);
  minmax_q_step(q_.other, step, cfg_);
}

void Learner::end_episode(const EpisodeMode& mode, double ego_return) {
  if (!mode.learn) return;
  ++episodes_per_task_.back();
  if (mode.explore && reuse_active()) reuse_.record(chosen_policy_, ego_return);
  if (kind_ != LearnerKind::sfminmax) epsilon_ *= cfg_.epsilon_decay;
}

QTable Learner::value_table() const {
  if (uses_successor_features()) {
    std::vector<QTable> views;
    views.reserve(sf_library_.size());
    for (const SFTable& t : sf_library_) views.push_back(t.ego.contract(task().w, cfg_.gamma));
    return aggregate_tables(views, cfg_.gpi_aggregator);
  }
  require_task();
  return q_.ego;
}

double Learner::state_value(const GridState& state) const {
  const std::size_t s = state_index(grid_, state);
  if (!uses_successor_features()) {
    require_task();
    return q_.ego.max_min(s);
  }
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < kNumMoves; ++a) {
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < kNumMoves; ++b) worst = std::min(worst, sf_value(s, a, b));
    best = std::max(best, worst);
  }
  return best;
}

void Learner::rebuild_reuse() {
  reuse_ego_.clear();
  reuse_other_.clear();
  for (const QPair& p : q_library_) {
    reuse_ego_.push_back(p.ego);
    reuse_other_.push_back(p.other);
  }
  reuse_ = PolicyReuse(q_library_.size(), cfg_.reuse);
}

void Learner::restore(std::vector<TaskWeights> tasks, std::vector<std::size_t> episodes,
                      std::vector<SFTable> sf_library, std::vector<QPair> q_library,
                      std::optional<QPair> current, double epsilon) {
  if (tasks.empty() || episodes.size() != tasks.size()) {
    throw ContractViolation("restored learner needs one episode count per task");
  }
  for (const TaskWeights& t : tasks) {
    if (t.w.size() != grid_.feature_dim()) {
      throw DimensionError("restored task '" + t.task_id + "' has the wrong weight length");
    }
  }
  auto check_q = [&](const QTable& q) {
    if (q.num_states() != states_ || q.num_ego_actions() != kNumMoves ||
        q.num_other_actions() != kNumMoves) {
      throw ShapeError("restored Q table does not match the grid");
    }
  };
  if (uses_successor_features()) {
    if (sf_library.size() != tasks.size()) {
      throw ContractViolation("SF learner needs one table pair per task");
    }
    for (const SFTable& t : sf_library) {
      for (const FeatureTable* f : {&t.ego, &t.other}) {
        if (f->num_states() != states_ || f->num_ego_actions() != kNumMoves ||
            f->num_other_actions() != kNumMoves || f->dim() != grid_.feature_dim()) {
          throw ShapeError("restored SF table '" + t.task_id + "' does not match the grid");
        }
      }
    }
  } else {
    if (!current) throw ContractViolation("Q learner needs its current tables");
    if (q_library.size() + 1 != tasks.size()) {
      throw ContractViolation("Q learner needs one archived pair per finished task");
    }
    for (const QPair& p : q_library) {
      check_q(p.ego);
      check_q(p.other);
    }
    check_q(current->ego);
    check_q(current->other);
    q_ = std::move(*current);
  }
  tasks_ = std::move(tasks);
  episodes_per_task_ = std::move(episodes);
  sf_library_ = std::move(sf_library);
  q_library_ = std::move(q_library);
  epsilon_ = epsilon;
  if (kind_ == LearnerKind::prql) rebuild_reuse();
}

EpisodeResult run_episode(Learner& learner, const GridState& start, const EpisodeMode& mode,
                          std::size_t episode_index, std::vector<TurnRecord>* log) {
  if (start.status != Outcome::ongoing) throw ContractViolation("episode start is finished");
  const GridConfig& grid = learner.grid();
  const TaskWeights& task = learner.task();
  const double gamma = learner.config().gamma;

  learner.begin_episode(mode);
  EpisodeResult result;
  result.task_id = task.task_id;
  result.episode_index = episode_index;
  result.start = start;

  GridState state = start;
  double discount = 1.0;
  std::size_t turn = 0;
  while (state.status == Outcome::ongoing) {
    const std::size_t s = state_index(grid, state);
    const std::size_t a = learner.choose_ego(s, turn, mode);
    const std::size_t b = learner.choose_other(s, a, turn, mode);
    const TurnResult step = step_turn(grid, state, a, b, task.goal);
    double r = 0.0;
    for (std::size_t k = 0; k < step.phi.size(); ++k) r += step.phi[k] * task.w[k];
    result.ego_return += discount * r;
    discount *= gamma;

    const bool terminal =
        step.outcome == Outcome::evader_win || step.outcome == Outcome::pursuer_win;
    if (mode.learn) {
      const std::size_t next = terminal ? absorbing_state(grid) : state_index(grid, step.next);
      learner.observe(s, a, b, step.phi, r, next, terminal);
    }
    if (log != nullptr) {
      log->push_back({episode_index, state.steps_elapsed, state.evader, state.pursuer, a, b, r,
                      step.outcome});
    }
    state = step.next;
    ++turn;
  }
  result.winner = state.status;
  result.path_length = state.steps_elapsed - start.steps_elapsed;
  learner.end_episode(mode, result.ego_return);
  return result;
}

}  // namespace sfgame
