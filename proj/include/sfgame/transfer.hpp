#pragma once

// Task library of solved tasks with their frozen SF tables, one-shot
// evaluation of a new task by re-dotting the stored tables, batch weight
// fitting, task distances, and on-disk persistence.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sfgame/game.hpp"
#include "sfgame/grid.hpp"
#include "sfgame/learning.hpp"

namespace sfgame {

struct LibraryEntry {
  TaskWeights task;
  SFTable tables;
  std::size_t training_episodes = 0;
  double final_epsilon = 0.0;
};

class TaskLibrary {
 public:
  explicit TaskLibrary(std::size_t feature_dim) : feature_dim_(feature_dim) {}

  /// SF learners only; one entry per task the learner has seen.
  static TaskLibrary from_learner(const Learner& learner);

  /// Throws DimensionError on a feature-length mismatch and
  /// ContractViolation on a duplicate task id or mismatched table shapes.
  void add(LibraryEntry entry);

  [[nodiscard]] std::size_t feature_dim() const { return feature_dim_; }
  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  [[nodiscard]] bool empty() const { return entries_.empty(); }
  [[nodiscard]] const std::vector<LibraryEntry>& entries() const { return entries_; }
  [[nodiscard]] const LibraryEntry& at(std::size_t i) const { return entries_.at(i); }
  /// Index of the entry with this id, or size() when absent.
  [[nodiscard]] std::size_t find(std::string_view task_id) const;
  [[nodiscard]] std::vector<SFTable> tables() const;

  /// 64-bit FNV-1a over ids, weights, counters and every table value.
  [[nodiscard]] std::uint64_t content_hash() const;

 private:
  std::size_t feature_dim_;
  std::vector<LibraryEntry> entries_;
};

struct TaskEvaluation {
  /// Q_i = psi_i . w_new for every library entry, in library order.
  std::vector<QTable> views;
  JointPolicy policy;
};

/// One-shot evaluation of w_new. Reads `role` tables; nothing is mutated.
TaskEvaluation evaluate_on_task(const TaskLibrary& library, std::span<const double> w_new,
                                double discount, Aggregator agg = Aggregator::min_over_tasks,
                                AgentRole role = AgentRole::ego);

struct WeightObservation {
  std::vector<double> phi;
  double reward = 0.0;
};

struct WeightFit {
  std::vector<double> w;
  double residual_rms = 0.0;
};

/// argmin_w sum (phi . w - r)^2 + ridge * |w|^2 via the normal equations.
/// With ridge = 0 a rank-deficient design raises RankDeficiencyError.
WeightFit fit_task_weights(std::span<const WeightObservation> observations, double ridge);

struct TaskDistance {
  /// max over (s, a, b) of |r_i - r_j|.
  double exact = 0.0;
  /// max |phi|_2 * |w_i - w_j|_2.
  double factored = 0.0;
};

/// Distance between two weight vectors under one shared feature table.
TaskDistance task_distance(const FeatureTable& phi, std::span<const double> w_i,
                           std::span<const double> w_j);
/// max over (s, a, b) of |r_i - r_j| for two games of the same shape.
double reward_distance(const GameSpec& gi, const GameSpec& gj);
/// Library tasks i and j on `grid`. Each task's rewards come from its own
/// compiled game (its goal decides when the episode ends), so `factored`
/// uses the larger feature norm of the two feature tables.
TaskDistance task_distance(const TaskLibrary& library, std::size_t i, std::size_t j,
                           const GridConfig& grid);

// --- persistence -----------------------------------------------------------

inline constexpr std::uint32_t kTableFormatVersion = 1;
inline constexpr int kLibrarySchemaVersion = 1;

/// Binary table files: "SFGT", u32 version, u32 kind (1 = Q, 2 = feature),
/// u64 states, ego actions, other actions, dim, f64 discount, then the
/// values, all little-endian.
void write_table(const std::filesystem::path& path, const QTable& table);
void write_table(const std::filesystem::path& path, const FeatureTable& table);
QTable read_q_table(const std::filesystem::path& path);
FeatureTable read_feature_table(const std::filesystem::path& path);

/// Writes `<dir>/library.json` plus `<dir>/tables/*.sfgt` for a learner of
/// any kind. The directory is created when missing.
void save_learner(const std::filesystem::path& dir, const Learner& learner);
/// IoError when the directory or a file is missing or damaged; ConfigError
/// when the manifest is malformed.
Learner load_learner(const std::filesystem::path& dir);

}  // namespace sfgame
