#pragma once

// JSON forms of the grid, task and learner settings, and the experiment
// config consumed by the study harness and the CLI. Field reference:
// configs/experiment.schema.json and docs/formats.md.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sfgame/grid.hpp"
#include "sfgame/learning.hpp"

namespace sfgame {

inline constexpr int kConfigSchemaVersion = 1;

/// Parses JSON text. Syntax errors become ConfigError with a
/// "<source>:<line>:<column>: ..." prefix.
nlohmann::json parse_json_text(std::string_view text, std::string_view source = "<input>");
/// Reads and parses a file; IoError when it cannot be read.
nlohmann::json read_json_file(const std::filesystem::path& path);

nlohmann::json grid_to_json(const GridConfig& grid);
/// Accepts a preset name ("default", "quantitative") or an object.
GridConfig grid_from_json(const nlohmann::json& doc);

nlohmann::json task_to_json(const TaskWeights& task);
/// A missing "goal" is inferred from the weights.
TaskWeights task_from_json(const nlohmann::json& doc);
/// Accepts a preset group name or an array of tasks.
std::vector<TaskWeights> tasks_from_json(const nlohmann::json& doc);

nlohmann::json learner_config_to_json(const LearnerConfig& cfg);
/// Overlays the keys present in `doc` onto `base`.
LearnerConfig learner_config_from_json(const nlohmann::json& doc, LearnerConfig base = {});

enum class StudyKind { training_transfer, policy_snapshots, quantitative };
std::string_view study_kind_name(StudyKind kind);
StudyKind parse_study_kind(std::string_view name);

/// Where training episodes start.
enum class StartMode { equal_distance, canonical_random };
std::string_view start_mode_name(StartMode mode);
StartMode parse_start_mode(std::string_view name);

struct AlgorithmSpec {
  /// Label used in artifacts; unique within a config.
  std::string name;
  LearnerKind kind = LearnerKind::minmax;
  LearnerConfig learner;
};

struct ExperimentConfig {
  StudyKind study = StudyKind::quantitative;
  GridConfig grid;
  /// The first task is the pretraining task.
  std::vector<TaskWeights> tasks;
  std::vector<AlgorithmSpec> algorithms;
  std::vector<std::uint64_t> seeds;
  std::size_t pretrain_episodes = 30000;
  /// Training episodes per later task; at least the largest snapshot.
  std::size_t task_episodes = 2000;
  std::vector<std::size_t> snapshots{0, 1000, 2000};
  /// V' and the SPL reference paths come from this algorithm's table after
  /// `reference_episodes` on each task.
  std::string reference_algorithm = "minmax";
  std::size_t reference_episodes = 2000;
  StartMode train_starts = StartMode::canonical_random;
  bool log_training_episodes = false;
  std::string output_dir = "out";

  [[nodiscard]] const AlgorithmSpec* find_algorithm(std::string_view name) const;
  /// Throws ConfigError when an invariant is broken.
  void validate() const;
};

/// Unknown keys and type mismatches are ConfigErrors naming the JSON path.
ExperimentConfig experiment_from_json(const nlohmann::json& doc);
nlohmann::json experiment_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// Built-in configs for the three studies.
ExperimentConfig preset_experiment(StudyKind kind);

}  // namespace sfgame
