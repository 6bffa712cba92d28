#pragma once

// Episode metrics (success rates, SPL, value gap) and the study harness that
// trains algorithms over a task sequence and writes metrics.csv,
// episodes.jsonl and trajectories.jsonl.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sfgame/config.hpp"
#include "sfgame/episode.hpp"
#include "sfgame/learning.hpp"

namespace sfgame {

/// Percentages summing to 100.
struct SuccessRates {
  double ewin = 0.0;
  double pwin = 0.0;
  double tie = 0.0;
};

/// Throws ContractViolation on an empty list.
SuccessRates success_rate(std::span<const EpisodeResult> results);

/// "e<x>,<y>|p<x>,<y>"; keys the per-start maps below.
std::string start_key(const GridState& start);

struct PathScores {
  /// (1/N) sum S_i l_i / max(p_i, l_i)
  double spl = 0.0;
  /// (1/N) sum S_i p_i / l_i
  double path_efficiency = 0.0;
};

/// S_i is 1 when the episode ended in a win for either side (not a tie).
/// `baseline_paths` maps start_key to the reference path length p_i; a
/// missing start raises ContractViolation.
PathScores spl(std::span<const EpisodeResult> results,
               const std::map<std::string, int>& baseline_paths);

/// Mean over starts of |V - V'|; the two maps must have the same keys.
double value_gap(const std::map<std::string, double>& agent_values,
                 const std::map<std::string, double>& reference_values);

struct MetricsRow {
  std::string algorithm;
  std::string task;
  std::size_t episodes = 0;
  std::uint64_t seed = 0;
  std::optional<double> value_gap;
  SuccessRates sr;
  std::optional<double> spl;
  std::optional<double> path_efficiency;
  double mean_return = 0.0;
};

/// %.6g, or "NA" for an empty optional / non-finite value.
std::string format_number(std::optional<double> x);
std::string metrics_csv_header();
std::string metrics_csv_line(const MetricsRow& row);

/// SR and mean return of a list of episodes; the optional metrics stay empty.
MetricsRow summarize_episodes(std::string algorithm, std::string task, std::size_t episodes,
                              std::uint64_t seed, std::span<const EpisodeResult> results);

/// One episodes.jsonl record. `snapshot` is null for training episodes.
std::string episode_json_line(std::string_view algorithm, std::uint64_t seed,
                              std::string_view phase, std::optional<std::size_t> snapshot,
                              const EpisodeResult& result);

/// trajectories.jsonl records, one per turn.
std::string trajectory_json_lines(std::string_view algorithm, std::uint64_t seed,
                                  std::string_view task, std::size_t snapshot,
                                  const std::vector<TurnRecord>& turns);

struct GreedySnapshot {
  /// V(s0) per start_key.
  std::map<std::string, double> values;
  std::vector<EpisodeResult> rollouts;
  std::vector<std::vector<TurnRecord>> turns;
};

/// Greedy rollouts of the learner's current task from each start; reads
/// the learner only.
GreedySnapshot greedy_snapshot(Learner& learner, std::span<const GridState> starts);

/// Start states of training episodes on one task. The canonical-random
/// stream is Rng(seed).split("starts/" + task_id), so a cell trained by a
/// study and by the CLI sees the same starts.
class TrainingStarts {
 public:
  TrainingStarts(StartMode mode, const GridConfig& grid, std::uint64_t seed,
                 std::string_view task_id);
  GridState next();

 private:
  StartMode mode_;
  GridState fixed_;
  std::vector<GridState> canonical_;
  Rng pick_;
};

struct StudyArtifacts {
  std::vector<MetricsRow> rows;
  std::string metrics_csv;
  std::string episodes_jsonl;
  std::string trajectories_jsonl;
};

/// Runs every (seed, algorithm) cell on up to `jobs` worker threads
/// (0 = hardware concurrency). Output is independent of `jobs`.
StudyArtifacts run_study(const ExperimentConfig& cfg, std::size_t jobs = 1);

/// Writes metrics.csv, episodes.jsonl and trajectories.jsonl into `dir`.
void write_artifacts(const StudyArtifacts& artifacts, const std::filesystem::path& dir);

/// Evaluation starts of a snapshot study: the nine canonical starts for the
/// quantitative study, the equal-distance start for policy snapshots.
std::vector<GridState> evaluation_starts(const ExperimentConfig& cfg);

}  // namespace sfgame
