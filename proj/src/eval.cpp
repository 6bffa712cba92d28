#include "sfgame/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "sfgame/errors.hpp"
#include "sfgame/learning.hpp"

namespace sfgame {

namespace {

void append_cell(std::string& out, Cell c) {
  out += '[';
  out += std::to_string(c.x);
  out += ',';
  out += std::to_string(c.y);
  out += ']';
}

// Task ids and algorithm names come from configs; escape the JSON specials.
void append_string(std::string& out, std::string_view s) {
  out += '"';
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", static_cast<unsigned>(c));
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
}

std::string json_number(double x) {
  return std::isfinite(x) ? format_number(x) : std::string("null");
}

struct CellContext {
  std::string_view algorithm;
  std::uint64_t seed = 0;
};

void append_episode(std::string& out, const CellContext& ctx, std::string_view phase,
                    std::optional<std::size_t> snapshot, const EpisodeResult& r) {
  out += "{\"algorithm\":";
  append_string(out, ctx.algorithm);
  out += ",\"seed\":" + std::to_string(ctx.seed) + ",\"task\":";
  append_string(out, r.task_id);
  out += ",\"phase\":\"";
  out += phase;
  out += "\",\"snapshot\":";
  out += snapshot ? std::to_string(*snapshot) : std::string("null");
  out += ",\"episode\":" + std::to_string(r.episode_index);
  out += ",\"winner\":\"";
  out += outcome_name(r.winner);
  out += "\",\"ego_return\":" + json_number(r.ego_return);
  out += ",\"path_length\":" + std::to_string(r.path_length);
  out += ",\"start\":{\"evader\":";
  append_cell(out, r.start.evader);
  out += ",\"pursuer\":";
  append_cell(out, r.start.pursuer);
  out += "}}\n";
}

void append_turns(std::string& out, const CellContext& ctx, std::string_view task,
                  std::size_t snapshot, const std::vector<TurnRecord>& turns) {
  for (const TurnRecord& t : turns) {
    out += "{\"algorithm\":";
    append_string(out, ctx.algorithm);
    out += ",\"seed\":" + std::to_string(ctx.seed) + ",\"task\":";
    append_string(out, task);
    out += ",\"snapshot\":" + std::to_string(snapshot);
    out += ",\"episode\":" + std::to_string(t.episode);
    out += ",\"step\":" + std::to_string(t.step);
    out += ",\"evader\":";
    append_cell(out, t.evader);
    out += ",\"pursuer\":";
    append_cell(out, t.pursuer);
    out += ",\"a\":" + std::to_string(t.a) + ",\"b\":" + std::to_string(t.b);
    out += ",\"reward\":" + json_number(t.reward);
    out += ",\"outcome\":\"";
    out += outcome_name(t.outcome);
    out += "\"}\n";
  }
}

struct Snapshot {
  std::size_t task = 0;
  std::size_t episodes = 0;
  std::map<std::string, double> values;
  std::vector<EpisodeResult> rollouts;
};

struct TaskTraining {
  std::size_t task = 0;
  std::size_t episodes = 0;
  double return_sum = 0.0;
  std::size_t wins[3] = {0, 0, 0};  // ewin, pwin, tie
};

struct CellOutput {
  std::vector<Snapshot> snapshots;
  std::vector<TaskTraining> training;
  std::string episodes;
  std::string trajectories;
};

CellOutput run_cell(const ExperimentConfig& cfg, const AlgorithmSpec& algo, std::uint64_t seed) {
  LearnerConfig lc = algo.learner;
  lc.seed = seed;
  Learner learner(algo.kind, lc, cfg.grid);
  const CellContext ctx{algo.name, seed};
  const auto eval_starts = evaluation_starts(cfg);
  const bool snapshots_on = cfg.study != StudyKind::training_transfer;

  CellOutput out;
  auto take_snapshot = [&](std::size_t task, std::size_t episodes) {
    GreedySnapshot g = greedy_snapshot(learner, eval_starts);
    for (std::size_t i = 0; i < g.rollouts.size(); ++i) {
      append_episode(out.episodes, ctx, "eval", episodes, g.rollouts[i]);
      append_turns(out.trajectories, ctx, g.rollouts[i].task_id, episodes, g.turns[i]);
    }
    out.snapshots.push_back({task, episodes, std::move(g.values), std::move(g.rollouts)});
  };

  for (std::size_t k = 0; k < cfg.tasks.size(); ++k) {
    const TaskWeights& task = cfg.tasks[k];
    learner.begin_task(task);
    TrainingStarts starts(cfg.train_starts, cfg.grid, seed, task.task_id);
    const std::size_t budget = k == 0 ? cfg.pretrain_episodes : cfg.task_episodes;
    const bool snap_task = snapshots_on && k > 0;
    auto next_snap = cfg.snapshots.begin();
    TaskTraining summary;
    summary.task = k;
    for (std::size_t e = 0; e < budget; ++e) {
      if (snap_task && next_snap != cfg.snapshots.end() && *next_snap == e) {
        take_snapshot(k, e);
        ++next_snap;
      }
      const EpisodeResult r = run_episode(learner, starts.next(), kTrain, e);
      ++summary.episodes;
      summary.return_sum += r.ego_return;
      ++summary.wins[r.winner == Outcome::evader_win ? 0 : r.winner == Outcome::pursuer_win ? 1 : 2];
      if (cfg.log_training_episodes) append_episode(out.episodes, ctx, "train", std::nullopt, r);
    }
    if (snap_task && next_snap != cfg.snapshots.end() && *next_snap == budget) take_snapshot(k, budget);
    out.training.push_back(summary);
  }
  return out;
}

double mean_return(std::span<const EpisodeResult> results) {
  double total = 0.0;
  for (const EpisodeResult& r : results) total += r.ego_return;
  return total / static_cast<double>(results.size());
}

}  // namespace

TrainingStarts::TrainingStarts(StartMode mode, const GridConfig& grid, std::uint64_t seed,
                               std::string_view task_id)
    : mode_(mode),
      fixed_(equal_distance_start(grid)),
      canonical_(canonical_starts()),
      pick_(Rng(seed).split("starts/" + std::string(task_id))) {}

GridState TrainingStarts::next() {
  if (mode_ == StartMode::equal_distance) return fixed_;
  return canonical_[pick_.index(canonical_.size())];
}

std::string episode_json_line(std::string_view algorithm, std::uint64_t seed,
                              std::string_view phase, std::optional<std::size_t> snapshot,
                              const EpisodeResult& result) {
  std::string out;
  append_episode(out, {algorithm, seed}, phase, snapshot, result);
  return out;
}

std::string trajectory_json_lines(std::string_view algorithm, std::uint64_t seed,
                                  std::string_view task, std::size_t snapshot,
                                  const std::vector<TurnRecord>& turns) {
  std::string out;
  append_turns(out, {algorithm, seed}, task, snapshot, turns);
  return out;
}

GreedySnapshot greedy_snapshot(Learner& learner, std::span<const GridState> starts) {
  GreedySnapshot g;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    g.values[start_key(starts[i])] = learner.state_value(starts[i]);
    std::vector<TurnRecord> turns;
    g.rollouts.push_back(run_episode(learner, starts[i], kGreedy, i, &turns));
    g.turns.push_back(std::move(turns));
  }
  return g;
}

MetricsRow summarize_episodes(std::string algorithm, std::string task, std::size_t episodes,
                              std::uint64_t seed, std::span<const EpisodeResult> results) {
  MetricsRow row;
  row.algorithm = std::move(algorithm);
  row.task = std::move(task);
  row.episodes = episodes;
  row.seed = seed;
  if (results.empty()) {
    row.sr = {std::nan(""), std::nan(""), std::nan("")};
    row.mean_return = std::nan("");
  } else {
    row.sr = success_rate(results);
    row.mean_return = mean_return(results);
  }
  return row;
}

SuccessRates success_rate(std::span<const EpisodeResult> results) {
  if (results.empty()) throw ContractViolation("success rate of an empty episode list");
  std::size_t ewin = 0;
  std::size_t pwin = 0;
  std::size_t tie = 0;
  for (const EpisodeResult& r : results) {
    switch (r.winner) {
      case Outcome::evader_win: ++ewin; break;
      case Outcome::pursuer_win: ++pwin; break;
      case Outcome::tie: ++tie; break;
      case Outcome::ongoing:
        throw ContractViolation("episode result without a final outcome");
    }
  }
  const double n = static_cast<double>(results.size());
  return {100.0 * static_cast<double>(ewin) / n, 100.0 * static_cast<double>(pwin) / n,
          100.0 * static_cast<double>(tie) / n};
}

std::string start_key(const GridState& start) {
  return "e" + std::to_string(start.evader.x) + "," + std::to_string(start.evader.y) + "|p" +
         std::to_string(start.pursuer.x) + "," + std::to_string(start.pursuer.y);
}

PathScores spl(std::span<const EpisodeResult> results,
               const std::map<std::string, int>& baseline_paths) {
  if (results.empty()) throw ContractViolation("SPL of an empty episode list");
  PathScores out;
  for (const EpisodeResult& r : results) {
    const auto it = baseline_paths.find(start_key(r.start));
    if (it == baseline_paths.end()) {
      throw ContractViolation("no baseline path for start " + start_key(r.start));
    }
    if (r.winner != Outcome::evader_win && r.winner != Outcome::pursuer_win) continue;
    const double p = it->second;
    const double l = r.path_length;
    if (p <= 0.0 || l <= 0.0) throw ContractViolation("path lengths must be positive");
    out.spl += l / std::max(p, l);
    out.path_efficiency += p / l;
  }
  const double n = static_cast<double>(results.size());
  out.spl /= n;
  out.path_efficiency /= n;
  return out;
}

double value_gap(const std::map<std::string, double>& agent_values,
                 const std::map<std::string, double>& reference_values) {
  if (agent_values.empty()) throw ContractViolation("value gap over no starts");
  if (agent_values.size() != reference_values.size()) {
    throw ContractViolation("value maps cover different starts");
  }
  double total = 0.0;
  for (const auto& [key, v] : agent_values) {
    const auto it = reference_values.find(key);
    if (it == reference_values.end()) throw ContractViolation("no reference value for " + key);
    total += std::abs(v - it->second);
  }
  return total / static_cast<double>(agent_values.size());
}

std::string format_number(std::optional<double> x) {
  if (!x || !std::isfinite(*x)) return "NA";
  char buf[32];
  // Avoid "-0" in artifacts.
  std::snprintf(buf, sizeof buf, "%.6g", *x == 0.0 ? 0.0 : *x);
  return buf;
}

std::string metrics_csv_header() {
  return "algorithm,task,episodes,seed,value_gap,sr_ewin,sr_pwin,sr_tie,spl,path_efficiency,"
         "mean_return";
}

std::string metrics_csv_line(const MetricsRow& row) {
  std::string out = row.algorithm + "," + row.task + "," + std::to_string(row.episodes) + "," +
                    std::to_string(row.seed) + ",";
  out += format_number(row.value_gap) + ",";
  out += format_number(row.sr.ewin) + "," + format_number(row.sr.pwin) + "," +
         format_number(row.sr.tie) + ",";
  out += format_number(row.spl) + "," + format_number(row.path_efficiency) + ",";
  out += format_number(row.mean_return);
  return out;
}

std::vector<GridState> evaluation_starts(const ExperimentConfig& cfg) {
  if (cfg.study == StudyKind::quantitative) return canonical_starts();
  return {equal_distance_start(cfg.grid)};
}

StudyArtifacts run_study(const ExperimentConfig& cfg, std::size_t jobs) {
  cfg.validate();
  const std::size_t n_algos = cfg.algorithms.size();
  const std::size_t n_cells = n_algos * cfg.seeds.size();
  std::vector<CellOutput> cells(n_cells);

  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, n_cells);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n_cells; i = next++) {
      try {
        cells[i] = run_cell(cfg, cfg.algorithms[i / cfg.seeds.size()],
                            cfg.seeds[i % cfg.seeds.size()]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  auto cell = [&](std::size_t algo, std::size_t seed) -> const CellOutput& {
    return cells[algo * cfg.seeds.size() + seed];
  };

  StudyArtifacts out;
  if (cfg.study == StudyKind::training_transfer) {
    for (std::size_t a = 0; a < n_algos; ++a) {
      for (std::size_t k = 0; k < cfg.tasks.size(); ++k) {
        for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
          const TaskTraining& t = cell(a, si).training[k];
          MetricsRow row;
          row.algorithm = cfg.algorithms[a].name;
          row.task = cfg.tasks[k].task_id;
          row.episodes = t.episodes;
          row.seed = cfg.seeds[si];
          if (t.episodes > 0) {
            const double n = static_cast<double>(t.episodes);
            row.sr = {100.0 * static_cast<double>(t.wins[0]) / n,
                      100.0 * static_cast<double>(t.wins[1]) / n,
                      100.0 * static_cast<double>(t.wins[2]) / n};
            row.mean_return = t.return_sum / n;
          } else {
            row.mean_return = std::nan("");
          }
          out.rows.push_back(std::move(row));
        }
      }
    }
  } else {
    std::size_t ref = 0;
    while (cfg.algorithms[ref].name != cfg.reference_algorithm) ++ref;
    for (std::size_t a = 0; a < n_algos; ++a) {
      for (std::size_t k = 1; k < cfg.tasks.size(); ++k) {
        for (std::size_t episodes : cfg.snapshots) {
          for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
            auto find_snap = [&](const CellOutput& c, std::size_t eps) -> const Snapshot& {
              for (const Snapshot& s : c.snapshots) {
                if (s.task == k && s.episodes == eps) return s;
              }
              throw ContractViolation("missing snapshot");
            };
            const Snapshot& snap = find_snap(cell(a, si), episodes);
            const Snapshot& reference = find_snap(cell(ref, si), cfg.reference_episodes);
            std::map<std::string, int> paths;
            for (const EpisodeResult& r : reference.rollouts) {
              paths[start_key(r.start)] = r.path_length;
            }
            MetricsRow row;
            row.algorithm = cfg.algorithms[a].name;
            row.task = cfg.tasks[k].task_id;
            row.episodes = episodes;
            row.seed = cfg.seeds[si];
            if (!(a == ref && episodes == cfg.reference_episodes)) {
              row.value_gap = value_gap(snap.values, reference.values);
            }
            row.sr = success_rate(snap.rollouts);
            const PathScores ps = spl(snap.rollouts, paths);
            row.spl = ps.spl;
            row.path_efficiency = ps.path_efficiency;
            row.mean_return = mean_return(snap.rollouts);
            out.rows.push_back(std::move(row));
          }
        }
      }
    }
  }

  out.metrics_csv = metrics_csv_header() + "\n";
  for (const MetricsRow& row : out.rows) out.metrics_csv += metrics_csv_line(row) + "\n";
  for (const CellOutput& c : cells) {
    out.episodes_jsonl += c.episodes;
    out.trajectories_jsonl += c.trajectories;
  }
  return out;
}

void write_artifacts(const StudyArtifacts& artifacts, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    out << text;
    if (!out) throw IoError("failed writing " + (dir / name).string());
  };
  write("metrics.csv", artifacts.metrics_csv);
  write("episodes.jsonl", artifacts.episodes_jsonl);
  write("trajectories.jsonl", artifacts.trajectories_jsonl);
}

}  // namespace sfgame
