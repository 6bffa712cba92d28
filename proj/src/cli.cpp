#include "sfgame/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfgame/bounds.hpp"
#include "sfgame/config.hpp"
#include "sfgame/errors.hpp"
#include "sfgame/eval.hpp"
#include "sfgame/transfer.hpp"

namespace sfgame {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<double> parse_number_list(const std::string& text, std::string_view flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < item.size() && item[used] == ' ') ++used;
    if (item.empty() || used != item.size() || !std::isfinite(x)) {
      throw ConfigError(std::string(flag) + ": '" + item + "' is not a number");
    }
    out.push_back(x);
  }
  if (out.empty()) throw ConfigError(std::string(flag) + ": expected a comma-separated list");
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<GridState> evaluation_starts_for(const std::string& name, const GridConfig& grid) {
  if (name == "canonical") return canonical_starts();
  if (name == "equal_distance") return {equal_distance_start(grid)};
  throw ConfigError("--starts: expected 'canonical' or 'equal_distance', got '" + name + "'");
}

Learner load_nonempty(const fs::path& dir) {
  Learner learner = load_learner(dir);
  if (learner.tasks().empty()) throw IoError(dir.string() + ": library holds no tasks");
  return learner;
}

std::string algorithm_label(const Learner& learner) {
  return std::string(learner_kind_name(learner.kind()));
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string task;
  std::string algo;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> episodes;
  std::string out;
};

int cmd_train(const TrainArgs& args, std::ostream& out) {
  const ExperimentConfig cfg = load_experiment(args.config);
  const AlgorithmSpec* algo = cfg.find_algorithm(args.algo);
  if (algo == nullptr) throw ConfigError("--algo: '" + args.algo + "' is not in the config");
  const auto target = std::find_if(cfg.tasks.begin(), cfg.tasks.end(),
                                   [&](const TaskWeights& t) { return t.task_id == args.task; });
  if (target == cfg.tasks.end()) throw ConfigError("--task: '" + args.task + "' is not in the config");
  const std::size_t last = static_cast<std::size_t>(target - cfg.tasks.begin());
  const std::uint64_t seed = args.seed.value_or(cfg.seeds.front());

  LearnerConfig lc = algo->learner;
  lc.seed = seed;
  Learner learner(algo->kind, lc, cfg.grid);
  std::string metrics = metrics_csv_header() + "\n";
  std::string episodes;
  for (std::size_t k = 0; k <= last; ++k) {
    const TaskWeights& task = cfg.tasks[k];
    learner.begin_task(task);
    std::size_t budget = k == 0 ? cfg.pretrain_episodes : cfg.task_episodes;
    if (k == last && args.episodes) budget = *args.episodes;
    TrainingStarts starts(cfg.train_starts, cfg.grid, seed, task.task_id);
    std::vector<EpisodeResult> results;
    results.reserve(budget);
    for (std::size_t e = 0; e < budget; ++e) {
      results.push_back(run_episode(learner, starts.next(), kTrain, e));
      episodes += episode_json_line(algo->name, seed, "train", std::nullopt, results.back());
    }
    metrics += metrics_csv_line(summarize_episodes(algo->name, task.task_id, budget, seed, results)) + "\n";
  }

  const fs::path dir(args.out);
  save_learner(dir / "library", learner);
  write_text(dir / "metrics.csv", metrics);
  write_text(dir / "episodes.jsonl", episodes);
  out << "trained " << algo->name << " on " << last + 1 << " task(s), seed " << seed << "; wrote "
      << dir.string() << "\n";
  return kExitOk;
}

// --- transfer --------------------------------------------------------------

struct TransferArgs {
  std::string library;
  std::string weights;
  std::string task_id;
  std::optional<std::size_t> goal;
  std::size_t episodes = 1000;
  std::string starts = "canonical";
  std::string train_starts = "canonical_random";
  std::string out;
};

TaskWeights new_task(const Learner& learner, const std::string& weights, std::string task_id,
                     std::optional<std::size_t> goal) {
  TaskWeights task;
  task.w = parse_number_list(weights, "--new-task-weights");
  const std::size_t dim = learner.grid().feature_dim();
  if (task.w.size() != dim) {
    throw DimensionError("--new-task-weights: got " + std::to_string(task.w.size()) +
                         " weights, the library has " + std::to_string(dim) + " features");
  }
  task.task_id = task_id.empty() ? "task" + std::to_string(learner.tasks().size() + 1) : std::move(task_id);
  for (const TaskWeights& t : learner.tasks()) {
    if (t.task_id == task.task_id) throw ConfigError("--task-id: '" + task.task_id + "' already in the library");
  }
  task.goal = goal.value_or(infer_goal(task.w));
  if (task.goal >= learner.grid().goals.size()) throw ConfigError("--goal: out of range");
  return task;
}

int cmd_transfer(const TransferArgs& args, std::ostream& out) {
  Learner learner = load_nonempty(args.library);
  const TaskWeights task = new_task(learner, args.weights, args.task_id, args.goal);
  const std::vector<GridState> eval_starts = evaluation_starts_for(args.starts, learner.grid());
  const StartMode train_mode = parse_start_mode(args.train_starts);
  const std::string algo = algorithm_label(learner);
  const std::uint64_t seed = learner.config().seed;

  learner.begin_task(task);
  std::string metrics = metrics_csv_header() + "\n";
  std::string episodes;
  std::string trajectories;

  // One-shot row: greedy play on the new task before any update.
  const GreedySnapshot shot = greedy_snapshot(learner, eval_starts);
  for (std::size_t i = 0; i < shot.rollouts.size(); ++i) {
    episodes += episode_json_line(algo, seed, "eval", 0, shot.rollouts[i]);
    trajectories += trajectory_json_lines(algo, seed, task.task_id, 0, shot.turns[i]);
  }
  metrics += metrics_csv_line(summarize_episodes(algo, task.task_id, 0, seed, shot.rollouts)) + "\n";

  TrainingStarts starts(train_mode, learner.grid(), seed, task.task_id);
  std::vector<EpisodeResult> results;
  results.reserve(args.episodes);
  for (std::size_t e = 0; e < args.episodes; ++e) {
    results.push_back(run_episode(learner, starts.next(), kTrain, e));
    episodes += episode_json_line(algo, seed, "train", std::nullopt, results.back());
  }
  if (!results.empty()) {
    metrics += metrics_csv_line(summarize_episodes(algo, task.task_id, args.episodes, seed, results)) + "\n";
  }

  const fs::path dir = args.out.empty() ? fs::path(args.library) : fs::path(args.out);
  const fs::path library_dir = args.out.empty() ? dir : dir / "library";
  save_learner(library_dir, learner);
  write_text(dir / "metrics.csv", metrics);
  write_text(dir / "episodes.jsonl", episodes);
  write_text(dir / "trajectories.jsonl", trajectories);

  double v0 = 0.0;
  for (const auto& [key, v] : shot.values) v0 += v;
  out << "task " << task.task_id << ": one-shot mean V(s0) " << format_number(v0 / static_cast<double>(shot.values.size()))
      << ", trained " << args.episodes << " episode(s); library at " << library_dir.string() << "\n";
  return kExitOk;
}

// --- evaluate --------------------------------------------------------------

struct EvaluateArgs {
  std::string library;
  std::string weights;
  std::string task_id;
  std::optional<std::size_t> goal;
  std::string starts = "canonical";
  std::string out;
};

int cmd_evaluate(const EvaluateArgs& args, std::ostream& out) {
  Learner learner = load_nonempty(args.library);
  const std::vector<GridState> eval_starts = evaluation_starts_for(args.starts, learner.grid());
  std::size_t snapshot = learner.episodes_per_task().back();
  if (!args.weights.empty()) {
    // One-shot view of a task the library has not trained on; nothing is saved.
    learner.begin_task(new_task(learner, args.weights, args.task_id, args.goal));
    snapshot = 0;
  }
  const std::string algo = algorithm_label(learner);
  const std::uint64_t seed = learner.config().seed;
  const std::string& task_id = learner.task().task_id;

  const GreedySnapshot snap = greedy_snapshot(learner, eval_starts);
  StudyArtifacts art;
  for (std::size_t i = 0; i < snap.rollouts.size(); ++i) {
    art.episodes_jsonl += episode_json_line(algo, seed, "eval", snapshot, snap.rollouts[i]);
    art.trajectories_jsonl += trajectory_json_lines(algo, seed, task_id, snapshot, snap.turns[i]);
  }
  art.rows.push_back(summarize_episodes(algo, task_id, snapshot, seed, snap.rollouts));
  art.metrics_csv = metrics_csv_header() + "\n" + metrics_csv_line(art.rows.front()) + "\n";
  write_artifacts(art, args.out);

  json values = json::object();
  for (const auto& [key, v] : snap.values) values[key] = v;
  write_text(fs::path(args.out) / "values.json", values.dump(2) + "\n");
  const SuccessRates& sr = art.rows.front().sr;
  out << task_id << ": ewin " << format_number(sr.ewin) << "%, pwin " << format_number(sr.pwin)
      << "%, tie " << format_number(sr.tie) << "% over " << snap.rollouts.size() << " start(s)\n";
  return kExitOk;
}

// --- verify-bounds ---------------------------------------------------------

struct BoundsArgs {
  std::uint64_t first_seed = 1;
  std::size_t games = 200;
  std::size_t lemma_games = 500;
  std::size_t policies = 5;
  std::string sizes = "6,3,3";
  std::string epsilon = "0,0.05,0.1";
  double gamma = 0.9;
  std::string pairing = "best_response";
  std::string out;
  double test_bound_offset = 0.0;
};

GameSizes parse_sizes(const std::string& text) {
  const std::vector<double> v = parse_number_list(text, "--sizes");
  if (v.size() != 3) throw ConfigError("--sizes: expected states,ego_actions,other_actions");
  for (double x : v) {
    if (x < 1.0 || x != std::floor(x)) throw ConfigError("--sizes: expected positive integers");
  }
  return {static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1]),
          static_cast<std::size_t>(v[2])};
}

int cmd_verify_bounds(const BoundsArgs& args, std::ostream& out, std::ostream& err) {
  const GameSizes sizes = parse_sizes(args.sizes);
  const std::vector<double> epsilons = parse_number_list(args.epsilon, "--epsilon");
  for (double e : epsilons) {
    if (e < 0.0) throw ConfigError("--epsilon: values must be >= 0");
  }
  if (!(args.gamma > 0.0 && args.gamma < 1.0)) throw ConfigError("--gamma: must lie in (0, 1)");
  if (args.policies == 0) throw ConfigError("--policies: must be positive");
  AuditOptions options;
  options.pairing = parse_pairing(args.pairing);
  options.bound_offset = args.test_bound_offset;

  const auto seeds = seed_range(args.first_seed, args.games);
  const auto lemma_seeds = seed_range(args.first_seed, args.lemma_games);
  std::vector<json> entries;
  std::vector<BoundReport> reports;
  auto record = [&](BoundReport r, std::optional<double> eps) {
    json j = report_to_json(r);
    j["epsilon_inject"] = eps ? json(*eps) : json(nullptr);
    entries.push_back(std::move(j));
    err << r.audit << (eps ? " eps=" + format_number(*eps) : std::string()) << ": "
        << r.games_tested << " games, " << r.checks << " checks, " << r.violations
        << " violations, min slack " << format_number(r.min_slack) << "\n";
    reports.push_back(std::move(r));
  };
  for (double eps : epsilons) {
    record(audit_theorem1(seeds, sizes, args.policies, eps, args.gamma, options), eps);
  }
  record(audit_lemma1(lemma_seeds, sizes, args.gamma, options), std::nullopt);
  for (double eps : epsilons) {
    record(audit_proposition1(seeds, sizes, eps, args.gamma, {}, options), eps);
  }

  std::size_t violations = 0;
  for (const BoundReport& r : reports) violations += r.violations;
  json doc{{"sizes", {sizes.states, sizes.ego_actions, sizes.other_actions}},
           {"gamma", args.gamma},
           {"first_seed", args.first_seed},
           {"games", args.games},
           {"lemma_games", args.lemma_games},
           {"policies", args.policies},
           {"pairing", pairing_name(options.pairing)},
           {"tolerance", options.tolerance},
           {"violations", violations},
           {"passed", violations == 0},
           {"reports", entries}};
  const std::string text = doc.dump(2) + "\n";
  out << text;
  if (!args.out.empty()) write_text(fs::path(args.out) / "bounds.json", text);
  if (violations == 0) {
    err << "all bounds held\n";
    return kExitOk;
  }
  for (const BoundReport& r : reports) {
    if (r.violations > 0) err << "worst case (" << r.audit << "): " << r.worst_case.dump() << "\n";
  }
  return kExitViolation;
}

// --- sweep -----------------------------------------------------------------

struct SweepArgs {
  std::string config;
  std::string alphas = "0.1,0.2,0.3,0.4,0.5";
  std::vector<std::string> algos;
  std::string out;
  std::size_t jobs = 1;
};

int cmd_sweep(const SweepArgs& args, std::ostream& out) {
  const ExperimentConfig base = load_experiment(args.config);
  const std::vector<double> alphas = parse_number_list(args.alphas, "--alphas");
  std::vector<AlgorithmSpec> algos;
  if (args.algos.empty()) {
    algos = base.algorithms;
  } else {
    for (const std::string& name : args.algos) {
      const AlgorithmSpec* a = base.find_algorithm(name);
      if (a == nullptr) throw ConfigError("--algos: '" + name + "' is not in the config");
      algos.push_back(*a);
    }
  }

  // Every (algorithm, alpha) pair is one training-transfer cell per seed;
  // the score is the mean training return on the post-switch tasks.
  ExperimentConfig cfg = base;
  cfg.study = StudyKind::training_transfer;
  cfg.snapshots.clear();
  cfg.log_training_episodes = false;
  cfg.algorithms.clear();
  for (const AlgorithmSpec& a : algos) {
    for (double alpha : alphas) {
      AlgorithmSpec v = a;
      v.name = a.name + "@" + format_number(alpha);
      v.learner.alpha = alpha;
      cfg.algorithms.push_back(std::move(v));
    }
  }
  cfg.validate();
  const StudyArtifacts art = run_study(cfg, args.jobs);
  const std::size_t first_scored = cfg.tasks.size() > 1 ? 1 : 0;
  const std::size_t n_seeds = cfg.seeds.size();

  struct Score {
    double return_sum = 0.0;
    double sr[3] = {0.0, 0.0, 0.0};
    std::size_t episodes = 0;
  };
  // [variant][seed]
  std::vector<std::vector<Score>> scores(cfg.algorithms.size(), std::vector<Score>(n_seeds));
  for (const MetricsRow& row : art.rows) {
    const std::size_t k = static_cast<std::size_t>(
        std::find_if(cfg.tasks.begin(), cfg.tasks.end(),
                     [&](const TaskWeights& t) { return t.task_id == row.task; }) -
        cfg.tasks.begin());
    if (k < first_scored || row.episodes == 0) continue;
    const std::size_t v = static_cast<std::size_t>(
        std::find_if(cfg.algorithms.begin(), cfg.algorithms.end(),
                     [&](const AlgorithmSpec& a) { return a.name == row.algorithm; }) -
        cfg.algorithms.begin());
    const std::size_t s = static_cast<std::size_t>(
        std::find(cfg.seeds.begin(), cfg.seeds.end(), row.seed) - cfg.seeds.begin());
    Score& sc = scores[v][s];
    const double n = static_cast<double>(row.episodes);
    sc.return_sum += row.mean_return * n;
    sc.sr[0] += row.sr.ewin * n;
    sc.sr[1] += row.sr.pwin * n;
    sc.sr[2] += row.sr.tie * n;
    sc.episodes += row.episodes;
  }
  auto seed_mean = [&](std::size_t v, std::size_t s) {
    const Score& sc = scores[v][s];
    return sc.episodes ? sc.return_sum / static_cast<double>(sc.episodes) : std::nan("");
  };

  std::string table = "algorithm,alpha,seeds,episodes,mean_return,sr_ewin,sr_pwin,sr_tie,best\n";
  std::string best_table = "algorithm,seed,best_alpha,mean_return\n";
  for (std::size_t a = 0; a < algos.size(); ++a) {
    std::vector<double> means(alphas.size(), 0.0);
    std::vector<Score> totals(alphas.size());
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      const std::size_t v = a * alphas.size() + i;
      for (std::size_t s = 0; s < n_seeds; ++s) {
        const Score& sc = scores[v][s];
        totals[i].return_sum += sc.return_sum;
        for (int c = 0; c < 3; ++c) totals[i].sr[c] += sc.sr[c];
        totals[i].episodes += sc.episodes;
      }
      const double n = static_cast<double>(totals[i].episodes);
      means[i] = totals[i].episodes ? totals[i].return_sum / n : std::nan("");
    }
    // Ties go to the smaller alpha (first in the list).
    std::size_t best = 0;
    for (std::size_t i = 1; i < alphas.size(); ++i) {
      if (means[i] > means[best]) best = i;
    }
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      const double n = static_cast<double>(std::max<std::size_t>(totals[i].episodes, 1));
      table += algos[a].name + "," + format_number(alphas[i]) + "," + std::to_string(n_seeds) +
               "," + std::to_string(totals[i].episodes) + "," + format_number(means[i]) + "," +
               format_number(totals[i].sr[0] / n) + "," + format_number(totals[i].sr[1] / n) +
               "," + format_number(totals[i].sr[2] / n) + "," + (i == best ? "1" : "0") + "\n";
    }
    for (std::size_t s = 0; s < n_seeds; ++s) {
      std::size_t b = 0;
      for (std::size_t i = 1; i < alphas.size(); ++i) {
        if (seed_mean(a * alphas.size() + i, s) > seed_mean(a * alphas.size() + b, s)) b = i;
      }
      best_table += algos[a].name + "," + std::to_string(cfg.seeds[s]) + "," +
                    format_number(alphas[b]) + "," +
                    format_number(seed_mean(a * alphas.size() + b, s)) + "\n";
    }
    out << algos[a].name << ": best alpha " << format_number(alphas[best]) << " (mean return "
        << format_number(means[best]) << ")\n";
  }
  write_text(fs::path(args.out) / "sweep.csv", table);
  write_text(fs::path(args.out) / "sweep_best.csv", best_table);
  return kExitOk;
}

// --- study -----------------------------------------------------------------

struct StudyArgs {
  std::string config;
  std::string out;
  std::size_t jobs = 1;
};

int cmd_study(const StudyArgs& args, std::ostream& out) {
  const ExperimentConfig cfg = load_experiment(args.config);
  const fs::path dir = args.out.empty() ? fs::path(cfg.output_dir) : fs::path(args.out);
  if (dir.empty()) throw ConfigError("--out: no output directory given and none in the config");
  const StudyArtifacts art = run_study(cfg, args.jobs);
  write_artifacts(art, dir);
  out << study_kind_name(cfg.study) << ": " << art.rows.size() << " metrics rows written to "
      << dir.string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Successor-feature transfer for two-player pursuit-evasion games"};
  app.name("sfgame");
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train one (algorithm, seed) cell through a task");
  train_cmd->add_option("config", train.config, "Experiment config (JSON)")->required();
  train_cmd->add_option("--task", train.task, "Last task id to train; earlier tasks train first")
      ->required();
  train_cmd->add_option("--algo", train.algo, "Algorithm name from the config")->required();
  train_cmd->add_option("--seed", train.seed, "Cell seed (default: first config seed)");
  train_cmd->add_option("--episodes", train.episodes, "Episode budget of the last task");
  train_cmd->add_option("--out", train.out, "Output directory")->required();

  TransferArgs transfer;
  auto* transfer_cmd =
      app.add_subcommand("transfer", "Add a task to a saved library: one-shot evaluation, then training");
  transfer_cmd->add_option("library_dir", transfer.library, "Saved library directory")->required();
  transfer_cmd->add_option("--new-task-weights", transfer.weights, "Comma-separated task weights")
      ->required();
  transfer_cmd->add_option("--task-id", transfer.task_id, "Id of the new task (default task<n>)");
  transfer_cmd->add_option("--goal", transfer.goal, "Goal index (default: largest goal weight)");
  transfer_cmd->add_option("--episodes", transfer.episodes, "Training episodes after the one-shot row")
      ->capture_default_str();
  transfer_cmd->add_option("--starts", transfer.starts, "One-shot starts: canonical or equal_distance")
      ->capture_default_str();
  transfer_cmd
      ->add_option("--train-starts", transfer.train_starts,
                   "Training starts: canonical_random or equal_distance")
      ->capture_default_str();
  transfer_cmd->add_option("--out", transfer.out,
                           "Output directory (default: update the library in place)");

  EvaluateArgs evaluate;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Greedy rollouts of a saved library");
  evaluate_cmd->add_option("library_dir", evaluate.library, "Saved library directory")->required();
  evaluate_cmd->add_option("--weights", evaluate.weights,
                           "Evaluate these task weights one-shot instead of the last task");
  evaluate_cmd->add_option("--task-id", evaluate.task_id, "Id for --weights");
  evaluate_cmd->add_option("--goal", evaluate.goal, "Goal index for --weights");
  evaluate_cmd->add_option("--starts", evaluate.starts, "canonical or equal_distance")
      ->capture_default_str();
  evaluate_cmd->add_option("--out", evaluate.out, "Output directory")->required();

  BoundsArgs bounds;
  auto* bounds_cmd =
      app.add_subcommand("verify-bounds", "Audit the transfer bounds on seeded random games");
  bounds_cmd->add_option("--seeds", bounds.first_seed, "First seed of the battery")
      ->capture_default_str();
  bounds_cmd->add_option("--games", bounds.games, "Games per improvement/composite audit")
      ->capture_default_str();
  bounds_cmd->add_option("--lemma-games", bounds.lemma_games, "Reward pairs for the similarity audit")
      ->capture_default_str();
  bounds_cmd->add_option("--policies", bounds.policies, "Library size of the improvement audit")
      ->capture_default_str();
  bounds_cmd->add_option("--sizes", bounds.sizes, "states,ego_actions,other_actions")
      ->capture_default_str();
  bounds_cmd->add_option("--epsilon", bounds.epsilon, "Injected estimate noise levels")
      ->capture_default_str();
  bounds_cmd->add_option("--gamma", bounds.gamma, "Discount")->capture_default_str();
  bounds_cmd->add_option("--pairing", bounds.pairing, "best_response or uniform_joint")
      ->capture_default_str();
  bounds_cmd->add_option("--out", bounds.out, "Directory for bounds.json");
  bounds_cmd->add_option("--test-bound-offset", bounds.test_bound_offset)->group("");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Learning-rate sweep over the config's algorithms");
  sweep_cmd->add_option("config", sweep.config, "Experiment config (JSON)")->required();
  sweep_cmd->add_option("--alphas", sweep.alphas, "Comma-separated learning rates")
      ->capture_default_str();
  sweep_cmd->add_option("--algos", sweep.algos, "Algorithm names (default: all)")->delimiter(',');
  sweep_cmd->add_option("--out", sweep.out, "Output directory")->required();
  sweep_cmd->add_option("--jobs", sweep.jobs, "Worker threads (0 = all cores)")->capture_default_str();

  StudyArgs study;
  auto* study_cmd = app.add_subcommand("study", "Run the study described by a config");
  study_cmd->add_option("config", study.config, "Experiment config (JSON)")->required();
  study_cmd->add_option("--out", study.out, "Output directory (default: the config's output_dir)");
  study_cmd->add_option("--jobs", study.jobs, "Worker threads (0 = all cores)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train_cmd) return cmd_train(train, out);
    if (*transfer_cmd) return cmd_transfer(transfer, out);
    if (*evaluate_cmd) return cmd_evaluate(evaluate, out);
    if (*bounds_cmd) return cmd_verify_bounds(bounds, out, err);
    if (*sweep_cmd) return cmd_sweep(sweep, out);
    if (*study_cmd) return cmd_study(study, out);
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDimension;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace sfgame
