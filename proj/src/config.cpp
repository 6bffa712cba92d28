#include "sfgame/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "sfgame/errors.hpp"

namespace sfgame {

using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(path + ": unknown key '" + key + "'");
    }
  }
}

double get_number(const json& obj, const char* key, const std::string& path) {
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(path + "." + key + ": expected a number");
  return v.get<double>();
}

std::size_t get_count(const json& v, const std::string& path) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(path + ": expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::string get_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path + ": expected a string");
  return v.get<std::string>();
}

Cell cell_from_json(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() ||
      !v[1].is_number_integer()) {
    throw ConfigError(path + ": expected [x, y]");
  }
  return {v[0].get<int>(), v[1].get<int>()};
}

std::vector<Cell> cells_from_json(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path + ": expected an array of [x, y]");
  std::vector<Cell> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(cell_from_json(v[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

json cells_to_json(const std::vector<Cell>& cells) {
  json out = json::array();
  for (const Cell& c : cells) out.push_back({c.x, c.y});
  return out;
}

// Wraps the enum parsers, which throw ConfigError without a path.
template <typename F>
auto with_path(const std::string& path, F&& parse) {
  try {
    return parse();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace

json parse_json_text(std::string_view text, std::string_view source) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    std::size_t column = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::string what = e.what();
    // Drop nlohmann's "[json.exception.parse_error.101] parse error at ...: " prefix.
    if (const auto pos = what.find(": "); pos != std::string::npos) {
      const auto second = what.find(": ", pos + 2);
      if (second != std::string::npos) what = what.substr(second + 2);
    }
    throw ConfigError(std::string(source) + ":" + std::to_string(line) + ":" +
                      std::to_string(column) + ": " + what);
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_json_text(buf.str(), path.string());
}

json grid_to_json(const GridConfig& grid) {
  return {{"width", grid.width},
          {"height", grid.height},
          {"walls", cells_to_json(grid.walls)},
          {"goals", cells_to_json(grid.goals)},
          {"agent_norm", grid.agent_norm},
          {"goal_norm", grid.goal_norm},
          {"token", grid.token},
          {"step_limit", grid.step_limit}};
}

GridConfig grid_from_json(const json& doc) {
  if (doc.is_string()) {
    const auto name = doc.get<std::string>();
    if (name == "default") return default_grid();
    if (name == "quantitative") return quantitative_grid();
    throw ConfigError("grid: unknown preset '" + name + "'");
  }
  check_keys(doc, {"width", "height", "walls", "goals", "agent_norm", "goal_norm", "token",
                   "step_limit"},
             "grid");
  GridConfig g;
  g.walls.clear();
  g.goals.clear();
  if (doc.contains("width")) g.width = static_cast<int>(get_count(doc["width"], "grid.width"));
  if (doc.contains("height")) g.height = static_cast<int>(get_count(doc["height"], "grid.height"));
  if (doc.contains("walls")) g.walls = cells_from_json(doc["walls"], "grid.walls");
  if (!doc.contains("goals")) throw ConfigError("grid: missing 'goals'");
  g.goals = cells_from_json(doc["goals"], "grid.goals");
  if (doc.contains("agent_norm")) g.agent_norm = get_number(doc, "agent_norm", "grid");
  if (doc.contains("goal_norm")) g.goal_norm = get_number(doc, "goal_norm", "grid");
  if (doc.contains("token")) g.token = get_number(doc, "token", "grid");
  if (doc.contains("step_limit")) {
    g.step_limit = static_cast<int>(get_count(doc["step_limit"], "grid.step_limit"));
  }
  g.validate();
  return g;
}

json task_to_json(const TaskWeights& task) {
  return {{"task_id", task.task_id}, {"w", task.w}, {"goal", task.goal}};
}

TaskWeights task_from_json(const json& doc) {
  check_keys(doc, {"task_id", "w", "goal"}, "task");
  TaskWeights t;
  if (!doc.contains("task_id") || !doc.contains("w")) {
    throw ConfigError("task: needs 'task_id' and 'w'");
  }
  t.task_id = get_string(doc["task_id"], "task.task_id");
  const json& w = doc["w"];
  if (!w.is_array() || w.empty()) throw ConfigError("task.w: expected a non-empty array");
  for (const json& x : w) {
    if (!x.is_number()) throw ConfigError("task.w: expected numbers");
    t.w.push_back(x.get<double>());
  }
  t.goal = doc.contains("goal") ? get_count(doc["goal"], "task.goal") : infer_goal(t.w);
  return t;
}

std::vector<TaskWeights> tasks_from_json(const json& doc) {
  if (doc.is_string()) {
    const auto name = doc.get<std::string>();
    if (name != "default" && name != "quantitative") {
      throw ConfigError("tasks: unknown preset '" + name + "'");
    }
    return task_weight_presets(name);
  }
  if (!doc.is_array()) throw ConfigError("tasks: expected a preset name or an array");
  std::vector<TaskWeights> out;
  for (const json& t : doc) out.push_back(task_from_json(t));
  return out;
}

json learner_config_to_json(const LearnerConfig& cfg) {
  return {{"alpha", cfg.alpha},
          {"gamma", cfg.gamma},
          {"epsilon0", cfg.epsilon0},
          {"epsilon_decay", cfg.epsilon_decay},
          {"seed", cfg.seed},
          {"gpi_aggregator", aggregator_name(cfg.gpi_aggregator)},
          {"new_task_init", new_task_init_name(cfg.new_task_init)},
          {"reuse",
           {{"tau0", cfg.reuse.tau0},
            {"delta_tau", cfg.reuse.delta_tau},
            {"upsilon", cfg.reuse.upsilon},
            {"psi0", cfg.reuse.psi0}}}};
}

LearnerConfig learner_config_from_json(const json& doc, LearnerConfig base) {
  check_keys(doc, {"alpha", "gamma", "epsilon0", "epsilon_decay", "seed", "gpi_aggregator",
                   "new_task_init", "reuse"},
             "learner");
  if (doc.contains("alpha")) base.alpha = get_number(doc, "alpha", "learner");
  if (doc.contains("gamma")) base.gamma = get_number(doc, "gamma", "learner");
  if (doc.contains("epsilon0")) base.epsilon0 = get_number(doc, "epsilon0", "learner");
  if (doc.contains("epsilon_decay")) {
    base.epsilon_decay = get_number(doc, "epsilon_decay", "learner");
  }
  if (doc.contains("seed")) base.seed = get_count(doc["seed"], "learner.seed");
  if (doc.contains("gpi_aggregator")) {
    const auto name = get_string(doc["gpi_aggregator"], "learner.gpi_aggregator");
    base.gpi_aggregator = with_path("learner.gpi_aggregator", [&] { return parse_aggregator(name); });
  }
  if (doc.contains("new_task_init")) {
    const auto name = get_string(doc["new_task_init"], "learner.new_task_init");
    base.new_task_init = with_path("learner.new_task_init", [&] { return parse_new_task_init(name); });
  }
  if (doc.contains("reuse")) {
    const json& r = doc["reuse"];
    check_keys(r, {"tau0", "delta_tau", "upsilon", "psi0"}, "learner.reuse");
    if (r.contains("tau0")) base.reuse.tau0 = get_number(r, "tau0", "learner.reuse");
    if (r.contains("delta_tau")) base.reuse.delta_tau = get_number(r, "delta_tau", "learner.reuse");
    if (r.contains("upsilon")) base.reuse.upsilon = get_number(r, "upsilon", "learner.reuse");
    if (r.contains("psi0")) base.reuse.psi0 = get_number(r, "psi0", "learner.reuse");
  }
  with_path("learner", [&] {
    base.validate();
    return 0;
  });
  return base;
}

std::string_view study_kind_name(StudyKind kind) {
  switch (kind) {
    case StudyKind::training_transfer: return "training-transfer";
    case StudyKind::policy_snapshots: return "policy-snapshots";
    case StudyKind::quantitative: return "quantitative";
  }
  return "?";
}

StudyKind parse_study_kind(std::string_view name) {
  for (StudyKind k : {StudyKind::training_transfer, StudyKind::policy_snapshots,
                      StudyKind::quantitative}) {
    if (study_kind_name(k) == name) return k;
  }
  throw ConfigError("unknown study '" + std::string(name) + "'");
}

std::string_view start_mode_name(StartMode mode) {
  return mode == StartMode::equal_distance ? "equal_distance" : "canonical_random";
}

StartMode parse_start_mode(std::string_view name) {
  if (name == "equal_distance") return StartMode::equal_distance;
  if (name == "canonical_random") return StartMode::canonical_random;
  throw ConfigError("unknown start mode '" + std::string(name) + "'");
}

const AlgorithmSpec* ExperimentConfig::find_algorithm(std::string_view name) const {
  for (const AlgorithmSpec& a : algorithms) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

void ExperimentConfig::validate() const {
  grid.validate();
  if (tasks.empty()) throw ConfigError("tasks: at least one task is required");
  std::set<std::string> ids;
  for (const TaskWeights& t : tasks) {
    if (!ids.insert(t.task_id).second) throw ConfigError("tasks: duplicate id '" + t.task_id + "'");
    if (t.w.size() != grid.feature_dim()) {
      throw ConfigError("tasks: '" + t.task_id + "' has " + std::to_string(t.w.size()) +
                        " weights, the grid has " + std::to_string(grid.feature_dim()) +
                        " features");
    }
    if (t.goal >= grid.goals.size()) throw ConfigError("tasks: '" + t.task_id + "' goal out of range");
  }
  if (algorithms.empty()) throw ConfigError("algorithms: at least one is required");
  std::set<std::string> names;
  for (const AlgorithmSpec& a : algorithms) {
    if (a.name.empty()) throw ConfigError("algorithms: empty name");
    if (!names.insert(a.name).second) throw ConfigError("algorithms: duplicate '" + a.name + "'");
    a.learner.validate();
  }
  if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  if (study != StudyKind::training_transfer) {
    if (tasks.size() < 2) throw ConfigError("tasks: snapshot studies need a task after pretraining");
    if (snapshots.empty()) throw ConfigError("snapshots: at least one is required");
    if (!std::is_sorted(snapshots.begin(), snapshots.end()) ||
        std::adjacent_find(snapshots.begin(), snapshots.end()) != snapshots.end()) {
      throw ConfigError("snapshots: must be strictly increasing");
    }
    if (snapshots.back() > task_episodes) {
      throw ConfigError("snapshots: largest snapshot exceeds task_episodes");
    }
    if (find_algorithm(reference_algorithm) == nullptr) {
      throw ConfigError("reference_algorithm: '" + reference_algorithm + "' is not in algorithms");
    }
    if (std::find(snapshots.begin(), snapshots.end(), reference_episodes) == snapshots.end()) {
      throw ConfigError("reference_episodes: must be one of the snapshots");
    }
  }
}

ExperimentConfig experiment_from_json(const json& doc) {
  check_keys(doc, {"schema_version", "study", "grid", "tasks", "learner", "algorithms", "seeds",
                   "pretrain_episodes", "task_episodes", "snapshots", "reference_algorithm",
                   "reference_episodes", "train_starts", "log_training_episodes", "output_dir"},
             "config");
  if (!doc.contains("schema_version") || doc["schema_version"] != kConfigSchemaVersion) {
    throw ConfigError("config.schema_version: expected " + std::to_string(kConfigSchemaVersion));
  }
  if (!doc.contains("study")) throw ConfigError("config: missing 'study'");
  const StudyKind kind = with_path("config.study", [&] {
    return parse_study_kind(get_string(doc["study"], "config.study"));
  });
  ExperimentConfig cfg = preset_experiment(kind);

  if (doc.contains("grid")) cfg.grid = grid_from_json(doc["grid"]);
  if (doc.contains("tasks")) cfg.tasks = tasks_from_json(doc["tasks"]);
  LearnerConfig shared;
  if (doc.contains("learner")) shared = learner_config_from_json(doc["learner"]);
  if (doc.contains("algorithms")) {
    const json& algos = doc["algorithms"];
    if (!algos.is_array()) throw ConfigError("config.algorithms: expected an array");
    cfg.algorithms.clear();
    for (std::size_t i = 0; i < algos.size(); ++i) {
      const std::string path = "config.algorithms[" + std::to_string(i) + "]";
      AlgorithmSpec spec;
      if (algos[i].is_string()) {
        spec.name = algos[i].get<std::string>();
        spec.kind = with_path(path, [&] { return parse_learner_kind(spec.name); });
        spec.learner = shared;
      } else {
        check_keys(algos[i], {"name", "kind", "learner"}, path);
        if (!algos[i].contains("name")) throw ConfigError(path + ": missing 'name'");
        spec.name = get_string(algos[i]["name"], path + ".name");
        const std::string kind_name =
            algos[i].contains("kind") ? get_string(algos[i]["kind"], path + ".kind") : spec.name;
        spec.kind = with_path(path + ".kind", [&] { return parse_learner_kind(kind_name); });
        spec.learner = algos[i].contains("learner")
                           ? learner_config_from_json(algos[i]["learner"], shared)
                           : shared;
      }
      cfg.algorithms.push_back(std::move(spec));
    }
  } else if (doc.contains("learner")) {
    for (AlgorithmSpec& a : cfg.algorithms) a.learner = shared;
  }
  if (doc.contains("seeds")) {
    const json& s = doc["seeds"];
    cfg.seeds.clear();
    if (s.is_array()) {
      for (const json& x : s) cfg.seeds.push_back(get_count(x, "config.seeds[]"));
    } else if (s.is_object()) {
      check_keys(s, {"first", "count"}, "config.seeds");
      if (!s.contains("first") || !s.contains("count")) {
        throw ConfigError("config.seeds: needs 'first' and 'count'");
      }
      const std::size_t first = get_count(s["first"], "config.seeds.first");
      const std::size_t count = get_count(s["count"], "config.seeds.count");
      for (std::size_t i = 0; i < count; ++i) cfg.seeds.push_back(first + i);
    } else {
      throw ConfigError("config.seeds: expected an array or {first, count}");
    }
  }
  if (doc.contains("pretrain_episodes")) {
    cfg.pretrain_episodes = get_count(doc["pretrain_episodes"], "config.pretrain_episodes");
  }
  if (doc.contains("task_episodes")) {
    cfg.task_episodes = get_count(doc["task_episodes"], "config.task_episodes");
  }
  if (doc.contains("snapshots")) {
    const json& s = doc["snapshots"];
    if (!s.is_array()) throw ConfigError("config.snapshots: expected an array");
    cfg.snapshots.clear();
    for (const json& x : s) cfg.snapshots.push_back(get_count(x, "config.snapshots[]"));
  }
  if (doc.contains("reference_algorithm")) {
    cfg.reference_algorithm = get_string(doc["reference_algorithm"], "config.reference_algorithm");
  }
  if (doc.contains("reference_episodes")) {
    cfg.reference_episodes = get_count(doc["reference_episodes"], "config.reference_episodes");
  }
  if (doc.contains("train_starts")) {
    const auto name = get_string(doc["train_starts"], "config.train_starts");
    cfg.train_starts = with_path("config.train_starts", [&] { return parse_start_mode(name); });
  }
  if (doc.contains("log_training_episodes")) {
    if (!doc["log_training_episodes"].is_boolean()) {
      throw ConfigError("config.log_training_episodes: expected a boolean");
    }
    cfg.log_training_episodes = doc["log_training_episodes"].get<bool>();
  }
  if (doc.contains("output_dir")) cfg.output_dir = get_string(doc["output_dir"], "config.output_dir");
  cfg.validate();
  return cfg;
}

json experiment_to_json(const ExperimentConfig& cfg) {
  json algos = json::array();
  for (const AlgorithmSpec& a : cfg.algorithms) {
    json learner = learner_config_to_json(a.learner);
    learner.erase("seed");
    algos.push_back({{"name", a.name}, {"kind", learner_kind_name(a.kind)}, {"learner", learner}});
  }
  json tasks = json::array();
  for (const TaskWeights& t : cfg.tasks) tasks.push_back(task_to_json(t));
  return {{"schema_version", kConfigSchemaVersion},
          {"study", study_kind_name(cfg.study)},
          {"grid", grid_to_json(cfg.grid)},
          {"tasks", tasks},
          {"algorithms", algos},
          {"seeds", cfg.seeds},
          {"pretrain_episodes", cfg.pretrain_episodes},
          {"task_episodes", cfg.task_episodes},
          {"snapshots", cfg.snapshots},
          {"reference_algorithm", cfg.reference_algorithm},
          {"reference_episodes", cfg.reference_episodes},
          {"train_starts", start_mode_name(cfg.train_starts)},
          {"log_training_episodes", cfg.log_training_episodes},
          {"output_dir", cfg.output_dir}};
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  const json doc = read_json_file(path);
  try {
    return experiment_from_json(doc);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

ExperimentConfig preset_experiment(StudyKind kind) {
  ExperimentConfig cfg;
  cfg.study = kind;
  auto algo = [](LearnerKind k, double alpha) {
    AlgorithmSpec spec;
    spec.name = std::string(learner_kind_name(k));
    spec.kind = k;
    spec.learner.alpha = alpha;
    return spec;
  };
  switch (kind) {
    case StudyKind::quantitative:
      cfg.grid = quantitative_grid();
      cfg.tasks = task_weight_presets("quantitative");
      cfg.algorithms = {algo(LearnerKind::minmax, 0.3), algo(LearnerKind::sfminmax, 0.1),
                        algo(LearnerKind::sf_reset, 0.1), algo(LearnerKind::prql, 0.3)};
      cfg.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
      cfg.pretrain_episodes = 30000;
      cfg.task_episodes = 2000;
      cfg.snapshots = {0, 1000, 2000};
      cfg.train_starts = StartMode::canonical_random;
      cfg.output_dir = "runs/quantitative";
      break;
    case StudyKind::policy_snapshots:
      cfg.grid = default_grid();
      cfg.tasks = task_weight_presets("default");
      cfg.algorithms = {algo(LearnerKind::minmax, 0.5), algo(LearnerKind::sfminmax, 0.5)};
      cfg.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
      cfg.pretrain_episodes = 30000;
      cfg.task_episodes = 2000;
      cfg.snapshots = {0, 1000, 2000};
      cfg.train_starts = StartMode::equal_distance;
      cfg.output_dir = "runs/policy-snapshots";
      break;
    case StudyKind::training_transfer:
      cfg.grid = default_grid();
      cfg.tasks = task_weight_presets("default");
      cfg.algorithms = {algo(LearnerKind::minmax, 0.5), algo(LearnerKind::sfminmax, 0.5),
                        algo(LearnerKind::sf_reset, 0.5), algo(LearnerKind::prql, 0.5)};
      cfg.seeds = {1, 2, 3, 4, 5};
      cfg.pretrain_episodes = 20000;
      cfg.task_episodes = 5000;
      cfg.snapshots = {};
      cfg.train_starts = StartMode::equal_distance;
      cfg.log_training_episodes = true;
      cfg.output_dir = "runs/training-transfer";
      break;
  }
  return cfg;
}

}  // namespace sfgame
