#include <doctest.h>

#include <filesystem>
#include <string>

#include "sfgame/config.hpp"
#include "sfgame/errors.hpp"

using namespace sfgame;
using nlohmann::json;

namespace {

std::string config_error(const std::string& text) {
  try {
    (void)experiment_from_json(parse_json_text(text));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("syntax errors report line and column") {
  const std::string text = "{\n  \"study\": ,\n}";
  try {
    (void)parse_json_text(text, "cfg.json");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).rfind("cfg.json:2:12: ", 0) == 0);
  }
  CHECK_THROWS_AS((void)parse_json_text("", "x"), ConfigError);
  CHECK_THROWS_AS((void)parse_json_text("[1, 2", "x"), ConfigError);
}

TEST_CASE("every shipped config loads and validates") {
  const std::filesystem::path dir = std::filesystem::path(SFGAME_SOURCE_DIR) / "configs";
  int loaded = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.path().extension() != ".json" || name == "experiment.schema.json") continue;
    CAPTURE(name);
    CHECK_NOTHROW((void)load_experiment(entry.path()));
    ++loaded;
  }
  CHECK(loaded >= 4);
  const ExperimentConfig q = load_experiment(dir / "quantitative.json");
  CHECK(q.seeds.size() == 10);
  CHECK(q.find_algorithm("sfminmax")->learner.alpha == 0.1);
  CHECK(q.find_algorithm("minmax")->learner.alpha == 0.3);
  CHECK(q.tasks.size() == 4);
  CHECK(q.grid.height == 6);
}

TEST_CASE("presets validate and survive a JSON round trip") {
  for (StudyKind kind : {StudyKind::training_transfer, StudyKind::policy_snapshots,
                         StudyKind::quantitative}) {
    const ExperimentConfig cfg = preset_experiment(kind);
    CHECK_NOTHROW(cfg.validate());
    const json doc = experiment_to_json(cfg);
    const ExperimentConfig back = experiment_from_json(doc);
    CHECK(experiment_to_json(back) == doc);
  }
}

TEST_CASE("unknown keys and bad values name the offending field") {
  CHECK(config_error(R"({"schema_version": 1, "study": "quantitative", "colour": 1})")
            .find("colour") != std::string::npos);
  CHECK(config_error(R"({"schema_version": 2, "study": "quantitative"})")
            .find("schema_version") != std::string::npos);
  CHECK(config_error(R"({"schema_version": 1, "study": "bogus"})").find("study") !=
        std::string::npos);
  CHECK(config_error(R"({"schema_version": 1, "study": "quantitative",
                         "learner": {"alpha": 0}})")
            .find("alpha") != std::string::npos);
  CHECK(config_error(R"({"schema_version": 1, "study": "quantitative",
                         "algorithms": ["minmax", "qlearning"]})")
            .find("algorithms[1]") != std::string::npos);
  CHECK(config_error(R"({"schema_version": 1, "study": "quantitative",
                         "snapshots": [0, 2000, 1000]})")
            .find("snapshots") != std::string::npos);
  CHECK(config_error(R"({"schema_version": 1, "study": "quantitative",
                         "algorithms": ["sfminmax"]})")
            .find("reference_algorithm") != std::string::npos);
  CHECK(config_error(R"({"schema_version": 1, "study": "quantitative", "grid": "default"})")
            .find("features") != std::string::npos);
  CHECK(config_error(R"({"schema_version": 1, "study": "quantitative", "seeds": []})")
            .find("seeds") != std::string::npos);
  CHECK(config_error(R"({"schema_version": 1, "study": "quantitative", "seeds": [-1]})")
            .find("seeds") != std::string::npos);
}

TEST_CASE("algorithm entries inherit the shared learner block") {
  const ExperimentConfig cfg = experiment_from_json(parse_json_text(R"({
    "schema_version": 1, "study": "training-transfer",
    "learner": {"alpha": 0.2, "epsilon0": 0.3},
    "algorithms": ["minmax", {"name": "sf-fast", "kind": "sfminmax", "learner": {"alpha": 0.9}}],
    "seeds": {"first": 4, "count": 3}
  })"));
  REQUIRE(cfg.algorithms.size() == 2);
  CHECK(cfg.algorithms[0].learner.alpha == 0.2);
  CHECK(cfg.algorithms[1].name == "sf-fast");
  CHECK(cfg.algorithms[1].kind == LearnerKind::sfminmax);
  CHECK(cfg.algorithms[1].learner.alpha == 0.9);
  CHECK(cfg.algorithms[1].learner.epsilon0 == 0.3);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{4, 5, 6});
  // Training-transfer needs neither snapshots nor a reference.
  CHECK(cfg.snapshots.empty());
}

TEST_CASE("grid and task JSON forms") {
  const GridConfig g = grid_from_json(json::parse(R"({"width": 4, "height": 3,
      "goals": [[3, 2], [0, 2]], "walls": [[1, 1]], "step_limit": 12})"));
  CHECK(g.width == 4);
  CHECK(g.goals.size() == 2);
  CHECK(g.walls.size() == 1);
  CHECK(g.step_limit == 12);
  CHECK(grid_from_json(grid_to_json(g)).goals == g.goals);
  CHECK(grid_from_json("quantitative").height == 6);
  CHECK_THROWS_AS((void)grid_from_json("huge"), ConfigError);
  CHECK_THROWS_AS((void)grid_from_json(json::parse(R"({"width": 4})")), ConfigError);
  CHECK_THROWS_AS((void)grid_from_json(json::parse(R"({"goals": [[9, 9]]})")), ConfigError);

  const TaskWeights t = task_from_json(json::parse(R"({"task_id": "t", "w": [0.7, 0, 0, -1.3, 0.7]})"));
  CHECK(t.goal == 1);
  CHECK(task_from_json(task_to_json(t)) == t);
  CHECK_THROWS_AS((void)task_from_json(json::parse(R"({"task_id": "t", "w": []})")), ConfigError);
  CHECK(tasks_from_json("default").size() == 3);

  LearnerConfig lc;
  lc.alpha = 0.25;
  lc.gpi_aggregator = Aggregator::max_over_tasks;
  lc.reuse.psi0 = 0.5;
  const LearnerConfig back = learner_config_from_json(learner_config_to_json(lc));
  CHECK(back.alpha == 0.25);
  CHECK(back.gpi_aggregator == Aggregator::max_over_tasks);
  CHECK(back.reuse.psi0 == 0.5);
  CHECK_THROWS_AS((void)learner_config_from_json(json::parse(R"({"gpi_aggregator": "avg"})")),
                  ConfigError);
}

TEST_CASE("missing config files are I/O errors") {
  CHECK_THROWS_AS((void)load_experiment("/nonexistent/config.json"), IoError);
}
