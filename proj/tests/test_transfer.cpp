#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sfgame/bounds.hpp"
#include "sfgame/errors.hpp"
#include "sfgame/transfer.hpp"

using namespace sfgame;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("sfgame_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

Learner trained(LearnerKind kind, std::uint64_t seed, std::size_t tasks, std::size_t episodes) {
  LearnerConfig cfg;
  cfg.seed = seed;
  Learner learner(kind, cfg, default_grid());
  const auto presets = task_weight_presets();
  for (std::size_t k = 0; k < tasks; ++k) {
    learner.begin_task(presets[k]);
    for (std::size_t e = 0; e < episodes; ++e) {
      run_episode(learner, equal_distance_start(learner.grid()), kTrain, e);
    }
  }
  return learner;
}

std::vector<double> random_weights(Rng& rng, std::size_t d) {
  std::vector<double> w(d);
  for (double& x : w) x = rng.uniform(-1.0, 1.0);
  return w;
}

// Exhaustive |r_i - r_j| over every grid position pair and joint move,
// stepping the simulator directly.
double scan_reward_distance(const GridConfig& grid, const TaskWeights& ti, const TaskWeights& tj) {
  double best = 0.0;
  for (int ex = 0; ex < grid.width; ++ex) {
    for (int ey = 0; ey < grid.height; ++ey) {
      for (int px = 0; px < grid.width; ++px) {
        for (int py = 0; py < grid.height; ++py) {
          GridState st;
          st.evader = {ex, ey};
          st.pursuer = {px, py};
          for (std::size_t a = 0; a < kNumMoves; ++a) {
            for (std::size_t b = 0; b < kNumMoves; ++b) {
              const auto fi = step_turn(grid, st, a, b, ti.goal).phi;
              const auto fj = step_turn(grid, st, a, b, tj.goal).phi;
              double ri = 0.0;
              double rj = 0.0;
              for (std::size_t k = 0; k < fi.size(); ++k) {
                ri += fi[k] * ti.w[k];
                rj += fj[k] * tj.w[k];
              }
              best = std::max(best, std::abs(ri - rj));
            }
          }
        }
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("a view for a library task's own weights equals its value table bit for bit") {
  const Learner learner = trained(LearnerKind::sfminmax, 3, 1, 200);
  const TaskLibrary lib = TaskLibrary::from_learner(learner);
  const auto eval = evaluate_on_task(lib, learner.task().w, 0.9);
  REQUIRE(eval.views.size() == 1);
  CHECK(eval.views[0] == learner.value_table());
}

TEST_CASE("zero weights give zero views and the tie-break policy") {
  const Learner learner = trained(LearnerKind::sfminmax, 4, 2, 50);
  const TaskLibrary lib = TaskLibrary::from_learner(learner);
  const std::vector<double> zero(lib.feature_dim(), 0.0);
  const auto eval = evaluate_on_task(lib, zero, 0.9);
  CHECK(eval.views.size() == 2);
  for (const QTable& q : eval.views) {
    for (double x : q.values()) CHECK(x == 0.0);
  }
  for (std::size_t a : eval.policy.ego) CHECK(a == 0);
  for (std::size_t b : eval.policy.other) CHECK(b == 0);
}

TEST_CASE("one-shot evaluation does not touch the library") {
  const Learner learner = trained(LearnerKind::sfminmax, 5, 2, 100);
  const TaskLibrary lib = TaskLibrary::from_learner(learner);
  const auto before = lib.content_hash();
  (void)evaluate_on_task(lib, task_weight_presets()[2].w, 0.9);
  (void)evaluate_on_task(lib, task_weight_presets()[0].w, 0.9, Aggregator::max_over_tasks,
                         AgentRole::other);
  CHECK(lib.content_hash() == before);
}

TEST_CASE("evaluate_on_task argument errors") {
  TaskLibrary empty(7);
  CHECK_THROWS_AS((void)evaluate_on_task(empty, std::vector<double>(7, 0.0), 0.9),
                  ContractViolation);
  const TaskLibrary lib = TaskLibrary::from_learner(trained(LearnerKind::sfminmax, 1, 1, 5));
  CHECK_THROWS_AS((void)evaluate_on_task(lib, std::vector<double>(3, 0.0), 0.9), DimensionError);
}

TEST_CASE("GGPI policy from exact SF views dominates the library under a best responder") {
  // Library policies pair a random ego policy with the exact best reply
  // under the new task; the GGPI ego policy is scored against its own best
  // reply, the strongest opponent.
  const GameSizes sizes{5, 3, 3};
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const FeatureGame fg = random_feature_game(seed, sizes, 0.9, 4);
    Rng rng = Rng(seed).split("transfer-test");
    const auto w_new = random_weights(rng, 4);
    const GameSpec game = fg.with_reward(w_new);

    TaskLibrary lib(4);
    std::vector<QTable> exact;
    for (std::size_t i = 0; i < 3; ++i) {
      const JointPolicy pi = best_response(game, random_joint_policy(game, rng));
      SFTable tables;
      tables.task_id = "p" + std::to_string(i);
      tables.ego = evaluate_policy_features(game, fg.phi, pi);
      tables.other = tables.ego;
      lib.add({{tables.task_id, random_weights(rng, 4), 0}, tables, 0, 0.0});
      exact.push_back(evaluate_policy(game, pi));
    }
    const auto eval = evaluate_on_task(lib, w_new, 0.9);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(sup_distance(eval.views[i], exact[i]) < 1e-9);
    }
    const QTable scored = evaluate_policy(game, best_response(game, eval.policy));
    double worst = 1e300;
    for (std::size_t s = 0; s < sizes.states; ++s) {
      for (std::size_t a = 0; a < sizes.ego_actions; ++a) {
        for (std::size_t b = 0; b < sizes.other_actions; ++b) {
          double floor = 1e300;
          for (const QTable& q : eval.views) floor = std::min(floor, q(s, a, b));
          worst = std::min(worst, scored(s, a, b) - floor);
        }
      }
    }
    CHECK(worst >= -1e-9);
  }
}

TEST_CASE("library invariants") {
  const Learner learner = trained(LearnerKind::sfminmax, 2, 2, 10);
  TaskLibrary lib = TaskLibrary::from_learner(learner);
  CHECK(lib.size() == 2);
  CHECK(lib.find("task2") == 1);
  CHECK(lib.find("nope") == 2);
  CHECK(lib.at(0).training_episodes == 10);
  CHECK_THROWS_AS(lib.add(lib.at(0)), ContractViolation);

  LibraryEntry wrong_dim = lib.at(0);
  wrong_dim.task.task_id = "other";
  wrong_dim.task.w.pop_back();
  CHECK_THROWS_AS(lib.add(wrong_dim), DimensionError);

  LibraryEntry small = lib.at(0);
  small.task.task_id = "small";
  small.tables = SFTable("small", 3, 4, 4, 7);
  CHECK_THROWS_AS(lib.add(small), ContractViolation);

  CHECK_THROWS_AS((void)TaskLibrary::from_learner(trained(LearnerKind::minmax, 1, 1, 1)),
                  ContractViolation);
}

TEST_CASE("content hash changes with any table value") {
  const Learner learner = trained(LearnerKind::sfminmax, 6, 1, 20);
  const TaskLibrary lib = TaskLibrary::from_learner(learner);
  TaskLibrary copy(lib.feature_dim());
  LibraryEntry e = lib.at(0);
  copy.add(e);
  CHECK(copy.content_hash() == lib.content_hash());
  TaskLibrary changed(lib.feature_dim());
  e.tables.other.values()[123] += 1e-12;
  changed.add(e);
  CHECK(changed.content_hash() != lib.content_hash());
}

TEST_CASE("weight fitting recovers exact linear rewards") {
  const auto target = task_weight_presets()[0].w;
  Rng rng(77);
  std::vector<WeightObservation> obs;
  for (int i = 0; i < 200; ++i) {
    WeightObservation o;
    o.phi.resize(target.size());
    for (double& x : o.phi) x = rng.uniform();
    for (std::size_t k = 0; k < target.size(); ++k) o.reward += o.phi[k] * target[k];
    obs.push_back(o);
  }
  const WeightFit fit = fit_task_weights(obs, 0.0);
  for (std::size_t k = 0; k < target.size(); ++k) CHECK(std::abs(fit.w[k] - target[k]) < 1e-8);
  CHECK(fit.residual_rms <= 1e-10);
}

TEST_CASE("weight fitting small cases") {
  const std::vector<WeightObservation> one{{{1.0}, 1.0}};
  const WeightFit fit = fit_task_weights(one, 0.0);
  REQUIRE(fit.w.size() == 1);
  CHECK(fit.w[0] == doctest::Approx(1.0).epsilon(1e-15));

  std::vector<WeightObservation> zeros;
  Rng rng(3);
  for (int i = 0; i < 10; ++i) zeros.push_back({{rng.uniform(), rng.uniform()}, 0.0});
  for (double ridge : {0.0, 0.5}) {
    const WeightFit z = fit_task_weights(zeros, ridge);
    for (double x : z.w) CHECK(x == 0.0);
  }

  // Two identical columns: singular without a ridge term.
  std::vector<WeightObservation> collinear;
  for (int i = 1; i <= 5; ++i) collinear.push_back({{double(i), double(i)}, double(i)});
  CHECK_THROWS_AS((void)fit_task_weights(collinear, 0.0), RankDeficiencyError);
  const WeightFit ridged = fit_task_weights(collinear, 1e-3);
  CHECK(ridged.w[0] == doctest::Approx(ridged.w[1]));
  CHECK(ridged.w[0] + ridged.w[1] == doctest::Approx(1.0).epsilon(1e-3));

  CHECK_THROWS_AS((void)fit_task_weights(std::vector<WeightObservation>{}, 0.0), ContractViolation);
  CHECK_THROWS_AS((void)fit_task_weights(one, -1.0), ContractViolation);
  const std::vector<WeightObservation> ragged{{{1.0, 2.0}, 1.0}, {{1.0}, 1.0}};
  CHECK_THROWS_AS((void)fit_task_weights(ragged, 0.0), DimensionError);
}

TEST_CASE("task distance basics on a shared feature table") {
  const FeatureGame fg = random_feature_game(9, GameSizes{4, 2, 2}, 0.9, 3);
  Rng rng(10);
  const auto wi = random_weights(rng, 3);
  CHECK(task_distance(fg.phi, wi, wi).exact == 0.0);
  CHECK(task_distance(fg.phi, wi, wi).factored == 0.0);

  // Feature 2 is identically zero, so moving its weight changes nothing.
  FeatureTable phi = fg.phi;
  for (std::size_t i = 2; i < phi.values().size(); i += 3) phi.values()[i] = 0.0;
  auto wj = wi;
  wj[2] += 5.0;
  CHECK(task_distance(phi, wi, wj).exact == 0.0);

  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_weights(rng, 3);
    const auto b = random_weights(rng, 3);
    const auto c = random_weights(rng, 3);
    const auto ab = task_distance(fg.phi, a, b);
    CHECK(ab.exact == task_distance(fg.phi, b, a).exact);
    CHECK(task_distance(fg.phi, a, c).exact <= ab.exact + task_distance(fg.phi, b, c).exact + 1e-12);
    CHECK(ab.exact <= ab.factored + 1e-12);
  }
  CHECK_THROWS_AS((void)task_distance(fg.phi, wi, std::vector<double>(2, 0.0)), DimensionError);
}

TEST_CASE("preset Task 1 vs Task 2 distance matches an exhaustive simulator scan") {
  const GridConfig grid = default_grid();
  const auto presets = task_weight_presets();
  const Learner learner = trained(LearnerKind::sfminmax, 1, 2, 1);
  const TaskLibrary lib = TaskLibrary::from_learner(learner);
  const double oracle = scan_reward_distance(grid, presets[0], presets[1]);
  const TaskDistance d = task_distance(lib, 0, 1, grid);
  CHECK(std::abs(d.exact - oracle) < 1e-12);
  // Regression fixture from the scan above.
  CHECK(d.exact == doctest::Approx(1.7687392608830357).epsilon(1e-12));
  CHECK(task_distance(lib, 1, 0, grid).exact == d.exact);
  CHECK(task_distance(lib, 0, 0, grid).exact == 0.0);
  CHECK(d.factored > 0.0);
}

TEST_CASE("binary tables round trip and reject damaged files") {
  const auto dir = scratch_dir("tables");
  std::filesystem::create_directories(dir);
  const FeatureGame fg = random_feature_game(2, GameSizes{3, 2, 4}, 0.8, 5);
  write_table(dir / "phi.sfgt", fg.phi);
  CHECK(read_feature_table(dir / "phi.sfgt") == fg.phi);

  QTable q(3, 2, 4, 0.8);
  Rng rng(4);
  for (double& x : q.values()) x = rng.uniform(-1e9, 1e9);
  q.values()[0] = -0.0;
  write_table(dir / "q.sfgt", q);
  const QTable back = read_q_table(dir / "q.sfgt");
  CHECK(back == q);
  CHECK(std::signbit(back.values()[0]));

  CHECK_THROWS_AS((void)read_q_table(dir / "phi.sfgt"), IoError);
  CHECK_THROWS_AS((void)read_q_table(dir / "missing.sfgt"), IoError);

  // Truncated payload.
  const auto size = std::filesystem::file_size(dir / "q.sfgt");
  std::filesystem::resize_file(dir / "q.sfgt", size - 3);
  CHECK_THROWS_AS((void)read_q_table(dir / "q.sfgt"), IoError);

  {
    std::ofstream bad(dir / "bad.sfgt", std::ios::binary);
    bad << "NOPE and some more bytes";
  }
  CHECK_THROWS_AS((void)read_feature_table(dir / "bad.sfgt"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("learners of every kind survive a save/load round trip") {
  for (LearnerKind kind :
       {LearnerKind::minmax, LearnerKind::sfminmax, LearnerKind::sf_reset, LearnerKind::prql}) {
    CAPTURE(learner_kind_name(kind));
    const Learner original = trained(kind, 12, 2, 60);
    const auto dir = scratch_dir(std::string(learner_kind_name(kind)));
    save_learner(dir, original);
    const Learner loaded = load_learner(dir);
    CHECK(loaded.kind() == original.kind());
    CHECK(loaded.tasks() == original.tasks());
    CHECK(loaded.episodes_per_task() == original.episodes_per_task());
    CHECK(loaded.epsilon() == original.epsilon());
    CHECK(loaded.sf_library() == original.sf_library());
    CHECK(loaded.value_table() == original.value_table());
    if (!original.uses_successor_features()) {
      CHECK(loaded.q().ego == original.q().ego);
      REQUIRE(loaded.q_library().size() == original.q_library().size());
      CHECK(loaded.q_library()[0].other == original.q_library()[0].other);
    }
    // Saving the loaded learner reproduces the manifest byte for byte.
    const auto again = scratch_dir(std::string(learner_kind_name(kind)) + "_again");
    save_learner(again, loaded);
    auto slurp = [](const std::filesystem::path& p) {
      std::ifstream in(p, std::ios::binary);
      return std::string(std::istreambuf_iterator<char>(in), {});
    };
    CHECK(slurp(dir / "library.json") == slurp(again / "library.json"));
    const std::string table =
        original.uses_successor_features() ? "tables/task1_sf_ego.sfgt" : "tables/task1_q_ego.sfgt";
    CHECK(slurp(dir / table) == slurp(again / table));
    std::filesystem::remove_all(dir);
    std::filesystem::remove_all(again);
  }
}

TEST_CASE("loading a missing or malformed library fails cleanly") {
  const auto dir = scratch_dir("empty_lib");
  std::filesystem::create_directories(dir);
  CHECK_THROWS_AS((void)load_learner(dir), IoError);
  {
    std::ofstream out(dir / "library.json");
    out << "{\"schema_version\": 99}";
  }
  CHECK_THROWS_AS((void)load_learner(dir), ConfigError);
  {
    std::ofstream out(dir / "library.json");
    out << "{ not json";
  }
  CHECK_THROWS_AS((void)load_learner(dir), ConfigError);

  const Learner original = trained(LearnerKind::sfminmax, 1, 1, 5);
  save_learner(dir, original);
  std::filesystem::remove(dir / "tables/task0_sf_other.sfgt");
  CHECK_THROWS_AS((void)load_learner(dir), IoError);
  std::filesystem::remove_all(dir);
}
