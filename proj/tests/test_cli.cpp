#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfgame/cli.hpp"

using namespace sfgame;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sfgame");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("sfgame_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

const std::string kMinimal = std::string(SFGAME_SOURCE_DIR) + "/configs/minimal.json";
// Task 3 of the quantitative preset (d = 9).
const std::string kNewWeights = "0.7,0,0,-1.3,0.7,0,0,0,0";

}  // namespace

TEST_CASE("--help on every subcommand exits 0 and lists its flags") {
  CHECK(cli({"--help"}).code == kExitOk);
  const std::vector<std::pair<std::string, std::vector<std::string>>> flags{
      {"train", {"--task", "--algo", "--seed", "--out", "--episodes"}},
      {"transfer", {"--new-task-weights", "--episodes", "--task-id", "--goal", "--out"}},
      {"evaluate", {"--weights", "--starts", "--out"}},
      {"verify-bounds", {"--seeds", "--games", "--sizes", "--epsilon", "--pairing", "--out"}},
      {"sweep", {"--alphas", "--algos", "--out", "--jobs"}},
      {"study", {"--out", "--jobs"}},
  };
  for (const auto& [cmd, names] : flags) {
    CAPTURE(cmd);
    const Run r = cli({cmd, "--help"});
    CHECK(r.code == kExitOk);
    for (const std::string& f : names) {
      CAPTURE(f);
      CHECK(r.out.find(f) != std::string::npos);
    }
  }
  CHECK(cli({"verify-bounds", "--help"}).out.find("--test-bound-offset") == std::string::npos);
}

TEST_CASE("usage errors exit 1") {
  CHECK(cli({}).code == kExitConfig);
  CHECK(cli({"bogus"}).code == kExitConfig);
  CHECK(cli({"train", kMinimal, "--task", "task2"}).code == kExitConfig);
  CHECK(cli({"verify-bounds", "--sizes", "6,3"}).code == kExitConfig);
  CHECK(cli({"verify-bounds", "--epsilon", "x"}).code == kExitConfig);
}

TEST_CASE("train writes a library and is idempotent") {
  const fs::path a = scratch("train_a");
  const fs::path b = scratch("train_b");
  const Run r = cli({"train", kMinimal, "--task", "task2", "--algo", "sfminmax", "--out", a.string()});
  REQUIRE(r.code == kExitOk);
  CHECK(fs::exists(a / "library" / "library.json"));
  REQUIRE(cli({"train", kMinimal, "--task", "task2", "--algo", "sfminmax", "--out", b.string()})
              .code == kExitOk);
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), a);
    CAPTURE(rel.string());
    CHECK(slurp(entry.path()) == slurp(b / rel));
  }
  // 300 pretraining episodes on task1, 40 on task2.
  CHECK(lines(slurp(a / "episodes.jsonl")).size() == 340);
  const auto csv = lines(slurp(a / "metrics.csv"));
  REQUIRE(csv.size() == 3);
  CHECK(csv[1].rfind("sfminmax,task1,300,1,", 0) == 0);
  CHECK(csv[2].rfind("sfminmax,task2,40,1,", 0) == 0);

  const fs::path c = scratch("train_c");
  REQUIRE(cli({"train", kMinimal, "--task", "task1", "--algo", "minmax", "--seed", "7",
               "--episodes", "5", "--out", c.string()})
              .code == kExitOk);
  CHECK(lines(slurp(c / "episodes.jsonl")).size() == 5);
  CHECK(cli({"train", kMinimal, "--task", "task9", "--algo", "minmax", "--out", c.string()}).code ==
        kExitConfig);
  CHECK(cli({"train", kMinimal, "--task", "task1", "--algo", "sf_reset", "--out", c.string()})
            .code == kExitConfig);
  for (const fs::path& p : {a, b, c}) fs::remove_all(p);
}

TEST_CASE("malformed config JSON reports line and column and exits 1") {
  const fs::path dir = scratch("bad_json");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << "{\n  \"study\": ,\n}\n";
  const Run r = cli({"train", (dir / "bad.json").string(), "--task", "t", "--algo", "minmax",
                     "--out", (dir / "out").string()});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("bad.json:2:12:") != std::string::npos);
  CHECK(cli({"train", (dir / "missing.json").string(), "--task", "t", "--algo", "minmax", "--out",
             (dir / "out").string()})
            .code == kExitIo);
  fs::remove_all(dir);
}

TEST_CASE("transfer reports the one-shot row before training rows") {
  const fs::path base = scratch("transfer_base");
  const fs::path out = scratch("transfer_out");
  REQUIRE(cli({"train", kMinimal, "--task", "task2", "--algo", "sfminmax", "--out", base.string()})
              .code == kExitOk);
  const Run r = cli({"transfer", (base / "library").string(), "--new-task-weights", kNewWeights,
                     "--episodes", "25", "--out", out.string()});
  REQUIRE(r.code == kExitOk);
  const auto csv = lines(slurp(out / "metrics.csv"));
  REQUIRE(csv.size() == 3);
  CHECK(csv[1].rfind("sfminmax,task3,0,1,", 0) == 0);
  CHECK(csv[2].rfind("sfminmax,task3,25,1,", 0) == 0);

  // Nine greedy one-shot rollouts, then the training episodes.
  const auto eps = lines(slurp(out / "episodes.jsonl"));
  REQUIRE(eps.size() == 9 + 25);
  for (std::size_t i = 0; i < eps.size(); ++i) {
    CAPTURE(i);
    const auto doc = nlohmann::json::parse(eps[i]);
    CHECK(doc["phase"] == (i < 9 ? "eval" : "train"));
  }
  const auto manifest = nlohmann::json::parse(slurp(out / "library" / "library.json"));
  CHECK(manifest["tasks"].size() == 3);

  // In-place update when --out is omitted; a second identical run repeats the bytes.
  const fs::path copy = scratch("transfer_copy");
  fs::copy(base / "library", copy, fs::copy_options::recursive);
  REQUIRE(cli({"transfer", copy.string(), "--new-task-weights", kNewWeights, "--episodes", "25"})
              .code == kExitOk);
  CHECK(slurp(copy / "metrics.csv") == slurp(out / "metrics.csv"));
  CHECK(slurp(copy / "tables" / "task2_sf_ego.sfgt") ==
        slurp(out / "library" / "tables" / "task2_sf_ego.sfgt"));
  CHECK(cli({"transfer", copy.string(), "--new-task-weights", kNewWeights, "--task-id", "task3"})
            .code == kExitConfig);
  for (const fs::path& p : {base, out, copy}) fs::remove_all(p);
}

TEST_CASE("transfer error exits: empty library 2, dimension mismatch 3") {
  const fs::path empty = scratch("empty_lib");
  fs::create_directories(empty);
  CHECK(cli({"transfer", empty.string(), "--new-task-weights", kNewWeights}).code == kExitIo);
  CHECK(cli({"transfer", (empty / "nope").string(), "--new-task-weights", kNewWeights}).code ==
        kExitIo);

  const fs::path base = scratch("dim_base");
  REQUIRE(cli({"train", kMinimal, "--task", "task1", "--algo", "minmax", "--episodes", "3",
               "--out", base.string()})
              .code == kExitOk);
  const Run r = cli({"transfer", (base / "library").string(), "--new-task-weights", "1,0,0"});
  CHECK(r.code == kExitDimension);
  CHECK(r.err.find("9 features") != std::string::npos);
  CHECK(cli({"transfer", (base / "library").string(), "--new-task-weights", "1,,0"}).code ==
        kExitConfig);
  fs::remove_all(empty);
  fs::remove_all(base);
}

TEST_CASE("evaluate rolls out a saved library") {
  const fs::path empty = scratch("eval_empty");
  fs::create_directories(empty);
  CHECK(cli({"evaluate", empty.string(), "--out", (empty / "o").string()}).code == kExitIo);

  const fs::path base = scratch("eval_base");
  REQUIRE(cli({"train", kMinimal, "--task", "task2", "--algo", "prql", "--out", base.string()})
              .code == kExitOk);
  const fs::path out = base / "eval";
  REQUIRE(cli({"evaluate", (base / "library").string(), "--out", out.string()}).code == kExitOk);
  const auto csv = lines(slurp(out / "metrics.csv"));
  REQUIRE(csv.size() == 2);
  CHECK(csv[1].rfind("prql,task2,40,1,", 0) == 0);
  CHECK(lines(slurp(out / "episodes.jsonl")).size() == 9);
  CHECK(nlohmann::json::parse(slurp(out / "values.json")).size() == 9);

  REQUIRE(cli({"evaluate", (base / "library").string(), "--weights", kNewWeights, "--starts",
               "equal_distance", "--out", out.string()})
              .code == kExitOk);
  CHECK(lines(slurp(out / "metrics.csv"))[1].rfind("prql,task3,0,1,", 0) == 0);
  CHECK(lines(slurp(out / "episodes.jsonl")).size() == 1);
  CHECK(cli({"evaluate", (base / "library").string(), "--starts", "corner", "--out", out.string()})
            .code == kExitConfig);
  fs::remove_all(empty);
  fs::remove_all(base);
}

TEST_CASE("verify-bounds exit codes") {
  const fs::path dir = scratch("bounds");
  const Run full = cli({"verify-bounds", "--out", dir.string()});
  CHECK(full.code == kExitOk);
  const auto doc = nlohmann::json::parse(slurp(dir / "bounds.json"));
  CHECK(doc["passed"] == true);
  CHECK(doc["reports"].size() == 7);
  CHECK(nlohmann::json::parse(full.out) == doc);
  CHECK(full.err.find("all bounds held") != std::string::npos);

  CHECK(cli({"verify-bounds", "--epsilon", "0", "--games", "1"}).code == kExitOk);

  const Run broken = cli({"verify-bounds", "--games", "2", "--lemma-games", "2",
                          "--test-bound-offset", "1000"});
  CHECK(broken.code == kExitViolation);
  CHECK(broken.err.find("worst case (theorem1)") != std::string::npos);
  CHECK(nlohmann::json::parse(broken.out)["passed"] == false);
  fs::remove_all(dir);
}

TEST_CASE("sweep emits five rows per algorithm") {
  const fs::path dir = scratch("sweep");
  REQUIRE(cli({"sweep", kMinimal, "--algos", "minmax,sfminmax", "--out", dir.string(), "--jobs",
               "2"})
              .code == kExitOk);
  const auto rows = lines(slurp(dir / "sweep.csv"));
  REQUIRE(rows.size() == 1 + 10);
  for (const std::string& algo : {"minmax", "sfminmax"}) {
    CAPTURE(algo);
    const auto n = std::count_if(rows.begin(), rows.end(), [&](const std::string& r) {
      return r.rfind(algo + ",", 0) == 0;
    });
    CHECK(n == 5);
    const auto best = std::count_if(rows.begin(), rows.end(), [&](const std::string& r) {
      return r.rfind(algo + ",", 0) == 0 && r.back() == '1';
    });
    CHECK(best == 1);
  }
  const std::string first = slurp(dir / "sweep.csv");
  REQUIRE(cli({"sweep", kMinimal, "--algos", "minmax,sfminmax", "--out", dir.string()}).code ==
          kExitOk);
  CHECK(slurp(dir / "sweep.csv") == first);
  CHECK(cli({"sweep", kMinimal, "--algos", "qlearning", "--out", dir.string()}).code ==
        kExitConfig);
  fs::remove_all(dir);
}

TEST_CASE("study writes byte-identical artifacts on rerun") {
  const fs::path a = scratch("study_a");
  const fs::path b = scratch("study_b");
  REQUIRE(cli({"study", kMinimal, "--out", a.string()}).code == kExitOk);
  REQUIRE(cli({"study", kMinimal, "--out", b.string(), "--jobs", "3"}).code == kExitOk);
  for (const char* name : {"metrics.csv", "episodes.jsonl", "trajectories.jsonl"}) {
    CAPTURE(name);
    CHECK(slurp(a / name) == slurp(b / name));
  }
  CHECK(lines(slurp(a / "metrics.csv")).size() == 28);
  fs::remove_all(a);
  fs::remove_all(b);
}
