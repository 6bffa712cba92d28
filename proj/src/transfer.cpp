#include "sfgame/transfer.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "sfgame/config.hpp"
#include "sfgame/errors.hpp"

namespace sfgame {

using nlohmann::json;

namespace {

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  void u64(std::uint64_t v) {
    std::array<unsigned char, 8> b{};
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b.data(), b.size());
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  [[nodiscard]] std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

bool same_shape(const FeatureTable& a, const FeatureTable& b) {
  return a.num_states() == b.num_states() && a.num_ego_actions() == b.num_ego_actions() &&
         a.num_other_actions() == b.num_other_actions() && a.dim() == b.dim();
}

double max_feature_norm(const FeatureTable& phi) {
  double best = 0.0;
  const auto& v = phi.values();
  for (std::size_t i = 0; i < v.size(); i += phi.dim()) {
    double sq = 0.0;
    for (std::size_t k = 0; k < phi.dim(); ++k) sq += v[i + k] * v[i + k];
    best = std::max(best, std::sqrt(sq));
  }
  return best;
}

double weight_gap(std::span<const double> w_i, std::span<const double> w_j) {
  double sq = 0.0;
  for (std::size_t k = 0; k < w_i.size(); ++k) sq += (w_i[k] - w_j[k]) * (w_i[k] - w_j[k]);
  return std::sqrt(sq);
}

// --- binary tables ---

constexpr std::array<char, 4> kMagic{'S', 'F', 'G', 'T'};
constexpr std::uint32_t kKindQ = 1;
constexpr std::uint32_t kKindFeature = 2;

struct TableHeader {
  std::uint32_t kind = 0;
  std::uint64_t states = 0;
  std::uint64_t ego_actions = 0;
  std::uint64_t other_actions = 0;
  std::uint64_t dim = 0;
  double discount = 0.0;
};

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>(v >> (8 * i)));
}
void put_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>(v >> (8 * i)));
}

std::uint64_t get_le(std::istream& in, int width, const std::filesystem::path& path) {
  std::array<unsigned char, 8> b{};
  in.read(reinterpret_cast<char*>(b.data()), width);
  if (!in) throw IoError(path.string() + ": truncated table file");
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_values(const std::filesystem::path& path, const TableHeader& h,
                  const std::vector<double>& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kTableFormatVersion);
  put_u32(out, h.kind);
  put_u64(out, h.states);
  put_u64(out, h.ego_actions);
  put_u64(out, h.other_actions);
  put_u64(out, h.dim);
  put_u64(out, std::bit_cast<std::uint64_t>(h.discount));
  for (double x : values) put_u64(out, std::bit_cast<std::uint64_t>(x));
  if (!out) throw IoError("failed writing " + path.string());
}

TableHeader read_header(std::istream& in, const std::filesystem::path& path,
                        std::uint32_t expected_kind) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw IoError(path.string() + ": not a table file");
  const auto version = static_cast<std::uint32_t>(get_le(in, 4, path));
  if (version != kTableFormatVersion) {
    throw IoError(path.string() + ": unsupported table version " + std::to_string(version));
  }
  TableHeader h;
  h.kind = static_cast<std::uint32_t>(get_le(in, 4, path));
  if (h.kind != expected_kind) throw IoError(path.string() + ": unexpected table kind");
  h.states = get_le(in, 8, path);
  h.ego_actions = get_le(in, 8, path);
  h.other_actions = get_le(in, 8, path);
  h.dim = get_le(in, 8, path);
  h.discount = std::bit_cast<double>(get_le(in, 8, path));
  // Guard against absurd sizes from a damaged header before allocating.
  const std::uint64_t cells = h.states * h.ego_actions * h.other_actions * h.dim;
  if (h.states == 0 || h.ego_actions == 0 || h.other_actions == 0 || h.dim == 0 ||
      cells > (std::uint64_t{1} << 32)) {
    throw IoError(path.string() + ": implausible table dimensions");
  }
  return h;
}

void read_values(std::istream& in, const std::filesystem::path& path, std::vector<double>& out) {
  for (double& x : out) x = std::bit_cast<double>(get_le(in, 8, path));
  if (in.peek() != std::char_traits<char>::eof()) {
    throw IoError(path.string() + ": trailing bytes after table values");
  }
}

std::ifstream open_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return in;
}

// --- manifest helpers ---

template <typename T>
T manifest_get(const json& doc, const char* key) {
  if (!doc.contains(key)) throw ConfigError(std::string("library.json: missing '") + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("library.json: bad value for '") + key + "'");
  }
}

std::string table_name(std::size_t index, const char* role) {
  return "tables/task" + std::to_string(index) + "_" + role + ".sfgt";
}

}  // namespace

// --- TaskLibrary ---

TaskLibrary TaskLibrary::from_learner(const Learner& learner) {
  if (!learner.uses_successor_features()) {
    throw ContractViolation("a task library needs a successor-feature learner");
  }
  TaskLibrary lib(learner.grid().feature_dim());
  const auto& tasks = learner.tasks();
  const auto& tables = learner.sf_library();
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const bool last = i + 1 == tasks.size();
    lib.add({tasks[i], tables[i], learner.episodes_per_task()[i],
             last ? learner.epsilon() : learner.config().epsilon0});
  }
  return lib;
}

void TaskLibrary::add(LibraryEntry entry) {
  if (entry.task.w.size() != feature_dim_ || entry.tables.dim() != feature_dim_) {
    throw DimensionError("task '" + entry.task.task_id + "' does not have " +
                         std::to_string(feature_dim_) + " features");
  }
  if (find(entry.task.task_id) != size()) {
    throw ContractViolation("task id '" + entry.task.task_id + "' is already in the library");
  }
  if (!same_shape(entry.tables.ego, entry.tables.other) ||
      (!entries_.empty() && !same_shape(entries_.front().tables.ego, entry.tables.ego))) {
    throw ContractViolation("SF tables of '" + entry.task.task_id + "' have a different shape");
  }
  entries_.push_back(std::move(entry));
}

std::size_t TaskLibrary::find(std::string_view task_id) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].task.task_id == task_id) return i;
  }
  return entries_.size();
}

std::vector<SFTable> TaskLibrary::tables() const {
  std::vector<SFTable> out;
  out.reserve(entries_.size());
  for (const LibraryEntry& e : entries_) out.push_back(e.tables);
  return out;
}

std::uint64_t TaskLibrary::content_hash() const {
  Fnv1a h;
  h.u64(feature_dim_);
  h.u64(entries_.size());
  for (const LibraryEntry& e : entries_) {
    h.str(e.task.task_id);
    h.u64(e.task.goal);
    for (double x : e.task.w) h.f64(x);
    h.u64(e.training_episodes);
    h.f64(e.final_epsilon);
    for (const FeatureTable* t : {&e.tables.ego, &e.tables.other}) {
      h.u64(t->num_states());
      for (double x : t->values()) h.f64(x);
    }
  }
  return h.value();
}

// --- evaluation ---

TaskEvaluation evaluate_on_task(const TaskLibrary& library, std::span<const double> w_new,
                                double discount, Aggregator agg, AgentRole role) {
  if (library.empty()) throw ContractViolation("cannot evaluate on an empty library");
  if (w_new.size() != library.feature_dim()) {
    throw DimensionError("task weights have " + std::to_string(w_new.size()) +
                         " entries, the library has " + std::to_string(library.feature_dim()) +
                         " features");
  }
  TaskEvaluation out;
  out.views.reserve(library.size());
  for (const LibraryEntry& e : library.entries()) {
    out.views.push_back(e.tables.role(role).contract(w_new, discount));
  }
  out.policy = ggpi_policy(out.views, agg);
  return out;
}

WeightFit fit_task_weights(std::span<const WeightObservation> observations, double ridge) {
  if (!(ridge >= 0.0)) throw ContractViolation("ridge must be >= 0");
  if (observations.empty()) throw ContractViolation("no observations to fit");
  const std::size_t d = observations.front().phi.size();
  if (d == 0) throw DimensionError("observations have no features");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(observations.size()), static_cast<Eigen::Index>(d));
  Eigen::VectorXd y(static_cast<Eigen::Index>(observations.size()));
  for (std::size_t i = 0; i < observations.size(); ++i) {
    if (observations[i].phi.size() != d) {
      throw DimensionError("observation " + std::to_string(i) + " has a different feature length");
    }
    for (std::size_t k = 0; k < d; ++k) {
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = observations[i].phi[k];
    }
    y(static_cast<Eigen::Index>(i)) = observations[i].reward;
  }
  Eigen::MatrixXd normal = X.transpose() * X;
  normal.diagonal().array() += ridge;
  const Eigen::VectorXd rhs = X.transpose() * y;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(normal);
  if (ridge == 0.0 && lu.rank() < static_cast<Eigen::Index>(d)) {
    throw RankDeficiencyError("design matrix has rank " + std::to_string(lu.rank()) + " < " +
                              std::to_string(d) + "; add observations or a ridge term");
  }
  const Eigen::VectorXd w = lu.solve(rhs);
  WeightFit fit;
  fit.w.assign(w.data(), w.data() + w.size());
  fit.residual_rms = std::sqrt((X * w - y).squaredNorm() / static_cast<double>(y.size()));
  return fit;
}

TaskDistance task_distance(const FeatureTable& phi, std::span<const double> w_i,
                           std::span<const double> w_j) {
  if (w_i.size() != phi.dim() || w_j.size() != phi.dim()) {
    throw DimensionError("task weights do not match the feature dimension");
  }
  TaskDistance d;
  for (std::size_t s = 0; s < phi.num_states(); ++s) {
    for (std::size_t a = 0; a < phi.num_ego_actions(); ++a) {
      for (std::size_t b = 0; b < phi.num_other_actions(); ++b) {
        d.exact = std::max(d.exact, std::abs(phi.dot(s, a, b, w_i) - phi.dot(s, a, b, w_j)));
      }
    }
  }
  d.factored = max_feature_norm(phi) * weight_gap(w_i, w_j);
  return d;
}

double reward_distance(const GameSpec& gi, const GameSpec& gj) {
  if (gi.num_entries() != gj.num_entries()) throw ShapeError("games differ in shape");
  double best = 0.0;
  for (std::size_t k = 0; k < gi.reward.size(); ++k) {
    best = std::max(best, std::abs(gi.reward[k] - gj.reward[k]));
  }
  return best;
}

TaskDistance task_distance(const TaskLibrary& library, std::size_t i, std::size_t j,
                           const GridConfig& grid) {
  const TaskWeights& ti = library.at(i).task;
  const TaskWeights& tj = library.at(j).task;
  if (grid.feature_dim() != library.feature_dim()) {
    throw DimensionError("grid and library disagree on the feature dimension");
  }
  TaskDistance d;
  d.exact = reward_distance(compile(grid, ti), compile(grid, tj));
  const double norm = std::max(max_feature_norm(compile_features(grid, ti.goal)),
                               max_feature_norm(compile_features(grid, tj.goal)));
  d.factored = norm * weight_gap(ti.w, tj.w);
  return d;
}

// --- persistence ---

void write_table(const std::filesystem::path& path, const QTable& table) {
  write_values(path,
               {kKindQ, table.num_states(), table.num_ego_actions(), table.num_other_actions(), 1,
                table.discount()},
               table.values());
}

void write_table(const std::filesystem::path& path, const FeatureTable& table) {
  write_values(path,
               {kKindFeature, table.num_states(), table.num_ego_actions(),
                table.num_other_actions(), table.dim(), 0.0},
               table.values());
}

QTable read_q_table(const std::filesystem::path& path) {
  auto in = open_binary(path);
  const TableHeader h = read_header(in, path, kKindQ);
  if (h.dim != 1) throw IoError(path.string() + ": Q table with dim != 1");
  QTable q(h.states, h.ego_actions, h.other_actions, h.discount);
  read_values(in, path, q.values());
  return q;
}

FeatureTable read_feature_table(const std::filesystem::path& path) {
  auto in = open_binary(path);
  const TableHeader h = read_header(in, path, kKindFeature);
  FeatureTable t(h.states, h.ego_actions, h.other_actions, h.dim);
  read_values(in, path, t.values());
  return t;
}

void save_learner(const std::filesystem::path& dir, const Learner& learner) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "tables", ec);
  if (ec) throw IoError("cannot create " + (dir / "tables").string() + ": " + ec.message());

  json tasks = json::array();
  for (std::size_t i = 0; i < learner.tasks().size(); ++i) {
    json t = task_to_json(learner.tasks()[i]);
    t["episodes"] = learner.episodes_per_task()[i];
    if (learner.uses_successor_features()) {
      t["sf_ego"] = table_name(i, "sf_ego");
      t["sf_other"] = table_name(i, "sf_other");
      write_table(dir / table_name(i, "sf_ego"), learner.sf_library()[i].ego);
      write_table(dir / table_name(i, "sf_other"), learner.sf_library()[i].other);
    } else {
      const bool current = i + 1 == learner.tasks().size();
      const QPair& pair = current ? learner.q() : learner.q_library()[i];
      t["q_ego"] = table_name(i, "q_ego");
      t["q_other"] = table_name(i, "q_other");
      write_table(dir / table_name(i, "q_ego"), pair.ego);
      write_table(dir / table_name(i, "q_other"), pair.other);
    }
    tasks.push_back(std::move(t));
  }
  const json manifest = {{"schema_version", kLibrarySchemaVersion},
                         {"algorithm", learner_kind_name(learner.kind())},
                         {"feature_dim", learner.grid().feature_dim()},
                         {"epsilon", learner.epsilon()},
                         {"learner", learner_config_to_json(learner.config())},
                         {"grid", grid_to_json(learner.grid())},
                         {"tasks", tasks}};
  std::ofstream out(dir / "library.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "library.json").string());
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + (dir / "library.json").string());
}

Learner load_learner(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "library.json";
  if (!std::filesystem::exists(manifest_path)) {
    throw IoError("no library manifest at " + manifest_path.string());
  }
  const json doc = read_json_file(manifest_path);
  if (manifest_get<int>(doc, "schema_version") != kLibrarySchemaVersion) {
    throw ConfigError("library.json: unsupported schema_version");
  }
  const LearnerKind kind = parse_learner_kind(manifest_get<std::string>(doc, "algorithm"));
  const LearnerConfig cfg = learner_config_from_json(doc.at("learner"));
  const GridConfig grid = grid_from_json(doc.at("grid"));
  if (manifest_get<std::size_t>(doc, "feature_dim") != grid.feature_dim()) {
    throw ConfigError("library.json: feature_dim does not match the grid");
  }
  const json& tasks_doc = doc.at("tasks");
  if (!tasks_doc.is_array() || tasks_doc.empty()) {
    throw ConfigError("library.json: 'tasks' must be a non-empty array");
  }

  Learner learner(kind, cfg, grid);
  std::vector<TaskWeights> tasks;
  std::vector<std::size_t> episodes;
  std::vector<SFTable> sf;
  std::vector<QPair> archived;
  std::optional<QPair> current;
  for (std::size_t i = 0; i < tasks_doc.size(); ++i) {
    const json& t = tasks_doc[i];
    json task_only = t;
    for (const char* k : {"episodes", "sf_ego", "sf_other", "q_ego", "q_other"}) task_only.erase(k);
    tasks.push_back(task_from_json(task_only));
    episodes.push_back(manifest_get<std::size_t>(t, "episodes"));
    if (learner.uses_successor_features()) {
      SFTable pair;
      pair.task_id = tasks.back().task_id;
      pair.ego = read_feature_table(dir / manifest_get<std::string>(t, "sf_ego"));
      pair.other = read_feature_table(dir / manifest_get<std::string>(t, "sf_other"));
      sf.push_back(std::move(pair));
    } else {
      QPair pair{read_q_table(dir / manifest_get<std::string>(t, "q_ego")),
                 read_q_table(dir / manifest_get<std::string>(t, "q_other"))};
      if (i + 1 == tasks_doc.size()) {
        current = std::move(pair);
      } else {
        archived.push_back(std::move(pair));
      }
    }
  }
  learner.restore(std::move(tasks), std::move(episodes), std::move(sf), std::move(archived),
                  std::move(current), manifest_get<double>(doc, "epsilon"));
  return learner;
}

}  // namespace sfgame
