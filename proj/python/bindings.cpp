// Python bindings. Configs cross the boundary as JSON text; the Python
// package wraps them into dicts.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include <json.hpp>

#include "sfgame/bounds.hpp"
#include "sfgame/cli.hpp"
#include "sfgame/config.hpp"
#include "sfgame/errors.hpp"
#include "sfgame/eval.hpp"
#include "sfgame/transfer.hpp"

namespace py = pybind11;
using namespace sfgame;
using nlohmann::json;

namespace {

GridState make_state(std::pair<int, int> evader, std::pair<int, int> pursuer) {
  GridState s;
  s.evader = {evader.first, evader.second};
  s.pursuer = {pursuer.first, pursuer.second};
  return s;
}

Outcome parse_outcome(const std::string& name) {
  for (Outcome o : {Outcome::evader_win, Outcome::pursuer_win, Outcome::tie, Outcome::ongoing}) {
    if (outcome_name(o) == name) return o;
  }
  throw ConfigError("unknown outcome '" + name + "'");
}

py::dict episode_dict(const EpisodeResult& r) {
  py::dict d;
  d["task"] = r.task_id;
  d["winner"] = std::string(outcome_name(r.winner));
  d["ego_return"] = r.ego_return;
  d["path_length"] = r.path_length;
  return d;
}

py::dict summary_dict(const MetricsRow& row) {
  py::dict d;
  d["episodes"] = row.episodes;
  d["sr_ewin"] = row.sr.ewin;
  d["sr_pwin"] = row.sr.pwin;
  d["sr_tie"] = row.sr.tie;
  d["mean_return"] = row.mean_return;
  return d;
}

py::array_t<double> q_array(const QTable& q) {
  py::array_t<double> out({q.num_states(), q.num_ego_actions(), q.num_other_actions()});
  std::copy(q.values().begin(), q.values().end(), out.mutable_data());
  return out;
}

GameSizes sizes_of(std::tuple<std::size_t, std::size_t, std::size_t> t) {
  return {std::get<0>(t), std::get<1>(t), std::get<2>(t)};
}

AuditOptions options_of(const std::string& pairing) {
  AuditOptions o;
  o.pairing = parse_pairing(pairing);
  return o;
}

class PyLearner {
 public:
  PyLearner(const std::string& kind, const std::string& grid_json, const std::string& learner_json)
      : learner_(parse_learner_kind(kind),
                 learner_config_from_json(parse_json_text(learner_json, "learner")),
                 grid_from_json(parse_json_text(grid_json, "grid"))) {}
  explicit PyLearner(Learner learner) : learner_(std::move(learner)) {}

  void begin_task(const std::string& task_json) {
    learner_.begin_task(task_from_json(parse_json_text(task_json, "task")));
  }

  py::dict train(std::size_t episodes, const std::string& starts) {
    const TaskWeights& task = learner_.task();
    TrainingStarts picker(parse_start_mode(starts), learner_.grid(), learner_.config().seed,
                          task.task_id);
    std::vector<EpisodeResult> results;
    results.reserve(episodes);
    {
      py::gil_scoped_release release;
      for (std::size_t e = 0; e < episodes; ++e) {
        results.push_back(run_episode(learner_, picker.next(), kTrain, e));
      }
    }
    return summary_dict(summarize_episodes(std::string(learner_kind_name(learner_.kind())),
                                           task.task_id, episodes, learner_.config().seed,
                                           results));
  }

  double state_value(std::pair<int, int> evader, std::pair<int, int> pursuer) const {
    return learner_.state_value(make_state(evader, pursuer));
  }

  py::dict rollout(std::pair<int, int> evader, std::pair<int, int> pursuer) {
    std::vector<TurnRecord> turns;
    const EpisodeResult r = run_episode(learner_, make_state(evader, pursuer), kGreedy, 0, &turns);
    py::dict d = episode_dict(r);
    py::list steps;
    for (const TurnRecord& t : turns) {
      py::dict s;
      s["step"] = t.step;
      s["evader"] = py::make_tuple(t.evader.x, t.evader.y);
      s["pursuer"] = py::make_tuple(t.pursuer.x, t.pursuer.y);
      s["a"] = t.a;
      s["b"] = t.b;
      s["reward"] = t.reward;
      s["outcome"] = std::string(outcome_name(t.outcome));
      steps.append(s);
    }
    d["turns"] = steps;
    return d;
  }

  [[nodiscard]] py::array_t<double> value_table() const { return q_array(learner_.value_table()); }

  [[nodiscard]] std::vector<std::string> task_ids() const {
    std::vector<std::string> ids;
    for (const TaskWeights& t : learner_.tasks()) ids.push_back(t.task_id);
    return ids;
  }

  [[nodiscard]] std::string kind() const { return std::string(learner_kind_name(learner_.kind())); }
  [[nodiscard]] double epsilon() const { return learner_.epsilon(); }
  [[nodiscard]] std::size_t feature_dim() const { return learner_.grid().feature_dim(); }

  void save(const std::string& dir) const { save_learner(dir, learner_); }

 private:
  Learner learner_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Successor-feature transfer for alternating pursuit-evasion games";

  // Later registrations are tried first, so the base class goes first.
  auto& base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ContractViolation>(m, "ContractViolation", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<RankDeficiencyError>(m, "RankDeficiencyError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("preset_experiment", [](const std::string& kind) {
    return experiment_to_json(preset_experiment(parse_study_kind(kind))).dump();
  });
  m.def("load_experiment", [](const std::string& path) {
    return experiment_to_json(load_experiment(path)).dump();
  });
  m.def("normalize_experiment", [](const std::string& text) {
    return experiment_to_json(experiment_from_json(parse_json_text(text, "config"))).dump();
  });
  m.def(
      "run_study",
      [](const std::string& text, std::size_t jobs) {
        const ExperimentConfig cfg = experiment_from_json(parse_json_text(text, "config"));
        StudyArtifacts art;
        {
          py::gil_scoped_release release;
          art = run_study(cfg, jobs);
        }
        py::dict d;
        d["metrics_csv"] = art.metrics_csv;
        d["episodes_jsonl"] = art.episodes_jsonl;
        d["trajectories_jsonl"] = art.trajectories_jsonl;
        return d;
      },
      py::arg("config"), py::arg("jobs") = 1);

  m.def("grid_preset", [](const std::string& name) { return grid_to_json(grid_from_json(name)).dump(); });
  m.def("task_presets", [](const std::string& group) {
    json out = json::array();
    for (const TaskWeights& t : task_weight_presets(group)) out.push_back(task_to_json(t));
    return out.dump();
  });

  m.def(
      "solve_qvi",
      [](std::uint64_t seed, std::tuple<std::size_t, std::size_t, std::size_t> sizes, double gamma,
         double tol) {
        const QviResult r = solve_qvi(random_game(seed, sizes_of(sizes), gamma), tol);
        py::dict d;
        d["q"] = q_array(r.q);
        d["residuals"] = r.residuals;
        d["converged"] = r.converged;
        return d;
      },
      py::arg("seed"), py::arg("sizes") = std::make_tuple(6, 3, 3), py::arg("gamma") = 0.9,
      py::arg("tol") = kDefaultQviTolerance, "Q-VI on a seeded random game.");

  m.def(
      "audit_theorem1",
      [](std::vector<std::uint64_t> seeds, std::tuple<std::size_t, std::size_t, std::size_t> sizes,
         std::size_t n_policies, double epsilon, double gamma, const std::string& pairing) {
        return report_to_json(
                   audit_theorem1(seeds, sizes_of(sizes), n_policies, epsilon, gamma, options_of(pairing)))
            .dump();
      },
      py::arg("seeds"), py::arg("sizes") = std::make_tuple(6, 3, 3), py::arg("n_policies") = 5,
      py::arg("epsilon") = 0.0, py::arg("gamma") = 0.9, py::arg("pairing") = "best_response");
  m.def(
      "audit_lemma1",
      [](std::vector<std::uint64_t> seeds, std::tuple<std::size_t, std::size_t, std::size_t> sizes,
         double gamma) { return report_to_json(audit_lemma1(seeds, sizes_of(sizes), gamma)).dump(); },
      py::arg("seeds"), py::arg("sizes") = std::make_tuple(6, 3, 3), py::arg("gamma") = 0.9);
  m.def(
      "audit_proposition1",
      [](std::vector<std::uint64_t> seeds, std::tuple<std::size_t, std::size_t, std::size_t> sizes,
         double epsilon, double gamma, const std::string& pairing) {
        return report_to_json(audit_proposition1(seeds, sizes_of(sizes), epsilon, gamma, {},
                                                 options_of(pairing)))
            .dump();
      },
      py::arg("seeds"), py::arg("sizes") = std::make_tuple(6, 3, 3), py::arg("epsilon") = 0.05,
      py::arg("gamma") = 0.9, py::arg("pairing") = "best_response");

  m.def(
      "fit_task_weights",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> phi,
         py::array_t<double, py::array::c_style | py::array::forcecast> rewards, double ridge) {
        if (phi.ndim() != 2 || rewards.ndim() != 1 || phi.shape(0) != rewards.shape(0)) {
          throw DimensionError("fit_task_weights: expected phi (n, d) and rewards (n,)");
        }
        const auto n = static_cast<std::size_t>(phi.shape(0));
        const auto d = static_cast<std::size_t>(phi.shape(1));
        std::vector<WeightObservation> obs(n);
        for (std::size_t i = 0; i < n; ++i) {
          obs[i].phi.assign(phi.data() + i * d, phi.data() + (i + 1) * d);
          obs[i].reward = rewards.data()[i];
        }
        const WeightFit fit = fit_task_weights(obs, ridge);
        py::array_t<double> w(std::vector<py::ssize_t>{static_cast<py::ssize_t>(fit.w.size())});
        std::copy(fit.w.begin(), fit.w.end(), w.mutable_data());
        return py::make_tuple(w, fit.residual_rms);
      },
      py::arg("phi"), py::arg("rewards"), py::arg("ridge") = 0.0);

  m.def(
      "spl",
      [](const std::vector<std::string>& winners, const std::vector<int>& agent_lengths,
         const std::vector<int>& reference_lengths) {
        if (winners.size() != agent_lengths.size() || winners.size() != reference_lengths.size()) {
          throw DimensionError("spl: the three lists must have the same length");
        }
        std::vector<EpisodeResult> results(winners.size());
        std::map<std::string, int> reference;
        for (std::size_t i = 0; i < winners.size(); ++i) {
          results[i].winner = parse_outcome(winners[i]);
          results[i].path_length = agent_lengths[i];
          results[i].start.evader = {static_cast<int>(i), 0};
          reference[start_key(results[i].start)] = reference_lengths[i];
        }
        const PathScores ps = spl(results, reference);
        return py::make_tuple(ps.spl, ps.path_efficiency);
      },
      py::arg("winners"), py::arg("agent_lengths"), py::arg("reference_lengths"),
      "Returns (spl, path_efficiency); one entry per episode.");

  py::class_<PyLearner>(m, "Learner")
      .def(py::init<const std::string&, const std::string&, const std::string&>(), py::arg("kind"),
           py::arg("grid"), py::arg("learner"))
      .def("begin_task", &PyLearner::begin_task, py::arg("task"))
      .def("train", &PyLearner::train, py::arg("episodes"), py::arg("starts") = "canonical_random")
      .def("state_value", &PyLearner::state_value, py::arg("evader"), py::arg("pursuer"))
      .def("rollout", &PyLearner::rollout, py::arg("evader"), py::arg("pursuer"))
      .def("value_table", &PyLearner::value_table)
      .def("save", &PyLearner::save, py::arg("directory"))
      .def_property_readonly("task_ids", &PyLearner::task_ids)
      .def_property_readonly("kind", &PyLearner::kind)
      .def_property_readonly("epsilon", &PyLearner::epsilon)
      .def_property_readonly("feature_dim", &PyLearner::feature_dim)
      .def_static("load", [](const std::string& dir) { return PyLearner(load_learner(dir)); },
                  py::arg("directory"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> full{"sfgame"};
        full.insert(full.end(), args.begin(), args.end());
        std::vector<const char*> argv;
        for (const std::string& a : full) argv.push_back(a.c_str());
        std::ostringstream out;
        std::ostringstream err;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in process; returns (code, stdout, stderr).");
}
