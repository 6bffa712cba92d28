"""Successor-feature transfer for alternating pursuit-evasion games.

Thin wrappers over the compiled ``_core`` module: configs are plain dicts
here and JSON text on the C++ side.
"""

import json as _json
import os as _os

from . import _core
from ._core import (
    ConfigError,
    ContractViolation,
    DimensionError,
    Error,
    IoError,
    RankDeficiencyError,
    ShapeError,
    fit_task_weights,
    run_cli,
    solve_qvi,
    spl,
)

__all__ = [
    "ConfigError",
    "ContractViolation",
    "DimensionError",
    "Error",
    "IoError",
    "Learner",
    "RankDeficiencyError",
    "ShapeError",
    "audit_lemma1",
    "audit_proposition1",
    "audit_theorem1",
    "fit_task_weights",
    "grid_preset",
    "load_experiment",
    "preset_experiment",
    "run_cli",
    "run_study",
    "solve_qvi",
    "spl",
    "task_presets",
]


def preset_experiment(kind):
    """Config dict of a built-in study: quantitative, policy-snapshots or training-transfer."""
    return _json.loads(_core.preset_experiment(kind))


def load_experiment(path):
    """Validated config dict from a JSON file, with every default filled in."""
    return _json.loads(_core.load_experiment(_os.fspath(path)))


def run_study(config, jobs=1):
    """Runs a study from a config dict or a path; returns the three artifact texts."""
    if isinstance(config, (str, _os.PathLike)):
        config = load_experiment(config)
    return _core.run_study(_json.dumps(config), jobs)


def grid_preset(name="default"):
    return _json.loads(_core.grid_preset(name))


def task_presets(group="default"):
    return _json.loads(_core.task_presets(group))


def audit_theorem1(seeds, sizes=(6, 3, 3), n_policies=5, epsilon=0.0, gamma=0.9,
                   pairing="best_response"):
    return _json.loads(_core.audit_theorem1(list(seeds), tuple(sizes), n_policies, epsilon,
                                            gamma, pairing))


def audit_lemma1(seeds, sizes=(6, 3, 3), gamma=0.9):
    return _json.loads(_core.audit_lemma1(list(seeds), tuple(sizes), gamma))


def audit_proposition1(seeds, sizes=(6, 3, 3), epsilon=0.05, gamma=0.9,
                       pairing="best_response"):
    return _json.loads(_core.audit_proposition1(list(seeds), tuple(sizes), epsilon, gamma,
                                                pairing))


class Learner:
    """One algorithm instance (both agents) on one grid."""

    def __init__(self, kind, grid="default", learner=None, *, _core_learner=None):
        if _core_learner is not None:
            self._impl = _core_learner
            return
        grid_doc = grid if isinstance(grid, dict) else grid_preset(grid)
        self._impl = _core.Learner(kind, _json.dumps(grid_doc), _json.dumps(learner or {}))

    @classmethod
    def load(cls, directory):
        return cls(None, _core_learner=_core.Learner.load(_os.fspath(directory)))

    def begin_task(self, task):
        self._impl.begin_task(_json.dumps(task))

    def train(self, episodes, starts="canonical_random"):
        return self._impl.train(episodes, starts)

    def state_value(self, evader, pursuer):
        return self._impl.state_value(tuple(evader), tuple(pursuer))

    def rollout(self, evader, pursuer):
        return self._impl.rollout(tuple(evader), tuple(pursuer))

    def value_table(self):
        return self._impl.value_table()

    def save(self, directory):
        self._impl.save(_os.fspath(directory))

    @property
    def task_ids(self):
        return self._impl.task_ids

    @property
    def kind(self):
        return self._impl.kind

    @property
    def epsilon(self):
        return self._impl.epsilon

    @property
    def feature_dim(self):
        return self._impl.feature_dim
