"""Python access to the hierarchical question recommender.

Experiment commands take a config as a dict (or nothing for the defaults)
plus optional ``section.key=value`` overrides, mirroring the command line.
"""

import json

from . import _hierrec
from ._hierrec import (
    CheckpointMismatch,
    ConfigError,
    CurriculumMap,
    HierrecError,
    KssSimulator,
    SimulatorSession,
    learning_effect,
    questions_for_concepts,
    returns,
    roc_auc,
)

__all__ = [
    "CheckpointMismatch",
    "ConfigError",
    "CurriculumMap",
    "HierrecError",
    "KssSimulator",
    "SimulatorSession",
    "default_config",
    "evaluate",
    "gen_logs",
    "learning_effect",
    "questions_for_concepts",
    "resolve_config",
    "returns",
    "roc_auc",
    "sweep",
    "train",
    "train_kt",
]


def _text(config):
    return "" if config is None else json.dumps(config)


def default_config():
    return json.loads(_hierrec.default_config())


def resolve_config(config=None, overrides=()):
    """Full validated config after defaults and overrides are applied."""
    return json.loads(_hierrec.resolve_config(_text(config), list(overrides)))


def gen_logs(config=None, overrides=()):
    return _hierrec.gen_logs(_text(config), list(overrides))


def train_kt(config=None, overrides=()):
    return _hierrec.train_kt(_text(config), list(overrides))


def train(config=None, overrides=()):
    return _hierrec.train(_text(config), list(overrides))


def evaluate(config=None, overrides=()):
    return _hierrec.evaluate(_text(config), list(overrides))


def sweep(config=None, overrides=()):
    return _hierrec.sweep(_text(config), list(overrides))
