"""Experiment configuration: one JSON file drives the command-line flow.

Top-level keys (all optional unless noted):

* model (required): "poisson", "stereo", or "ricker"
* model_options: forwarded to the model constructor; ricker additionally
  accepts {"summaries": "setar" | "raw"} and needs setar_threshold unless
  fit_threshold is true, in which case it is selected from the observed
  series
* prior: list of {"name", "kind": "gamma"|"uniform", ...} overriding the
  model default
* n_train (required for gen-train), seed, out (output directory)
* targets: parameter names to regress on (default: all)
* forest: hyperparameters for training
* tuning: {"grid": [ {...}, ... ], "folds": 3}; empty grid means the
  built-in default grid
* partitions: [{"name": ..., "keep": [summary names]}, ...]
* imputation: {"engine": "linear-bayes"|"forest", "n_imputations": 100,
  "n_reference": 100}
* abc: {"k": 500, "subset": [summary names]}
* grid: {"size": 512, "tail": 0.001, "expand": 0.1}
* window: {"k": 4, "patch_pad": 8, "flag_level": 0.05}
* threads: worker threads for compiled query loops
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .density import GridSpec
from .models import MODELS

__all__ = ["ConfigError", "ExperimentConfig", "load_config"]

_KNOWN_KEYS = {
    "model",
    "model_options",
    "prior",
    "n_train",
    "seed",
    "out",
    "targets",
    "forest",
    "tuning",
    "partitions",
    "imputation",
    "abc",
    "grid",
    "window",
    "threads",
}


class ConfigError(Exception):
    """Invalid or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    model: str
    model_options: dict = field(default_factory=dict)
    prior: list = None
    n_train: int = None
    seed: int = 0
    out: str = "runs/out"
    targets: list = None
    forest: dict = field(default_factory=dict)
    tuning: dict = None
    partitions: list = field(default_factory=list)
    imputation: dict = field(default_factory=dict)
    abc: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    window: dict = field(default_factory=dict)
    threads: int = None

    def grid_spec(self):
        try:
            return GridSpec(**self.grid)
        except (TypeError, ValueError) as err:
            raise ConfigError(f"grid: {err}") from err

    def imputation_engine_name(self):
        engine = self.imputation.get("engine", "linear-bayes")
        if engine not in ("linear-bayes", "forest"):
            raise ConfigError(f"unknown imputation engine {engine!r}")
        return engine

    def n_imputations(self):
        return int(self.imputation.get("n_imputations", 100))

    def n_reference(self):
        return int(self.imputation.get("n_reference", 100))


def load_config(path):
    path = Path(path)
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError as err:
        raise ConfigError(f"config file not found: {path}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "model" not in raw:
        raise ConfigError("config needs a 'model' key")
    if raw["model"] not in MODELS:
        raise ConfigError(f"unknown model {raw['model']!r}; choose from {list(MODELS)}")
    for key, kind in (
        ("model_options", dict),
        ("forest", dict),
        ("imputation", dict),
        ("abc", dict),
        ("grid", dict),
        ("window", dict),
        ("partitions", list),
    ):
        if key in raw and not isinstance(raw[key], kind):
            raise ConfigError(f"config key {key!r} must be a {kind.__name__}")
    if "n_train" in raw:
        if not isinstance(raw["n_train"], int) or raw["n_train"] < 1:
            raise ConfigError("n_train must be a positive integer")
    for part in raw.get("partitions", []):
        if not isinstance(part, dict) or "keep" not in part:
            raise ConfigError("each partition needs a 'keep' list of summary names")
    return ExperimentConfig(**raw)
