"""File formats: training sets, forests, densities, observed data, reports.

Training sets are CSV (one column per parameter and summary) with a JSON
sidecar carrying names and provenance. Forests serialise to npz with a
format version. Densities are two-column CSV. Reports are JSON plus small
CSV tables for the parts people plot.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .density import DensityEstimate
from .forest import QuantileForest
from .models import TrainingSet

__all__ = [
    "save_training_set",
    "load_training_set",
    "save_forest",
    "load_forest",
    "save_density",
    "load_density",
    "read_observed",
    "save_json",
    "save_conflict_report",
    "save_window_report",
]

FOREST_FORMAT_VERSION = 1
TRAINING_FORMAT_VERSION = 1


def _sidecar(path):
    path = Path(path)
    return path.with_suffix(".meta.json")


def save_training_set(ts, path):
    """CSV of params then summaries, plus a .meta.json sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ",".join(ts.param_names + ts.summary_names)
    data = np.column_stack((ts.params, ts.summaries))
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")
    meta = {
        "format_version": TRAINING_FORMAT_VERSION,
        "model_id": ts.model_id,
        "seed": ts.seed,
        "n": ts.n,
        "n_discarded": ts.n_discarded,
        "param_names": list(ts.param_names),
        "summary_names": list(ts.summary_names),
    }
    save_json(meta, _sidecar(path))
    return path


def load_training_set(path):
    path = Path(path)
    with open(_sidecar(path)) as fh:
        meta = json.load(fh)
    if meta.get("format_version") != TRAINING_FORMAT_VERSION:
        raise ValueError(f"unsupported training-set format in {path}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    p = len(meta["param_names"])
    return TrainingSet(
        params=data[:, :p],
        summaries=data[:, p:],
        param_names=tuple(meta["param_names"]),
        summary_names=tuple(meta["summary_names"]),
        model_id=meta["model_id"],
        seed=meta["seed"],
        n_discarded=meta["n_discarded"],
    )


def save_forest(forest, path):
    """npz snapshot of a fitted QuantileForest."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    params = json.dumps(forest.get_params())
    np.savez(
        path,
        format_version=FOREST_FORMAT_VERSION,
        params=params,
        feature=forest.feature_,
        threshold=forest.threshold_,
        left=forest.left_,
        right=forest.right_,
        leaf_start=forest.leaf_start_,
        leaf_count=forest.leaf_count_,
        leaf_rows=forest.leaf_rows_,
        tree_offset=forest.tree_offset_,
        tree_row_offset=forest.tree_row_offset_,
        y=forest.y_,
        n_features_in=forest.n_features_in_,
    )
    return path


def load_forest(path):
    with np.load(path, allow_pickle=False) as z:
        if int(z["format_version"]) != FOREST_FORMAT_VERSION:
            raise ValueError(f"unsupported forest format in {path}")
        forest = QuantileForest(**json.loads(str(z["params"])))
        forest.feature_ = z["feature"]
        forest.threshold_ = z["threshold"]
        forest.left_ = z["left"]
        forest.right_ = z["right"]
        forest.leaf_start_ = z["leaf_start"]
        forest.leaf_count_ = z["leaf_count"]
        forest.leaf_rows_ = z["leaf_rows"]
        forest.tree_offset_ = z["tree_offset"]
        forest.tree_row_offset_ = z["tree_row_offset"]
        forest.y_ = z["y"]
        forest.n_features_in_ = int(z["n_features_in"])
    forest.n_train_ = forest.y_.shape[0]
    forest.y_order_ = np.argsort(forest.y_, kind="mergesort").astype(np.int64)
    forest.y_sorted_ = forest.y_[forest.y_order_]
    forest._node_mean = None
    return forest


def save_density(density, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(
        path,
        np.column_stack((density.grid, density.values)),
        delimiter=",",
        header="grid,density",
        comments="",
        fmt="%.17g",
    )
    return path


def load_density(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return DensityEstimate(grid=data[:, 0], values=data[:, 1])


def read_observed(path):
    """Observed data as a 1-d vector.

    Accepts a single CSV row (one column per datum) or a single column
    (one row per series value); an optional non-numeric header line is
    skipped.
    """
    path = Path(path)
    with open(path) as fh:
        first = fh.readline()
    skip = 0
    try:
        [float(tok) for tok in first.replace(",", " ").split()]
    except ValueError:
        skip = 1
    data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    if data.shape[0] == 1:
        return data[0].astype(float)
    if data.shape[1] == 1:
        return data[:, 0].astype(float)
    raise ValueError(
        f"observed data must be a single row or single column, got shape {data.shape}"
    )


def save_json(obj, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def save_conflict_report(report, stem):
    """JSON report plus a reference-statistic CSV next to it."""
    stem = Path(stem)
    save_json(report.to_dict(), stem.with_suffix(".json"))
    np.savetxt(
        stem.with_suffix(".r_reference.csv"),
        report.r_reference,
        delimiter=",",
        header="r_reference",
        comments="",
        fmt="%.17g",
    )
    return stem.with_suffix(".json")


def save_window_report(report, stem):
    """JSON report plus the per-time-point table as CSV."""
    stem = Path(stem)
    save_json(report.to_dict(), stem.with_suffix(".json"))
    flagged = np.zeros(report.times.shape[0], dtype=int)
    flagged[report.flagged] = 1
    table = np.column_stack(
        (report.times, report.n_windows, report.r_mean, report.p_values, flagged)
    )
    np.savetxt(
        stem.with_suffix(".csv"),
        table,
        delimiter=",",
        header="t,n_windows,r_mean,p_value,flagged",
        comments="",
        fmt=("%d", "%d", "%.17g", "%.17g", "%d"),
    )
    return stem.with_suffix(".json")
