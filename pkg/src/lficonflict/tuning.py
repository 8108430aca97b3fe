"""Cross-validated hyperparameter selection for the quantile forest.

The criterion is mean pinball loss over a fixed ladder of quantile levels,
averaged across folds. Ties prefer the smaller mtry, then the larger
min_node_size (the smoother model).
"""

from __future__ import annotations

import numpy as np

from .forest import QuantileForest
from .rng import FOLDS, stream_state, substream
from .validation import check_int, check_matrix, check_vector

__all__ = ["DEFAULT_LEVELS", "pinball_loss", "kfold_indices", "cv_pinball_loss", "tune_forest", "default_grid"]

DEFAULT_LEVELS = np.linspace(0.1, 0.9, 9)


def pinball_loss(y_true, y_pred, level):
    """Mean pinball (quantile) loss at one level; level 0.5 gives MAE / 2."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    d = y_true - y_pred
    return float(np.mean(np.where(d >= 0, level * d, (level - 1.0) * d)))


def kfold_indices(n, folds, seed):
    """Deterministic shuffled k-fold split of range(n)."""
    n = check_int(n, "n", minimum=2)
    folds = check_int(folds, "folds", minimum=2, maximum=n)
    perm = substream(seed, FOLDS).permutation(n)
    out = []
    for val in np.array_split(perm, folds):
        mask = np.ones(n, dtype=bool)
        mask[val] = False
        out.append((np.flatnonzero(mask), np.sort(val)))
    return out


def _resolve(params, n_features):
    resolved = {
        "n_trees": 100,
        "mtry": None,
        "min_node_size": 5,
        "sample_fraction": 0.632,
        "max_depth": 0,
    }
    unknown = set(params) - set(resolved)
    if unknown:
        raise ValueError(f"unknown forest parameters: {sorted(unknown)}")
    resolved.update(params)
    if resolved["mtry"] is None:
        resolved["mtry"] = max(1, int(round(n_features / 3.0)))
    return resolved


def cv_pinball_loss(X, y, params, folds=3, seed=0, levels=DEFAULT_LEVELS):
    """Mean CV pinball loss of one hyperparameter setting."""
    X = check_matrix(X, "X")
    y = check_vector(y, "y")
    levels = np.sort(np.asarray(levels, dtype=float))
    params = _resolve(params, X.shape[1])
    losses = []
    for f, (train_idx, val_idx) in enumerate(kfold_indices(X.shape[0], folds, seed)):
        forest = QuantileForest(random_state=stream_state(seed, FOLDS, f), **params)
        forest.fit(X[train_idx], y[train_idx])
        pred = forest.predict_quantiles(X[val_idx], levels)
        fold_loss = np.mean(
            [pinball_loss(y[val_idx], pred[:, j], lv) for j, lv in enumerate(levels)]
        )
        losses.append(fold_loss)
    return float(np.mean(losses))


def tune_forest(X, y, grid, folds=3, seed=0, levels=DEFAULT_LEVELS):
    """Evaluate a grid of parameter dicts; returns (best_params, results).

    results is a list of (resolved_params, loss) in grid order. Ties go to
    the smaller mtry, then the larger min_node_size.
    """
    X = check_matrix(X, "X")
    if not grid:
        raise ValueError("grid must contain at least one parameter setting")
    results = []
    best, best_key = None, None
    for params in grid:
        resolved = _resolve(params, X.shape[1])
        loss = cv_pinball_loss(X, y, resolved, folds=folds, seed=seed, levels=levels)
        results.append((resolved, loss))
        key = (loss, resolved["mtry"], -resolved["min_node_size"])
        if best_key is None or key < best_key:
            best, best_key = resolved, key
    return best, results


def default_grid(n_features):
    """Small default grid over mtry and node size."""
    mtries = sorted({max(1, n_features // 3), max(1, int(np.sqrt(n_features))), n_features})
    return [
        {"mtry": mtry, "min_node_size": mns}
        for mtry in mtries
        for mns in (5, 20, 50)
    ]
