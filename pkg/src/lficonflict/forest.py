"""Quantile regression forest with leaf-frequency weights.

Each query point receives a weight vector over the training rows: the
fraction of trees in which a training row shares the query's leaf, divided
by that leaf's size. Conditional CDFs, quantiles, and kernel density
estimates of the response all derive from those weights, so the forest acts
as a conditional-distribution regressor rather than a point predictor.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ._tree import apply_forest, batch_quantiles, grow_tree, leaf_means, query_weights
from .density import GridSpec, density_from_weights
from .rng import TREES, stream_state, substream
from .validation import check_fraction, check_int, check_matrix, check_vector

__all__ = ["QuantileForest"]


class QuantileForest(BaseEstimator):
    """Quantile regression forest over summary-statistic features.

    Parameters
    ----------
    n_trees : int, default=100
        Trees in the ensemble.
    mtry : int or None, default=None
        Features sampled per split; None resolves to max(1, round(q / 3)).
    min_node_size : int, default=5
        Nodes at or below this many rows become leaves.
    sample_fraction : float, default=0.632
        Fraction of rows drawn without replacement for each tree.
    max_depth : int, default=0
        Depth cap; 0 grows unlimited.
    random_state : int, default=0
        Stream key. Trees are grown on per-tree derived streams, so the fit
        is reproducible bit for bit regardless of thread count.

    Attributes
    ----------
    y_ : training responses, feature_/threshold_/left_/right_ : flat node
    arrays across all trees, leaf_rows_ : concatenated in-bag rows with
    leaf_start_/leaf_count_ slices per leaf, tree_offset_ : root index of
    each tree, tree_row_offset_ : in-bag row slice of each tree.
    """

    def __init__(
        self,
        n_trees=100,
        mtry=None,
        min_node_size=5,
        sample_fraction=0.632,
        max_depth=0,
        random_state=0,
    ):
        self.n_trees = n_trees
        self.mtry = mtry
        self.min_node_size = min_node_size
        self.sample_fraction = sample_fraction
        self.max_depth = max_depth
        self.random_state = random_state

    def _validate_params(self, n_features):
        n_trees = check_int(self.n_trees, "n_trees", minimum=1)
        if self.mtry is None:
            mtry = max(1, int(round(n_features / 3.0)))
        else:
            mtry = check_int(self.mtry, "mtry", minimum=1, maximum=n_features)
        min_node_size = check_int(self.min_node_size, "min_node_size", minimum=1)
        sample_fraction = check_fraction(self.sample_fraction, "sample_fraction")
        max_depth = check_int(self.max_depth, "max_depth", minimum=0)
        return n_trees, mtry, min_node_size, sample_fraction, max_depth

    def fit(self, X, y):
        """Grow the ensemble on features X (n, q) and responses y (n,)."""
        X = np.ascontiguousarray(check_matrix(X, "X", min_rows=2))
        y = check_vector(y, "y", min_len=2)
        if y.shape[0] != X.shape[0]:
            raise ValueError("X and y row counts differ")
        n, q = X.shape
        n_trees, mtry, min_node_size, sample_fraction, max_depth = self._validate_params(q)
        m = int(np.ceil(sample_fraction * n))

        parts = []
        for t in range(n_trees):
            rng = substream(self.random_state, TREES, t)
            inbag = np.sort(rng.choice(n, size=m, replace=False)).astype(np.int64)
            seed32 = stream_state(self.random_state, TREES, t)
            parts.append(grow_tree(X, y, inbag, mtry, min_node_size, max_depth, seed32))

        node_counts = np.array([p[0].shape[0] for p in parts], dtype=np.int64)
        row_counts = np.array([p[6].shape[0] for p in parts], dtype=np.int64)
        tree_offset = np.concatenate(([0], np.cumsum(node_counts)))
        row_offset = np.concatenate(([0], np.cumsum(row_counts)))

        def _shift(arrays, bases):
            out = []
            for arr, base in zip(arrays, bases):
                out.append(np.where(arr >= 0, arr + base, -1))
            return np.concatenate(out)

        self.feature_ = np.concatenate([p[0] for p in parts])
        self.threshold_ = np.concatenate([p[1] for p in parts])
        self.left_ = _shift([p[2] for p in parts], tree_offset[:-1])
        self.right_ = _shift([p[3] for p in parts], tree_offset[:-1])
        self.leaf_start_ = _shift([p[4] for p in parts], row_offset[:-1])
        self.leaf_count_ = np.concatenate([p[5] for p in parts])
        self.leaf_rows_ = np.concatenate([p[6] for p in parts])
        self.tree_offset_ = tree_offset
        self.tree_row_offset_ = row_offset
        self.y_ = y.copy()
        self.y_order_ = np.argsort(y, kind="mergesort").astype(np.int64)
        self.y_sorted_ = y[self.y_order_]
        self.n_features_in_ = q
        self.n_train_ = n
        self._node_mean = None
        return self

    def _check_fitted(self):
        if not hasattr(self, "feature_"):
            raise NotFittedError("this QuantileForest instance is not fitted yet")

    def _check_query(self, x):
        x = check_vector(x, "x", min_len=1)
        if x.shape[0] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {x.shape[0]}")
        return x

    def weights(self, x):
        """Leaf-frequency weight vector of one query point over training rows.

        Non-negative, sums to one across the training responses.
        """
        self._check_fitted()
        x = self._check_query(x)
        return query_weights(
            self.feature_,
            self.threshold_,
            self.left_,
            self.right_,
            self.leaf_start_,
            self.leaf_count_,
            self.leaf_rows_,
            self.tree_offset_,
            x,
            self.n_train_,
        )

    def cdf(self, x, values):
        """Weighted conditional CDF evaluated at the given response values."""
        w = self.weights(x)
        cum = np.cumsum(w[self.y_order_])
        idx = np.searchsorted(self.y_sorted_, np.asarray(values, dtype=float), side="right")
        out = np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)
        return out if np.ndim(values) else float(out)

    def quantile(self, x, levels):
        """Generalized-inverse conditional quantiles at the given levels."""
        levels = np.atleast_1d(np.asarray(levels, dtype=float))
        if np.any((levels <= 0) | (levels > 1)):
            raise ValueError("quantile levels must lie in (0, 1]")
        w = self.weights(x)
        cum = np.cumsum(w[self.y_order_])
        idx = np.minimum(np.searchsorted(cum, levels, side="left"), self.n_train_ - 1)
        return self.y_sorted_[idx]

    def predict_quantiles(self, X, levels):
        """Batch conditional quantiles; levels must be sorted ascending."""
        self._check_fitted()
        X = np.ascontiguousarray(check_matrix(X, "X"))
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        levels = np.asarray(levels, dtype=float)
        if np.any(np.diff(levels) < 0):
            raise ValueError("levels must be sorted ascending")
        if np.any((levels <= 0) | (levels > 1)):
            raise ValueError("quantile levels must lie in (0, 1]")
        return batch_quantiles(
            self.feature_,
            self.threshold_,
            self.left_,
            self.right_,
            self.leaf_start_,
            self.leaf_count_,
            self.leaf_rows_,
            self.tree_offset_,
            X,
            levels,
            self.y_order_,
            self.y_sorted_,
        )

    def _leaf_ids(self, X):
        return apply_forest(
            self.feature_, self.threshold_, self.left_, self.right_, self.tree_offset_, X
        )

    def _node_means(self):
        if self._node_mean is None:
            self._node_mean = leaf_means(
                self.feature_, self.leaf_start_, self.leaf_count_, self.leaf_rows_, self.y_
            )
        return self._node_mean

    def predict(self, X):
        """Ensemble mean prediction (average of per-tree leaf means)."""
        self._check_fitted()
        X = np.ascontiguousarray(check_matrix(X, "X"))
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return self._node_means()[self._leaf_ids(X)].mean(axis=0)

    def oob_predictions(self, X):
        """Out-of-bag mean predictions for the training matrix itself.

        Rows that were in-bag for every tree come back NaN.
        """
        self._check_fitted()
        X = np.ascontiguousarray(check_matrix(X, "X"))
        if X.shape != (self.n_train_, self.n_features_in_):
            raise ValueError("X must be the training matrix used in fit")
        node_mean = self._node_means()
        leaf_ids = self._leaf_ids(X)
        sums = np.zeros(self.n_train_)
        counts = np.zeros(self.n_train_)
        n_trees = self.tree_offset_.shape[0] - 1
        for t in range(n_trees):
            inbag = self.leaf_rows_[self.tree_row_offset_[t] : self.tree_row_offset_[t + 1]]
            oob = np.ones(self.n_train_, dtype=bool)
            oob[inbag] = False
            sums[oob] += node_mean[leaf_ids[t]][oob]
            counts[oob] += 1
        with np.errstate(invalid="ignore"):
            return np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)

    def oob_error(self, X):
        """Mean squared out-of-bag prediction error (NaN rows excluded)."""
        pred = self.oob_predictions(X)
        ok = np.isfinite(pred)
        if not np.any(ok):
            return np.nan
        return float(np.mean((pred[ok] - self.y_[ok]) ** 2))

    def density(self, x, grid=None, grid_spec=None, support=(-np.inf, np.inf)):
        """Weighted KDE of the response given the query point.

        Pass `grid` to evaluate on a shared common grid; otherwise a grid is
        built from this query's weighted sample per `grid_spec` and the
        support bounds.
        """
        w = self.weights(x)
        return density_from_weights(
            self.y_,
            w,
            spec=grid_spec if grid_spec is not None else GridSpec(),
            support=support,
            grid=grid,
            fallback_scale=float(self.y_sorted_[-1] - self.y_sorted_[0]),
        )
