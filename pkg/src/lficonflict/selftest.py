"""Invariant suites runnable from the command line.

Each check pits a fast implementation against a slow, independently coded
reference (brute-force recursion, dense covariance algebra) or verifies an
algebraic identity that must hold to tight tolerance. The same functions
back the test suite, so `selftest` on an installed copy reproduces what CI
asserts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import DensityEstimate, trapezoid
from .diagnostics import max_log_relative_belief
from .forest import QuantileForest
from .imputation import Ar1Params, ar1_conditional
from .models import SummaryPartition

__all__ = ["CheckResult", "run_all", "reference_cart", "dense_schur_conditional"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


# --- reference implementations -------------------------------------------

def reference_cart(X, y, rows, min_node_size, depth=0, max_depth=0):
    """Brute-force CART mirroring the compiled grower's rules and arithmetic.

    Exhaustive over all features (the mtry == q case), plain-Python float
    accumulation in the same order as the kernel, strict-improvement scan in
    ascending (feature, threshold) order. Returns nested dicts.
    """
    size = len(rows)
    is_leaf = size <= min_node_size or (max_depth > 0 and depth >= max_depth)
    if not is_leaf:
        is_leaf = bool(np.all(y[rows] == y[rows[0]]))

    best = None
    if not is_leaf:
        best_score = np.inf
        for f in range(X.shape[1]):
            xs = X[rows, f]
            order = np.argsort(xs, kind="mergesort")
            ys = y[np.asarray(rows)[order]]
            s_tot = 0.0
            s2_tot = 0.0
            for v in ys:
                s_tot += float(v)
                s2_tot += float(v) * float(v)
            s_l = 0.0
            s2_l = 0.0
            for i in range(1, size):
                yv = float(ys[i - 1])
                s_l += yv
                s2_l += yv * yv
                xa = xs[order[i - 1]]
                xb = xs[order[i]]
                if xb <= xa:
                    continue
                nl = float(i)
                nr = float(size - i)
                score = (s2_l - s_l * s_l / nl) + (
                    (s2_tot - s2_l) - (s_tot - s_l) * (s_tot - s_l) / nr
                )
                if score < best_score:
                    best_score = score
                    best = (f, 0.5 * (xa + xb), i)

    if is_leaf or best is None:
        return {"rows": sorted(int(r) for r in rows)}

    f, thr, nl = best
    order = np.argsort(X[rows, f], kind="mergesort")
    rows_sorted = list(np.asarray(rows)[order])
    return {
        "feature": f,
        "threshold": thr,
        "left": reference_cart(X, y, rows_sorted[:nl], min_node_size, depth + 1, max_depth),
        "right": reference_cart(X, y, rows_sorted[nl:], min_node_size, depth + 1, max_depth),
    }


def _forest_tree_matches(forest, node, ref):
    if "rows" in ref:
        if forest.feature_[node] >= 0:
            return False
        s = forest.leaf_start_[node]
        c = forest.leaf_count_[node]
        return sorted(int(r) for r in forest.leaf_rows_[s : s + c]) == ref["rows"]
    return (
        forest.feature_[node] == ref["feature"]
        and forest.threshold_[node] == ref["threshold"]
        and _forest_tree_matches(forest, forest.left_[node], ref["left"])
        and _forest_tree_matches(forest, forest.right_[node], ref["right"])
    )


def dense_schur_conditional(params, patch, window):
    """AR(1) conditional via the dense covariance Schur complement."""
    patch = np.sort(np.asarray(patch, dtype=np.int64))
    window = np.sort(np.asarray(window, dtype=np.int64))
    sigma = params.marginal_var * params.phi ** np.abs(patch[:, None] - patch[None, :])
    w = np.isin(patch, window)
    o = ~w
    s_ww = sigma[np.ix_(w, w)]
    if not np.any(o):
        return np.zeros((window.size, 0)), s_ww
    s_wo = sigma[np.ix_(w, o)]
    s_oo = sigma[np.ix_(o, o)]
    a = s_wo @ np.linalg.inv(s_oo)
    return a, s_ww - a @ s_wo.T


# --- checks ----------------------------------------------------------------

def _check_weight_simplex(rng):
    X = rng.standard_normal((200, 3))
    y = X[:, 0] + 0.5 * rng.standard_normal(200)
    forest = QuantileForest(n_trees=25, random_state=7).fit(X, y)
    worst_sum = 0.0
    worst_neg = 0.0
    for _ in range(100):
        w = forest.weights(rng.standard_normal(3))
        worst_sum = max(worst_sum, abs(w.sum() - 1.0))
        worst_neg = min(worst_neg, w.min())
    ok = worst_sum <= 1e-12 and worst_neg >= 0.0
    return CheckResult(
        "forest weights form a probability vector",
        ok,
        f"max |sum(w) - 1| = {worst_sum:.3e}, min weight = {worst_neg:.3e}",
    )


def _check_cdf_quantile_monotone(rng):
    X = rng.standard_normal((200, 3))
    y = X[:, 0] + 0.5 * rng.standard_normal(200)
    forest = QuantileForest(n_trees=25, random_state=11).fit(X, y)
    levels = np.linspace(0.01, 1.0, 40)
    ys = np.linspace(y.min() - 1, y.max() + 1, 60)
    ok = True
    detail = "cdf nondecreasing, bounded; quantiles nondecreasing"
    for _ in range(20):
        x = rng.standard_normal(3)
        cdf = forest.cdf(x, ys)
        qs = forest.quantile(x, levels)
        if np.any(np.diff(cdf) < 0) or np.any(np.diff(qs) < 0):
            ok, detail = False, "monotonicity violated"
            break
        if forest.cdf(x, y.min() - 10) != 0.0 or abs(forest.cdf(x, y.max() + 10) - 1.0) > 1e-12:
            ok, detail = False, "cdf bounds violated"
            break
    return CheckResult("conditional CDF and quantiles are monotone", ok, detail)


def _check_density_normalisation(rng):
    X = rng.standard_normal((300, 2))
    y = 2.0 * X[:, 0] + rng.standard_normal(300)
    forest = QuantileForest(n_trees=25, random_state=3).fit(X, y)
    worst = 0.0
    for _ in range(10):
        d = forest.density(rng.standard_normal(2))
        worst = max(worst, abs(d.integral() - 1.0))
    return CheckResult(
        "posterior densities integrate to one",
        worst <= 1e-9,
        f"max |integral - 1| = {worst:.3e}",
    )


def _check_relative_belief_identity(rng):
    worst = 0.0
    exact = True
    for _ in range(20):
        grid = np.linspace(-3, 3, 256) * rng.uniform(0.5, 2.0) + rng.uniform(-1, 1)
        raw = np.exp(rng.standard_normal() * 0.3 - 0.5 * (grid - rng.uniform(-1, 1)) ** 2)
        p = DensityEstimate(grid=grid, values=raw / trapezoid(raw, grid))
        r = max_log_relative_belief(p, p)
        worst = min(worst, r)
        exact = exact and r == 0.0
    ok = exact and worst >= -1e-6
    return CheckResult(
        "relative belief of a density against itself is zero",
        ok,
        f"min R over identical pairs = {worst:.3e}",
    )


def _check_ar1_schur(rng):
    worst = 0.0
    for _ in range(40):
        params = Ar1Params(
            mean=float(rng.normal()),
            phi=float(rng.uniform(-0.95, 0.95)),
            marginal_var=float(rng.uniform(0.2, 3.0)),
        )
        lo = int(rng.integers(0, 50))
        span = int(rng.integers(2, 13))
        patch = lo + np.sort(rng.choice(span + 2, size=min(span, 12), replace=False))
        k = int(rng.integers(1, patch.size + 1))
        window = np.sort(rng.choice(patch, size=k, replace=False))
        a_fast, cov_fast = ar1_conditional(params, patch, window)
        a_ref, cov_ref = dense_schur_conditional(params, patch, window)
        worst = max(
            worst,
            float(np.max(np.abs(cov_fast - cov_ref))),
            float(np.max(np.abs(a_fast - a_ref))) if a_ref.size else 0.0,
        )
    return CheckResult(
        "AR(1) conditional matches the dense Schur complement",
        worst < 1e-10,
        f"max abs deviation = {worst:.3e}",
    )


def _check_split_merge(rng):
    ok = True
    for _ in range(50):
        q = int(rng.integers(2, 16))
        n_keep = int(rng.integers(1, q))
        keep = rng.choice(q, size=n_keep, replace=False)
        drop = np.setdiff1d(np.arange(q), keep)
        part = SummaryPartition(tuple(keep), tuple(drop))
        s = rng.standard_normal(q)
        a, b = part.split(s)
        if not np.array_equal(part.merge(a, b), s):
            ok = False
            break
    return CheckResult("summary split/merge round-trips exactly", ok, "50 random partitions")


def _check_cart_equivalence(rng):
    ok = True
    detail = "single tree equals brute-force CART"
    for trial in range(10):
        n = int(rng.integers(8, 31))
        q = int(rng.integers(1, 4))
        X = rng.standard_normal((n, q))
        y = rng.standard_normal(n)
        forest = QuantileForest(
            n_trees=1, mtry=q, min_node_size=3, sample_fraction=1.0, random_state=trial
        ).fit(X, y)
        ref = reference_cart(X, y, list(range(n)), min_node_size=3)
        if not _forest_tree_matches(forest, 0, ref):
            ok, detail = False, f"mismatch on trial {trial} (n={n}, q={q})"
            break
    return CheckResult("compiled tree grower matches brute-force CART", ok, detail)


def run_all(seed=0):
    """Run every invariant suite; returns a list of CheckResult."""
    rng = np.random.default_rng(seed)
    return [
        _check_weight_simplex(rng),
        _check_cdf_quantile_monotone(rng),
        _check_density_normalisation(rng),
        _check_relative_belief_identity(rng),
        _check_ar1_schur(rng),
        _check_split_merge(rng),
        _check_cart_equivalence(rng),
    ]
