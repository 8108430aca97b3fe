"""Imputation engines for deleted summary components and series windows.

Two row engines share an interface: fit(reference_table) then
impute(x, missing, n_draws, seed) -> (n_draws, q) completed copies of x
whose observed components are untouched. The reference table is always
complete here (it is the regression training table), so per-column feature
models are point-estimate plug-ins fitted once; the draws stay stochastic
through the posterior parameter draws (linear engine) or the donor matching
(forest engine).

The window engine imputes a contiguous block of a time series from a cubic
spline conditional mean plus AR(1) conditional Gaussian noise.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_triangular
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .forest import QuantileForest
from .rng import IMPUTE, NOISE, REFERENCE, stream_state, substream
from .validation import check_indices, check_int, check_matrix, check_vector

__all__ = [
    "LinearBayesImputer",
    "ForestImputer",
    "Ar1Params",
    "fit_ar1",
    "ar1_conditional",
    "impute_window",
    "fill_window",
    "ENGINES",
]

_RIDGE_FRAC = 1e-8
_AR1_CLAMP = 0.99
_CHOL_JITTER_FRAC = 1e-10


def _check_impute_args(x, missing, q, n_draws):
    x = np.asarray(x, dtype=float)
    if x.shape != (q,):
        raise ValueError(f"x must have {q} components, got shape {x.shape}")
    missing = check_indices(missing, q, "missing")
    if missing.size >= q:
        raise ValueError("at least one component must stay observed")
    observed = np.setdiff1d(np.arange(q), missing)
    if not np.all(np.isfinite(x[observed])):
        raise ValueError("observed components of x must be finite")
    n_draws = check_int(n_draws, "n_draws", minimum=1)
    return x, missing, observed, n_draws


class LinearBayesImputer(BaseEstimator):
    """Chained Bayesian linear imputation against a complete reference table.

    Each column regresses on all others with an intercept under the
    noninformative prior: sigma^2 is drawn scaled-inverse-chi2(n - p, s^2)
    and the coefficients from their conditional normal, then the imputed
    value adds fresh N(0, sigma^2) noise. With more than one missing
    component the columns are cycled for `sweeps` rounds.
    """

    def __init__(self, sweeps=5):
        self.sweeps = sweeps

    def fit(self, X):
        X = check_matrix(X, "X", min_rows=3, min_cols=2)
        n, q = X.shape
        if n < q + 2:
            raise ValueError(f"need at least q + 2 = {q + 2} reference rows, got {n}")
        check_int(self.sweeps, "sweeps", minimum=1)
        self.reference_ = X
        self.column_means_ = X.mean(axis=0)
        self._fits = {}
        for j in range(q):
            self._fits[j] = self._fit_column(j)
        return self

    def _fit_column(self, j):
        X = self.reference_
        n, q = X.shape
        others = [c for c in range(q) if c != j]
        Z = np.column_stack((np.ones(n), X[:, others]))
        yj = X[:, j]
        G = Z.T @ Z
        try:
            L = np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            lam = _RIDGE_FRAC * np.trace(G)
            warnings.warn(
                f"column {j}: singular normal equations, ridge penalty {lam:.3e} applied"
            )
            G = G + lam * np.eye(G.shape[0])
            L = np.linalg.cholesky(G)
        beta = solve_triangular(L.T, solve_triangular(L, Z.T @ yj, lower=True))
        resid = yj - Z @ beta
        dof = n - Z.shape[1]
        s2 = float(resid @ resid) / dof
        return others, beta, L, dof, s2

    def impute(self, x, missing, n_draws, seed):
        """n_draws completed copies of x; observed components exact."""
        if not hasattr(self, "reference_"):
            raise NotFittedError("imputer is not fitted")
        q = self.reference_.shape[1]
        x, missing, observed, n_draws = _check_impute_args(x, missing, q, n_draws)
        n_sweeps = self.sweeps if missing.size > 1 else 1
        out = np.empty((n_draws, q))
        for i in range(n_draws):
            rng = substream(seed, IMPUTE, i)
            row = x.copy()
            row[missing] = self.column_means_[missing]
            for _ in range(n_sweeps):
                for j in missing:
                    others, beta_hat, L, dof, s2 = self._fits[j]
                    sigma2 = dof * s2 / rng.chisquare(dof)
                    sigma = np.sqrt(sigma2)
                    z = rng.standard_normal(beta_hat.shape[0])
                    beta = beta_hat + sigma * solve_triangular(L, z, lower=True, trans="T")
                    zrow = np.concatenate(([1.0], row[others]))
                    row[j] = zrow @ beta + rng.normal(0.0, sigma)
            out[i] = row
        out[:, observed] = x[observed]
        return out


class ForestImputer(BaseEstimator):
    """Iterative forest imputation with predictive-mean-matching draws.

    Per missing column a mean-regression forest is fitted on the remaining
    columns of the reference table (once; the table is complete, so sweeps
    cannot change it). Imputed values are drawn uniformly among the
    `pmm_neighbors` reference rows whose predictions sit closest to the
    target row's prediction, so every imputed value is an observed value of
    that column. Sweeps cycle the missing columns until the summed
    out-of-bag error stops improving or `max_sweeps` is hit.
    """

    def __init__(self, n_trees=20, pmm_neighbors=5, max_sweeps=10, random_state=0):
        self.n_trees = n_trees
        self.pmm_neighbors = pmm_neighbors
        self.max_sweeps = max_sweeps
        self.random_state = random_state

    def fit(self, X):
        X = check_matrix(X, "X", min_rows=3, min_cols=2)
        check_int(self.n_trees, "n_trees", minimum=1)
        check_int(self.pmm_neighbors, "pmm_neighbors", minimum=1, maximum=X.shape[0])
        check_int(self.max_sweeps, "max_sweeps", minimum=1)
        self.reference_ = X
        self.column_medians_ = np.median(X, axis=0)
        self._models = {}
        return self

    def _column_model(self, j):
        """(others, forest, reference predictions, oob error), cached per column."""
        if j not in self._models:
            X = self.reference_
            q = X.shape[1]
            others = [c for c in range(q) if c != j]
            Xo = np.ascontiguousarray(X[:, others])
            forest = QuantileForest(
                n_trees=self.n_trees,
                mtry=max(1, int(np.sqrt(len(others)))),
                random_state=stream_state(self.random_state, REFERENCE, j),
            )
            forest.fit(Xo, X[:, j])
            ref_pred = forest.predict(Xo)
            oob = forest.oob_error(Xo)
            self._models[j] = (others, forest, ref_pred, oob)
        return self._models[j]

    def _pmm_draw(self, j, pred, rng):
        others, forest, ref_pred, _ = self._models[j]
        diff = np.abs(ref_pred - pred)
        k = self.pmm_neighbors
        part = np.argpartition(diff, k - 1)[:k] if k < diff.size else np.arange(diff.size)
        # stable ordering among the k candidates: value, then row index
        part = part[np.lexsort((part, diff[part]))]
        donor = part[rng.integers(k)]
        return self.reference_[donor, j]

    def impute(self, x, missing, n_draws, seed):
        """n_draws completed copies of x; observed components exact."""
        if not hasattr(self, "reference_"):
            raise NotFittedError("imputer is not fitted")
        q = self.reference_.shape[1]
        x, missing, observed, n_draws = _check_impute_args(x, missing, q, n_draws)

        rows = np.tile(x, (n_draws, 1))
        rows[:, missing] = self.column_medians_[missing]
        rngs = [substream(seed, IMPUTE, i) for i in range(n_draws)]

        oob_prev = np.inf
        max_sweeps = self.max_sweeps if missing.size > 1 else 1
        for _ in range(max_sweeps):
            oob_total = 0.0
            for j in missing:
                others, forest, ref_pred, oob = self._column_model(j)
                preds = forest.predict(np.ascontiguousarray(rows[:, others]))
                for i in range(n_draws):
                    rows[i, j] = self._pmm_draw(j, preds[i], rngs[i])
                oob_total += oob
            if not oob_total < oob_prev:
                break
            oob_prev = oob_total
        rows[:, observed] = x[observed]
        return rows


@dataclass(frozen=True)
class Ar1Params:
    """Stationary AR(1) moments: x_t = mean + phi (x_{t-1} - mean) + innovation."""

    mean: float
    phi: float
    marginal_var: float

    @property
    def innovation_var(self):
        return self.marginal_var * (1.0 - self.phi * self.phi)


def fit_ar1(x):
    """Moment fit: sample mean, lag-1 autocorrelation (clamped to +-0.99),
    and the divisor-n marginal variance."""
    x = check_vector(x, "x", min_len=2)
    mu = float(x.mean())
    c0 = float(np.mean((x - mu) ** 2))
    if c0 <= 0.0:
        raise ValueError("series has zero variance, AR(1) fit is undefined")
    c1 = float(np.mean((x[:-1] - mu) * (x[1:] - mu)))
    phi = float(np.clip(c1 / c0, -_AR1_CLAMP, _AR1_CLAMP))
    return Ar1Params(mean=mu, phi=phi, marginal_var=c0)


def ar1_conditional(params, patch, window):
    """Gaussian conditional of the window given the rest of the patch.

    patch and window are absolute integer index sets with window a subset of
    patch. Returns (A, cov): the conditional mean is
    mean + A @ (x[obs] - mean) with obs = sorted(patch minus window), and cov
    is the conditional covariance. Built from the AR(1) tridiagonal
    precision of the patch's covering span, so gap points inside the patch
    are marginalised out exactly.
    """
    patch = check_indices(patch, np.iinfo(np.int64).max, "patch")
    window = check_indices(window, np.iinfo(np.int64).max, "window")
    if not np.all(np.isin(window, patch)):
        raise ValueError("window must be a subset of the patch")
    obs = np.setdiff1d(patch, window)

    span_lo = int(patch.min())
    m = int(patch.max()) - span_lo + 1
    sigma2_inn = params.innovation_var
    phi = params.phi
    Q = np.zeros((m, m))
    Q[0, 0] = 1.0 / params.marginal_var
    for t in range(1, m):
        Q[t, t] += 1.0 / sigma2_inn
        Q[t - 1, t - 1] += phi * phi / sigma2_inn
        Q[t, t - 1] -= phi / sigma2_inn
        Q[t - 1, t] -= phi / sigma2_inn

    w_pos = window - span_lo
    o_pos = obs - span_lo
    # gap points (span positions neither in window nor observed) are latent
    # and must be marginalised together with the window
    latent = np.setdiff1d(np.arange(m), o_pos)
    B = np.linalg.inv(Q[np.ix_(latent, latent)])
    w_in_latent = np.searchsorted(latent, w_pos)
    cov = B[np.ix_(w_in_latent, w_in_latent)]
    if obs.size:
        A = -(B @ Q[np.ix_(latent, o_pos)])[w_in_latent, :]
    else:
        A = np.zeros((window.size, 0))
    return A, 0.5 * (cov + cov.T)


def _window_chol(cov, marginal_var):
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        jitter = _CHOL_JITTER_FRAC * marginal_var
        return np.linalg.cholesky(cov + jitter * np.eye(cov.shape[0]))


def impute_window(x, window, n_draws, seed, patch_pad=8, ar1=None):
    """Impute a contiguous series window: spline mean + AR(1) noise.

    window is a (start, stop) half-open index pair. The conditional mean is
    a natural cubic spline through every point outside the window (constant
    nearest-value extension where a boundary window would need
    extrapolation). The noise is drawn from the AR(1) conditional covariance
    of the window given the remaining points of a patch extending patch_pad
    indices on each side. Returns an (n_draws, stop - start) matrix of
    window values.
    """
    x = check_vector(x, "x", min_len=4)
    t_len = x.shape[0]
    start, stop = (int(window[0]), int(window[1]))
    if not 0 <= start < stop <= t_len:
        raise ValueError(f"window ({start}, {stop}) out of range for length {t_len}")
    if stop - start >= t_len:
        raise ValueError("window must leave at least one observed point")
    n_draws = check_int(n_draws, "n_draws", minimum=1)
    patch_pad = check_int(patch_pad, "patch_pad", minimum=0)
    if ar1 is None:
        ar1 = fit_ar1(x)

    win_idx = np.arange(start, stop)
    known = np.concatenate((np.arange(0, start), np.arange(stop, t_len)))
    if known.size >= 2:
        spline = CubicSpline(known, x[known], bc_type="natural", extrapolate=False)
        mean = spline(win_idx)
    else:
        mean = np.full(win_idx.shape, np.nan)
    if np.any(np.isnan(mean)):
        # boundary window: extend the nearest observed value
        nearest = known[np.argmin(np.abs(known[None, :] - win_idx[:, None]), axis=1)]
        mean = np.where(np.isnan(mean), x[nearest], mean)

    patch = np.arange(max(0, start - patch_pad), min(t_len, stop + patch_pad))
    _, cov = ar1_conditional(ar1, patch, win_idx)
    L = _window_chol(cov, ar1.marginal_var)
    z = substream(seed, NOISE).standard_normal((n_draws, win_idx.size))
    return mean[None, :] + z @ L.T


def fill_window(x, window, values):
    """Copy of x with the half-open window replaced by the given values."""
    start, stop = int(window[0]), int(window[1])
    values = np.asarray(values, dtype=float)
    if values.shape != (stop - start,):
        raise ValueError("values length does not match the window")
    out = np.asarray(x, dtype=float).copy()
    out[start:stop] = values
    return out


ENGINES = {"linear-bayes": LinearBayesImputer, "forest": ForestImputer}
