"""Two-regime threshold autoregression used as an auxiliary summary model.

A series X is summarised by a SETAR(2; 2, 2) fit: observations are split by
whether the first lag falls below a threshold c, each regime gets an OLS
autoregression of X[t] on (1, X[t-1], X[t-2]), and the residual standard
deviations (maximum-likelihood divisor) complete the summary vector

    (a0, a1, a2, rho, b0, b1, b2, zeta)

with a/rho from the lower regime and b/zeta from the upper. The first two
observations are conditioned on, so a series of length T yields T - 2
triples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import check_vector

__all__ = ["SetarFitError", "SetarFit", "fit_setar", "select_threshold", "ricker_setar_summaries"]

_MIN_REGIME = 5


class SetarFitError(ValueError):
    """Raised when a regime is too small or its design matrix is singular."""


@dataclass(frozen=True)
class SetarFit:
    threshold: float
    lower_coef: np.ndarray
    lower_sd: float
    upper_coef: np.ndarray
    upper_sd: float
    n_lower: int
    n_upper: int

    def summary_vector(self):
        """Summaries in fixed order (a0, a1, a2, rho, b0, b1, b2, zeta)."""
        return np.concatenate(
            (self.lower_coef, [self.lower_sd], self.upper_coef, [self.upper_sd])
        )


def _triples(x):
    # response, first lag, second lag; first two observations conditioned on
    return x[2:], x[1:-1], x[:-2]


def _regime_ols(resp, lag1, lag2):
    """OLS of resp on (1, lag1, lag2) with MLE residual SD.

    Order of the rows does not affect the estimates; only the multiset of
    triples enters the normal equations.
    """
    n = resp.shape[0]
    if n < _MIN_REGIME:
        raise SetarFitError(f"regime has {n} triples, needs >= {_MIN_REGIME}")
    design = np.column_stack((np.ones(n), lag1, lag2))
    coef, _, rank, _ = np.linalg.lstsq(design, resp, rcond=None)
    if rank < 3:
        raise SetarFitError("regime design matrix is singular")
    resid = resp - design @ coef
    sd = float(np.sqrt(resid @ resid / n))
    return coef, sd


def fit_setar(x, threshold):
    """Fit the two-regime autoregression at a fixed threshold.

    Raises SetarFitError when either regime has fewer than 5 triples or a
    singular design (for example a constant series).
    """
    x = check_vector(x, "x", min_len=10)
    resp, lag1, lag2 = _triples(x)
    lower = lag1 < threshold
    fits = []
    for mask in (lower, ~lower):
        fits.append(_regime_ols(resp[mask], lag1[mask], lag2[mask]))
    (lo_coef, lo_sd), (up_coef, up_sd) = fits
    return SetarFit(
        threshold=float(threshold),
        lower_coef=lo_coef,
        lower_sd=lo_sd,
        upper_coef=up_coef,
        upper_sd=up_sd,
        n_lower=int(lower.sum()),
        n_upper=int((~lower).sum()),
    )


def _pooled_nll(fit):
    # Gaussian likelihood at the MLE plug-in; constant terms kept so values
    # are comparable across candidate thresholds
    nll = 0.0
    for n, sd in ((fit.n_lower, fit.lower_sd), (fit.n_upper, fit.upper_sd)):
        if sd <= 0.0:
            return -np.inf
        nll += 0.5 * n * (np.log(2.0 * np.pi * sd * sd) + 1.0)
    return nll


def select_threshold(x, lo=0.15, hi=0.85, step=0.05, min_regime_frac=0.10):
    """Pick the threshold minimising the pooled Gaussian likelihood.

    Candidates are empirical quantiles of the series from `lo` to `hi` in
    steps of `step`. A candidate is feasible only when both regimes hold at
    least `min_regime_frac` of the triples (and the fit's own minimum of 5).
    Ties go to the smaller threshold.
    """
    x = check_vector(x, "x", min_len=30)
    levels = np.arange(lo, hi + step / 2, step)
    candidates = np.quantile(x, levels)
    _, lag1, _ = _triples(x)
    n_triples = lag1.shape[0]
    min_count = max(_MIN_REGIME, int(np.ceil(min_regime_frac * n_triples)))

    best_c, best_nll = None, np.inf
    for c in candidates:
        n_lower = int((lag1 < c).sum())
        if n_lower < min_count or n_triples - n_lower < min_count:
            continue
        try:
            fit = fit_setar(x, c)
        except SetarFitError:
            continue
        nll = _pooled_nll(fit)
        if nll < best_nll:
            best_c, best_nll = float(c), nll
    if best_c is None:
        raise SetarFitError("no feasible threshold candidate")
    return best_c


def ricker_setar_summaries(x, threshold):
    """Summary vector of a count series under the fixed-threshold fit."""
    return fit_setar(x, threshold).summary_vector()
