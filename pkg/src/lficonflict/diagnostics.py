"""Conflict diagnostics between full-data and deletion posteriors.

The observed summary vector is split into a kept block and a deleted block.
The deleted block is imputed M times from the kept one, each completed
vector is pushed through the conditional-density regressor, and the M
densities are averaged into the deletion posterior. The maximum log ratio
of the full posterior over the deletion posterior (the maximum log relative
belief) measures how far the deleted components pull the posterior; its
tail probability is calibrated by M* fresh imputations playing the role of
conflict-free observations.

A windowed variant scans a time series: every length-k window is deleted
and imputed in turn, per-window statistics are averaged over the windows
containing each time point, and points whose tail probability falls below
the flag level are reported.

Any object with density(x, grid=..., grid_spec=..., support=...) returning
a DensityEstimate can serve as the regressor; the quantile forest is the
one shipped here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .density import DensityEstimate, GridSpec, trapezoid
from .imputation import fill_window, fit_ar1, impute_window
from .models import SummaryPartition
from .rng import IMPUTE, REFERENCE, stream_state
from .validation import check_int, check_vector

__all__ = [
    "max_log_relative_belief",
    "renyi_divergence",
    "subset_posterior",
    "ConflictReport",
    "calibrate_conflict",
    "window_set",
    "WindowScanReport",
    "window_scan",
]

DENOMINATOR_FLOOR_FRAC = 1e-12
DEFAULT_FLAG_LEVEL = 0.05


def _require_same_grid(num, den):
    if not isinstance(num, DensityEstimate) or not isinstance(den, DensityEstimate):
        raise TypeError("expected DensityEstimate operands")
    if not num.same_grid(den):
        raise ValueError("densities live on different grids; rebuild them on a common grid")


def _log_ratio(num, den):
    floor = DENOMINATOR_FLOOR_FRAC * den.values.max()
    with np.errstate(divide="ignore"):
        return np.log(num.values / np.maximum(den.values, floor)), floor


def max_log_relative_belief(num, den):
    """sup over the grid of log(num / den), with the denominator floored.

    The floor (1e-12 of the denominator's peak) keeps the ratio finite on
    grid regions where the denominator underflows; identical inputs give
    exactly 0.
    """
    r, _ = _mlrb_detail(num, den)
    return r


def _mlrb_detail(num, den):
    _require_same_grid(num, den)
    lr, floor = _log_ratio(num, den)
    arg = int(np.argmax(lr))
    return float(lr[arg]), bool(den.values[arg] < floor)


def renyi_divergence(num, den, alpha):
    """Renyi divergence of order alpha on the shared grid, trapezoid rule."""
    _require_same_grid(num, den)
    if alpha <= 0 or alpha == 1.0:
        raise ValueError(f"alpha must be positive and != 1, got {alpha}")
    floor = DENOMINATOR_FLOOR_FRAC * den.values.max()
    ratio = num.values / np.maximum(den.values, floor)
    integrand = np.where(num.values > 0, ratio ** (alpha - 1.0) * num.values, 0.0)
    mass = float(trapezoid(integrand, num.grid))
    if mass <= 0:
        raise FloatingPointError("Renyi integrand has no mass on the grid")
    return float(np.log(mass) / (alpha - 1.0))


def _average_densities(densities, grid):
    values = np.mean([d.values for d in densities], axis=0)
    norm = trapezoid(values, grid)
    if not np.isfinite(norm) or norm <= 0:
        raise FloatingPointError("averaged density has no mass")
    return DensityEstimate(grid=grid, values=values / norm)


def _imputed_densities(regressor, completions, grid, max_failure_rate, label):
    """Per-completion densities on the common grid, tolerating a failure quota."""
    densities, failures = [], 0
    for row in completions:
        try:
            if not np.all(np.isfinite(row)):
                raise FloatingPointError("non-finite imputed vector")
            densities.append(regressor.density(row, grid=grid))
        except FloatingPointError:
            failures += 1
    if failures > max_failure_rate * len(completions) or not densities:
        raise RuntimeError(
            f"{label}: {failures} of {len(completions)} imputations unusable"
        )
    return densities


def subset_posterior(
    regressor,
    s_obs,
    partition,
    engine,
    n_imputations,
    seed,
    grid,
    max_failure_rate=0.2,
):
    """Deletion posterior: average density over imputed completions.

    Returns (DensityEstimate, completions). The kept components of s_obs
    are held fixed; the dropped ones are imputed n_imputations times by the
    engine. Imputations that cannot be evaluated count as failures; more
    than max_failure_rate of them aborts.
    """
    s_obs = check_vector(s_obs, "s_obs")
    if not isinstance(partition, SummaryPartition):
        raise TypeError("partition must be a SummaryPartition")
    partition.validate(s_obs.shape[0])
    check_int(n_imputations, "n_imputations", minimum=1)
    completions = engine.impute(s_obs, np.array(partition.drop), n_imputations, seed)
    densities = _imputed_densities(
        regressor, completions, grid, max_failure_rate, "subset posterior"
    )
    return _average_densities(densities, grid), completions


@dataclass
class ConflictReport:
    """Outcome of one conflict calibration."""

    target: str
    keep: tuple
    drop: tuple
    r_obs: float
    p_tilde: float
    r_reference: np.ndarray
    n_imputations: int
    n_reference: int
    denominator_floored: bool
    full_density: DensityEstimate
    subset_density: DensityEstimate

    def to_dict(self):
        return {
            "target": self.target,
            "keep": list(self.keep),
            "drop": list(self.drop),
            "r_obs": self.r_obs,
            "p_tilde": self.p_tilde,
            "n_imputations": self.n_imputations,
            "n_reference": self.n_reference,
            "denominator_floored": self.denominator_floored,
            "r_reference": [float(v) for v in self.r_reference],
        }


def calibrate_conflict(
    regressor,
    s_obs,
    partition,
    engine,
    n_imputations,
    n_reference,
    seed,
    grid_spec=None,
    support=(-np.inf, np.inf),
    target="",
    max_failure_rate=0.2,
):
    """Conflict statistic plus its imputation-calibrated tail probability.

    The common grid comes from the full-summary posterior. R_obs compares
    that posterior against the deletion posterior; the reference draws
    replace the observed deleted block with fresh imputations and reuse the
    deletion posterior as denominator. p_tilde is the fraction of reference
    statistics at or above R_obs.
    """
    check_int(n_reference, "n_reference", minimum=1)
    spec = grid_spec if grid_spec is not None else GridSpec()
    full = regressor.density(s_obs, grid_spec=spec, support=support)
    grid = full.grid

    subset_seed = stream_state(seed, IMPUTE)
    reference_seed = stream_state(seed, REFERENCE)
    sub, _ = subset_posterior(
        regressor, s_obs, partition, engine, n_imputations, subset_seed, grid,
        max_failure_rate=max_failure_rate,
    )
    r_obs, floored = _mlrb_detail(full, sub)

    ref_completions = engine.impute(
        np.asarray(s_obs, dtype=float), np.array(partition.drop), n_reference, reference_seed
    )
    ref_densities = _imputed_densities(
        regressor, ref_completions, grid, max_failure_rate, "reference draws"
    )
    r_reference = np.array([max_log_relative_belief(d, sub) for d in ref_densities])
    p_tilde = float(np.mean(r_reference >= r_obs))
    return ConflictReport(
        target=target,
        keep=partition.keep,
        drop=partition.drop,
        r_obs=r_obs,
        p_tilde=p_tilde,
        r_reference=r_reference,
        n_imputations=n_imputations,
        n_reference=len(ref_densities),
        denominator_floored=floored,
        full_density=full,
        subset_density=sub,
    )


def window_set(t, k, series_length):
    """Start indices of the length-k windows containing time t (0-based).

    Interior points belong to k windows; points within k of either end to
    fewer, min(t + 1, T - t, k, T - k + 1) in total.
    """
    t = check_int(t, "t", minimum=0, maximum=series_length - 1)
    k = check_int(k, "k", minimum=1, maximum=series_length - 1)
    lo = max(0, t - k + 1)
    hi = min(t, series_length - k)
    return np.arange(lo, hi + 1)


@dataclass
class WindowScanReport:
    """Per-time-point window diagnostic over a series."""

    k: int
    n_imputations: int
    n_reference: int
    flag_level: float
    times: np.ndarray
    n_windows: np.ndarray
    r_mean: np.ndarray
    p_values: np.ndarray
    window_starts: np.ndarray
    window_r: np.ndarray
    skipped_windows: tuple = field(default_factory=tuple)

    @property
    def flagged(self):
        with np.errstate(invalid="ignore"):
            return np.flatnonzero(self.p_values < self.flag_level)

    def to_dict(self):
        return {
            "k": self.k,
            "n_imputations": self.n_imputations,
            "n_reference": self.n_reference,
            "flag_level": self.flag_level,
            "flagged": [int(t) for t in self.flagged],
            "skipped_windows": [int(s) for s in self.skipped_windows],
            "times": [int(t) for t in self.times],
            "n_windows": [int(v) for v in self.n_windows],
            "r_mean": [float(v) for v in self.r_mean],
            "p_values": [float(v) for v in self.p_values],
        }


def window_scan(
    regressor,
    series,
    k=4,
    n_imputations=100,
    n_reference=100,
    seed=0,
    grid_spec=None,
    support=(-np.inf, np.inf),
    patch_pad=8,
    flag_level=DEFAULT_FLAG_LEVEL,
    max_failure_rate=0.2,
):
    """Scan a series for time points in conflict with the rest of the data.

    Every window of width k is deleted and imputed: n_imputations draws
    build its deletion posterior, n_reference further draws calibrate the
    per-window statistic. Per time point the window statistics are averaged
    over the windows containing it and compared against the averaged
    reference statistics. Windows whose imputation or density evaluation
    fails are skipped and excluded from the averages.
    """
    series = check_vector(series, "series", min_len=4)
    t_len = series.shape[0]
    k = check_int(k, "k", minimum=1, maximum=t_len - 1)
    check_int(n_imputations, "n_imputations", minimum=1)
    check_int(n_reference, "n_reference", minimum=1)
    spec = grid_spec if grid_spec is not None else GridSpec()

    full = regressor.density(series, grid_spec=spec, support=support)
    grid = full.grid
    ar1 = fit_ar1(series)

    starts = np.arange(0, t_len - k + 1)
    r_obs_w = np.full(starts.shape, np.nan)
    r_ref_w = np.full((starts.shape[0], n_reference), np.nan)
    skipped = []
    for idx, l in enumerate(starts):
        window = (int(l), int(l + k))
        try:
            sub_draws = impute_window(
                series, window, n_imputations, stream_state(seed, IMPUTE, l),
                patch_pad=patch_pad, ar1=ar1,
            )
            sub_densities = _imputed_densities(
                regressor,
                [fill_window(series, window, v) for v in sub_draws],
                grid, max_failure_rate, f"window {l}",
            )
            sub = _average_densities(sub_densities, grid)
            r_obs_w[idx] = max_log_relative_belief(full, sub)

            ref_draws = impute_window(
                series, window, n_reference, stream_state(seed, REFERENCE, l),
                patch_pad=patch_pad, ar1=ar1,
            )
            for i, v in enumerate(ref_draws):
                try:
                    d = regressor.density(fill_window(series, window, v), grid=grid)
                    r_ref_w[idx, i] = max_log_relative_belief(d, sub)
                except FloatingPointError:
                    pass
            bad = np.isnan(r_ref_w[idx])
            if bad.sum() > max_failure_rate * n_reference:
                raise RuntimeError(f"window {l}: too many reference failures")
            if np.any(bad):
                # keep the replicate count rectangular across windows
                r_ref_w[idx, bad] = np.nanmean(r_ref_w[idx])
        except (RuntimeError, FloatingPointError, np.linalg.LinAlgError):
            r_obs_w[idx] = np.nan
            r_ref_w[idx, :] = np.nan
            skipped.append(int(l))

    times = np.arange(t_len)
    n_windows = np.zeros(t_len, dtype=int)
    r_mean = np.full(t_len, np.nan)
    p_values = np.full(t_len, np.nan)
    for t in times:
        ls = window_set(t, k, t_len)
        ok = ls[~np.isin(ls, skipped)]
        n_windows[t] = ok.size
        if ok.size == 0:
            continue
        r_t = float(np.mean(r_obs_w[ok]))
        ref_t = np.mean(r_ref_w[ok, :], axis=0)
        r_mean[t] = r_t
        p_values[t] = float(np.mean(ref_t >= r_t))

    return WindowScanReport(
        k=k,
        n_imputations=n_imputations,
        n_reference=n_reference,
        flag_level=flag_level,
        times=times,
        n_windows=n_windows,
        r_mean=r_mean,
        p_values=p_values,
        window_starts=starts,
        window_r=r_obs_w,
        skipped_windows=tuple(skipped),
    )
