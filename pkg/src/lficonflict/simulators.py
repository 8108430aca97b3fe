"""Forward simulators and their summary statistics.

Three data-generating processes are provided:

* iid Poisson counts summarised by sample mean and variance,
* a stereological extremes process (Poisson number of inclusions with
  generalized-Pareto sizes above a fixed threshold) summarised by the
  inclusion count and a fixed set of size quantiles,
* the Ricker population map observed through Poisson counts, summarised
  elsewhere by a fitted threshold autoregression (see :mod:`lficonflict.setar`).

Summary functions return None when the realisation carries no usable
information (for example an empty inclusion set); training-set construction
treats that as an invalid draw and re-draws the parameter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import check_float, check_int, check_vector

__all__ = [
    "poisson_simulate",
    "poisson_summaries",
    "GpdParams",
    "gpd_inverse_cdf",
    "gpd_sample",
    "stereo_simulate",
    "stereo_summaries",
    "STEREO_QUANTILE_LEVELS",
    "RickerConfig",
    "ricker_paths",
    "ricker_simulate",
]

# shape values this close to zero use the exponential limit of the GPD
_GPD_EXP_TOL = 1e-8

STEREO_QUANTILE_LEVELS = (0.0, 0.05, 0.10, 0.20, 0.80, 0.90, 0.95, 1.0)


def poisson_simulate(eta, size, rng):
    """iid Poisson(eta) counts of the given length."""
    eta = check_float(eta, "eta", minimum=0.0)
    size = check_int(size, "size", minimum=1)
    return rng.poisson(eta, size=size)


def poisson_summaries(y):
    """Sample mean and unbiased sample variance of a count vector."""
    y = check_vector(y, "y", min_len=2)
    return np.array([y.mean(), y.var(ddof=1)])


@dataclass(frozen=True)
class GpdParams:
    """Generalized Pareto scale/shape above a fixed threshold."""

    scale: float
    shape: float
    threshold: float = 5.0

    def __post_init__(self):
        if not (self.scale >= 0 and np.isfinite(self.scale)):
            raise ValueError(f"GPD scale must be >= 0, got {self.scale}")
        if not np.isfinite(self.shape):
            raise ValueError("GPD shape must be finite")


def gpd_inverse_cdf(u, params):
    """Quantile function of the GPD; u in [0, 1).

    Uses the exponential limit when |shape| is below 1e-8 so the xi -> 0
    boundary is continuous.
    """
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u >= 1)):
        raise ValueError("u must lie in [0, 1)")
    sigma, xi, mu = params.scale, params.shape, params.threshold
    if abs(xi) > _GPD_EXP_TOL:
        return mu + sigma / xi * ((1.0 - u) ** (-xi) - 1.0)
    return mu - sigma * np.log1p(-u)


def gpd_sample(params, n, rng):
    """n GPD draws via inverse-CDF sampling."""
    n = check_int(n, "n", minimum=0)
    if n == 0:
        return np.empty(0)
    return gpd_inverse_cdf(rng.uniform(0.0, 1.0, size=n), params)


def stereo_simulate(theta, rng, threshold=5.0):
    """Simulate inclusion sizes: K ~ Poisson(lam), then K GPD(sigma, xi) draws.

    theta = (lam, sigma, xi). Returns the (possibly empty) size vector.
    """
    theta = check_vector(theta, "theta", min_len=3)
    lam, sigma, xi = theta[:3]
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    k = int(rng.poisson(lam))
    return gpd_sample(GpdParams(sigma, xi, threshold), k, rng)


def stereo_summaries(d):
    """Count plus size quantiles at the fixed levels; None for an empty vector."""
    d = np.asarray(d, dtype=float)
    if d.ndim != 1:
        raise ValueError(f"d must be one-dimensional, got shape {d.shape}")
    if d.size == 0:
        return None
    if not np.all(np.isfinite(d)):
        return None
    qs = np.quantile(d, STEREO_QUANTILE_LEVELS)
    return np.concatenate(([float(d.size)], qs))


@dataclass(frozen=True)
class RickerConfig:
    """Length and initialisation of a Ricker run."""

    n_obs: int = 250
    burn_in: int = 50
    n0: float = 1.0

    def __post_init__(self):
        if self.n_obs < 1:
            raise ValueError(f"n_obs must be >= 1, got {self.n_obs}")
        if self.burn_in < 0:
            raise ValueError(f"burn_in must be >= 0, got {self.burn_in}")
        if not (self.n0 > 0 and np.isfinite(self.n0)):
            raise ValueError(f"n0 must be positive, got {self.n0}")


def ricker_paths(theta, config, rng):
    """Latent and observed Ricker paths for theta = (log_phi, log_r, log_sigma).

    The latent map is N[t+1] = r N[t] exp(-N[t] + e[t+1]) with
    e ~ N(0, sigma^2); observations are d[t] ~ Poisson(phi N[t]) over the
    n_obs steps after burn-in. Returns (counts, latent); (None, None) if the
    latent path degenerates (non-finite or non-positive).
    """
    theta = check_vector(theta, "theta", min_len=3)
    phi, r, sigma = np.exp(theta[:3])
    total = config.burn_in + config.n_obs
    shocks = rng.normal(0.0, sigma, size=total)
    latent = np.empty(total)
    n = config.n0
    for t in range(total):
        n = r * n * np.exp(-n + shocks[t])
        if not np.isfinite(n) or n <= 0.0:
            return None, None
        latent[t] = n
    latent = latent[config.burn_in:]
    intensity = phi * latent
    if not np.all(np.isfinite(intensity)):
        return None, None
    counts = rng.poisson(intensity).astype(float)
    return counts, latent


def ricker_simulate(theta, config, rng):
    """Observed Ricker counts, or None when the latent path degenerates."""
    counts, _ = ricker_paths(theta, config, rng)
    return counts
