"""Nearest-neighbour rejection sampling on scaled summary distances.

Kept as a baseline posterior estimator: accept the k parameter draws whose
summaries fall closest to the observed vector in Euclidean distance after
per-component robust scaling.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .validation import check_indices, check_int, check_matrix, check_vector

__all__ = ["AbcResult", "rejection_abc"]


@dataclass(frozen=True)
class AbcResult:
    """Accepted draws sorted by distance (row index breaks ties)."""

    params: np.ndarray
    summaries: np.ndarray
    distances: np.ndarray
    indices: np.ndarray
    scale: np.ndarray
    used_components: np.ndarray


def _robust_scale(S, names=None):
    """Per-component MAD, falling back to SD, dropping dead components."""
    med = np.median(S, axis=0)
    scale = np.median(np.abs(S - med), axis=0)
    sd = S.std(axis=0)
    mad_zero = scale == 0
    scale[mad_zero] = sd[mad_zero]
    used = scale > 0
    for j in np.flatnonzero(~used):
        label = names[j] if names is not None else f"component {j}"
        warnings.warn(f"summary {label} has zero spread and is excluded from the distance")
    return scale, used


def rejection_abc(params, summaries, s_obs, k, subset=None, summary_names=None):
    """Keep the k nearest rows to s_obs under MAD-scaled Euclidean distance.

    subset restricts the distance to the named summary indices (defaults to
    all components). Scaling falls back to the standard deviation when a
    component's MAD is zero, and drops the component entirely (with a
    warning) when both are zero.
    """
    params = check_matrix(params, "params")
    summaries = check_matrix(summaries, "summaries")
    s_obs = check_vector(s_obs, "s_obs")
    n, q = summaries.shape
    if params.shape[0] != n:
        raise ValueError("params and summaries row counts differ")
    if s_obs.shape[0] != q:
        raise ValueError(f"s_obs has {s_obs.shape[0]} components, expected {q}")
    k = check_int(k, "k", minimum=1, maximum=n)
    if subset is None:
        subset = np.arange(q)
    else:
        subset = check_indices(subset, q, "subset")

    S = summaries[:, subset]
    names = [summary_names[j] for j in subset] if summary_names is not None else None
    scale, used = _robust_scale(S, names)
    if not np.any(used):
        raise ValueError("every selected summary component has zero spread")
    z = (S[:, used] - s_obs[subset][used]) / scale[used]
    dist = np.sqrt(np.sum(z * z, axis=1))

    order = np.lexsort((np.arange(n), dist))[:k]
    return AbcResult(
        params=params[order],
        summaries=summaries[order],
        distances=dist[order],
        indices=order,
        scale=scale,
        used_components=subset[used],
    )
