"""Prior specifications over model parameters.

Priors are products of independent one-dimensional marginals; gamma and
uniform cover the models shipped here. Sampling is keyed by a seed through
:mod:`lficonflict.rng`, so a draw is reproducible from (spec, n, seed) alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import PARAMS, substream
from .validation import check_int

__all__ = ["GammaMarginal", "UniformMarginal", "PriorSpec"]


@dataclass(frozen=True)
class GammaMarginal:
    """Gamma marginal in shape/rate form, support (0, inf)."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and np.isfinite(self.shape)):
            raise ValueError(f"gamma shape must be positive, got {self.shape}")
        if not (self.rate > 0 and np.isfinite(self.rate)):
            raise ValueError(f"gamma rate must be positive, got {self.rate}")

    @property
    def support(self):
        return (0.0, np.inf)

    def sample(self, n, rng):
        return rng.gamma(self.shape, 1.0 / self.rate, size=n)

    def contains(self, value):
        return np.asarray(value) > 0.0


@dataclass(frozen=True)
class UniformMarginal:
    """Uniform marginal on [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise ValueError("uniform bounds must be finite")
        if not self.lo < self.hi:
            raise ValueError(f"uniform needs lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def support(self):
        return (float(self.lo), float(self.hi))

    def sample(self, n, rng):
        return rng.uniform(self.lo, self.hi, size=n)

    def contains(self, value):
        value = np.asarray(value)
        return (value >= self.lo) & (value <= self.hi)


@dataclass(frozen=True)
class PriorSpec:
    """Product prior over named parameters.

    Parameters
    ----------
    names : tuple of str
        One name per parameter, unique.
    marginals : tuple
        Matching marginal objects (GammaMarginal or UniformMarginal).
    """

    names: tuple
    marginals: tuple

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "marginals", tuple(self.marginals))
        if len(self.names) == 0:
            raise ValueError("prior needs at least one parameter")
        if len(self.names) != len(self.marginals):
            raise ValueError("names and marginals must have equal length")
        if len(set(self.names)) != len(self.names):
            raise ValueError("parameter names must be unique")

    @property
    def dim(self):
        return len(self.names)

    def support(self, index):
        """(lo, hi) support bounds of one marginal."""
        return self.marginals[index].support

    def sample(self, n, seed):
        """Draw an (n, dim) matrix of independent prior samples."""
        n = check_int(n, "n", minimum=1)
        rng = substream(seed, PARAMS)
        return np.column_stack([m.sample(n, rng) for m in self.marginals])

    def sample_one(self, rng):
        """Draw a single parameter vector from an already-derived stream."""
        return np.array([m.sample(None, rng) for m in self.marginals], dtype=float)

    def contains(self, theta):
        """Vectorised support check; accepts a (dim,) vector or an (n, dim) matrix."""
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        if theta.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim} parameters, got {theta.shape[1]}")
        ok = np.ones(theta.shape[0], dtype=bool)
        for j, m in enumerate(self.marginals):
            ok &= np.asarray(m.contains(theta[:, j]))
        return ok if ok.size > 1 else bool(ok[0])

    def to_dict(self):
        out = []
        for name, m in zip(self.names, self.marginals):
            if isinstance(m, GammaMarginal):
                out.append({"name": name, "kind": "gamma", "shape": m.shape, "rate": m.rate})
            else:
                out.append({"name": name, "kind": "uniform", "lo": m.lo, "hi": m.hi})
        return out

    @classmethod
    def from_dict(cls, entries):
        names, marginals = [], []
        for e in entries:
            kind = e.get("kind")
            names.append(e["name"])
            if kind == "gamma":
                marginals.append(GammaMarginal(float(e["shape"]), float(e["rate"])))
            elif kind == "uniform":
                marginals.append(UniformMarginal(float(e["lo"]), float(e["hi"])))
            else:
                raise ValueError(f"unknown marginal kind {kind!r}")
        return cls(tuple(names), tuple(marginals))
