"""Deterministic random-stream derivation.

Every random draw in the package flows through a counter-based Philox
generator keyed by a user seed plus a structured spawn path. Any row, tree,
or imputation can therefore be regenerated in isolation, and results never
depend on evaluation order or worker count.

The tag constants below are part of the reproducibility contract: changing
them changes every downstream draw.
"""

from __future__ import annotations

import numpy as np

PARAMS = 0
SIMULATE = 1
TREES = 2
FOLDS = 3
IMPUTE = 4
REFERENCE = 5
NOISE = 6


def substream(seed, *path):
    """Return a Generator on an independent stream for (seed, path)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def stream_state(seed, *path):
    """A single uint32 derived from (seed, path), for seeding compiled kernels."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1)[0])
