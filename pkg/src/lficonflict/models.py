"""Model registry and training-set construction.

A model couples a prior, a forward simulator, and a summary map. Training
sets for the regression stage are built row by row on independent derived
random streams, so generation is reproducible bit for bit regardless of
evaluation order, and any row can be regenerated in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import simulators
from .priors import GammaMarginal, PriorSpec, UniformMarginal
from .rng import SIMULATE, substream
from .setar import SetarFitError, ricker_setar_summaries
from .validation import check_int

__all__ = [
    "SummaryPartition",
    "TrainingSet",
    "PoissonModel",
    "StereoModel",
    "RickerModel",
    "build_training_set",
    "make_model",
    "MODELS",
]

# per-row invalid-simulation re-draw cap; exceeding it aborts the build
MAX_ROW_ATTEMPTS = 10
MAX_FAILURE_RATE = 0.5


@dataclass(frozen=True)
class SummaryPartition:
    """Split of summary indices into a kept block and a deleted block.

    `keep` holds the components conditioned on, `drop` the components that
    get deleted and imputed. Together they must cover every summary index
    exactly once.
    """

    keep: tuple
    drop: tuple

    def __post_init__(self):
        object.__setattr__(self, "keep", tuple(int(i) for i in self.keep))
        object.__setattr__(self, "drop", tuple(int(i) for i in self.drop))
        if len(self.keep) == 0 or len(self.drop) == 0:
            raise ValueError("both partition blocks must be non-empty")
        if set(self.keep) & set(self.drop):
            raise ValueError("partition blocks overlap")
        if len(set(self.keep)) != len(self.keep) or len(set(self.drop)) != len(self.drop):
            raise ValueError("partition blocks contain duplicates")

    @property
    def size(self):
        return len(self.keep) + len(self.drop)

    def validate(self, n_summaries):
        if set(self.keep) | set(self.drop) != set(range(n_summaries)):
            raise ValueError(
                f"partition does not cover all {n_summaries} summary components"
            )
        return self

    @classmethod
    def from_names(cls, keep_names, all_names):
        """Build a partition by naming the kept components."""
        all_names = list(all_names)
        unknown = [n for n in keep_names if n not in all_names]
        if unknown:
            raise ValueError(f"unknown summary names: {unknown}")
        keep = tuple(all_names.index(n) for n in keep_names)
        drop = tuple(i for i in range(len(all_names)) if i not in keep)
        return cls(keep, drop)

    def split(self, s):
        """(kept, deleted) components of a summary vector."""
        s = np.asarray(s, dtype=float)
        if s.shape[-1] != self.size:
            raise ValueError(f"summary has {s.shape[-1]} components, partition covers {self.size}")
        return s[..., list(self.keep)], s[..., list(self.drop)]

    def merge(self, kept, deleted):
        """Inverse of split; reassembles the full summary vector."""
        kept = np.asarray(kept, dtype=float)
        deleted = np.asarray(deleted, dtype=float)
        if kept.shape[-1] != len(self.keep) or deleted.shape[-1] != len(self.drop):
            raise ValueError("block sizes do not match the partition")
        shape = kept.shape[:-1] + (self.size,)
        out = np.empty(shape)
        out[..., list(self.keep)] = kept
        out[..., list(self.drop)] = deleted
        return out


@dataclass
class TrainingSet:
    """Aligned parameter draws and simulated summaries."""

    params: np.ndarray
    summaries: np.ndarray
    param_names: tuple
    summary_names: tuple
    model_id: str
    seed: int
    n_discarded: int = 0

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float)
        self.summaries = np.asarray(self.summaries, dtype=float)
        self.param_names = tuple(self.param_names)
        self.summary_names = tuple(self.summary_names)
        if self.params.ndim != 2 or self.summaries.ndim != 2:
            raise ValueError("params and summaries must be two-dimensional")
        if self.params.shape[0] != self.summaries.shape[0]:
            raise ValueError("params and summaries row counts differ")
        if self.params.shape[1] != len(self.param_names):
            raise ValueError("param_names length does not match params")
        if self.summaries.shape[1] != len(self.summary_names):
            raise ValueError("summary_names length does not match summaries")
        if self.summaries.size and not np.all(np.isfinite(self.summaries)):
            raise ValueError("summaries contain non-finite values")

    @property
    def n(self):
        return self.params.shape[0]

    def param_column(self, name):
        return self.params[:, self.param_names.index(name)]


class SimulationModel:
    """Base class tying together prior, simulator, and summary map."""

    model_id = ""
    param_names = ()
    summary_names = ()

    def __init__(self, prior):
        self.prior = prior

    def simulate(self, theta, rng):
        raise NotImplementedError

    def summarize(self, data):
        """Summary vector of one data set, or None when unusable."""
        raise NotImplementedError


class PoissonModel(SimulationModel):
    """iid Poisson counts summarised by sample mean and variance."""

    model_id = "poisson"
    param_names = ("eta",)
    summary_names = ("mean", "var")

    def __init__(self, data_size=5, prior=None):
        if prior is None:
            prior = PriorSpec(("eta",), (GammaMarginal(1.0, 1.0),))
        super().__init__(prior)
        self.data_size = check_int(data_size, "data_size", minimum=2)

    def simulate(self, theta, rng):
        return simulators.poisson_simulate(theta[0], self.data_size, rng)

    def summarize(self, data):
        return simulators.poisson_summaries(data)


class StereoModel(SimulationModel):
    """Poisson count of inclusions with GPD sizes above a fixed threshold."""

    model_id = "stereo"
    param_names = ("lam", "sigma", "xi")

    def __init__(self, threshold=5.0, prior=None):
        if prior is None:
            prior = PriorSpec(
                ("lam", "sigma", "xi"),
                (
                    UniformMarginal(2.0, 200.0),
                    UniformMarginal(0.0, 10.0),
                    UniformMarginal(-5.0, 5.0),
                ),
            )
        super().__init__(prior)
        self.threshold = float(threshold)
        levels = simulators.STEREO_QUANTILE_LEVELS
        self.summary_names = ("n_incl",) + tuple(f"q{int(round(100 * q)):03d}" for q in levels)

    def simulate(self, theta, rng):
        return simulators.stereo_simulate(theta, rng, threshold=self.threshold)

    def summarize(self, data):
        return simulators.stereo_summaries(data)


class RickerModel(SimulationModel):
    """Ricker counts summarised by a fixed-threshold two-regime autoregression.

    With summaries="raw" the series values themselves are the features,
    which is what the window-scan regressor trains on.
    """

    model_id = "ricker"
    param_names = ("log_phi", "log_r", "log_sigma")

    def __init__(self, setar_threshold=None, config=None, prior=None, summaries="setar"):
        if prior is None:
            prior = PriorSpec(
                ("log_phi", "log_r", "log_sigma"),
                (
                    UniformMarginal(11.0, 13.0),
                    UniformMarginal(-0.02, 0.04),
                    UniformMarginal(-2.0, -0.5),
                ),
            )
        super().__init__(prior)
        if summaries not in ("setar", "raw"):
            raise ValueError(f"summaries must be 'setar' or 'raw', got {summaries!r}")
        if summaries == "setar" and setar_threshold is None:
            raise ValueError("setar summaries need a setar_threshold")
        self.summaries = summaries
        self.setar_threshold = None if setar_threshold is None else float(setar_threshold)
        self.config = config if config is not None else simulators.RickerConfig()
        if summaries == "setar":
            self.summary_names = ("a0", "a1", "a2", "rho", "b0", "b1", "b2", "zeta")
        else:
            self.summary_names = tuple(f"t{i:03d}" for i in range(self.config.n_obs))

    def simulate(self, theta, rng):
        return simulators.ricker_simulate(theta, self.config, rng)

    def summarize(self, data):
        if self.summaries == "raw":
            return np.asarray(data, dtype=float)
        try:
            return ricker_setar_summaries(data, self.setar_threshold)
        except SetarFitError:
            return None


def build_training_set(model, n, seed):
    """Simulate n (parameter, summary) training rows.

    Each row runs on its own derived stream; an invalid simulation or summary
    re-draws the parameter on the same stream, up to MAX_ROW_ATTEMPTS times.
    A row exhausting its attempts, or an overall failure rate above
    MAX_FAILURE_RATE, aborts with a RuntimeError rather than looping.
    """
    n = check_int(n, "n", minimum=1)
    params = np.empty((n, model.prior.dim))
    summaries = None
    n_discarded = 0
    for i in range(n):
        rng = substream(seed, SIMULATE, i)
        for attempt in range(MAX_ROW_ATTEMPTS):
            theta = model.prior.sample_one(rng)
            data = model.simulate(theta, rng)
            s = model.summarize(data) if data is not None else None
            if s is not None:
                break
            n_discarded += 1
        else:
            raise RuntimeError(
                f"row {i}: simulation invalid {MAX_ROW_ATTEMPTS} times in a row; "
                f"check the model configuration"
            )
        if summaries is None:
            summaries = np.empty((n, len(s)))
        params[i] = theta
        summaries[i] = s
        if n_discarded > MAX_FAILURE_RATE * (n_discarded + i + 1) and n_discarded >= MAX_ROW_ATTEMPTS:
            raise RuntimeError(
                f"aborting: {n_discarded} invalid simulations against {i + 1} kept rows"
            )
    return TrainingSet(
        params=params,
        summaries=summaries,
        param_names=model.param_names,
        summary_names=tuple(model.summary_names),
        model_id=model.model_id,
        seed=int(seed),
        n_discarded=n_discarded,
    )


def make_model(model_id, options=None):
    """Instantiate a registered model from a plain options mapping."""
    options = dict(options or {})
    prior = options.pop("prior", None)
    if prior is not None and not isinstance(prior, PriorSpec):
        prior = PriorSpec.from_dict(prior)
    if model_id == "poisson":
        return PoissonModel(data_size=options.pop("data_size", 5), prior=prior, **options)
    if model_id == "stereo":
        return StereoModel(threshold=options.pop("threshold", 5.0), prior=prior, **options)
    if model_id == "ricker":
        config_opts = {
            k: options.pop(k) for k in ("n_obs", "burn_in", "n0") if k in options
        }
        config = simulators.RickerConfig(**config_opts) if config_opts else None
        return RickerModel(
            setar_threshold=options.pop("setar_threshold", None),
            config=config,
            prior=prior,
            **options,
        )
    raise ValueError(f"unknown model {model_id!r}")


MODELS = ("poisson", "stereo", "ricker")
