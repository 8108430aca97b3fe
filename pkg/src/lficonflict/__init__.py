"""Conflict diagnostics for simulation-trained posteriors.

Train a quantile regression forest on simulated (parameter, summary) pairs,
read off a posterior density for the observed summaries, then probe whether
subsets of those summaries tell contradictory stories: delete a subset,
impute it from the kept part, and calibrate the shift in the posterior
against references simulated under agreement.
"""

from .density import DensityEstimate, GridSpec, kde_density, weighted_quantile
from .diagnostics import (
    ConflictReport,
    WindowScanReport,
    calibrate_conflict,
    max_log_relative_belief,
    renyi_divergence,
    subset_posterior,
    window_scan,
)
from .forest import QuantileForest
from .imputation import (
    Ar1Params,
    ForestImputer,
    LinearBayesImputer,
    ar1_conditional,
    fit_ar1,
    impute_window,
)
from .models import (
    MODELS,
    PoissonModel,
    RickerModel,
    StereoModel,
    SummaryPartition,
    TrainingSet,
    build_training_set,
    make_model,
)
from .priors import GammaMarginal, PriorSpec, UniformMarginal
from .rejection import AbcResult, rejection_abc
from .setar import SetarFit, fit_setar, ricker_setar_summaries, select_threshold
from .tuning import default_grid, tune_forest

__version__ = "0.1.0"

__all__ = [
    "AbcResult",
    "Ar1Params",
    "ConflictReport",
    "DensityEstimate",
    "ForestImputer",
    "GammaMarginal",
    "GridSpec",
    "LinearBayesImputer",
    "MODELS",
    "PoissonModel",
    "PriorSpec",
    "QuantileForest",
    "RickerModel",
    "SetarFit",
    "StereoModel",
    "SummaryPartition",
    "TrainingSet",
    "UniformMarginal",
    "WindowScanReport",
    "ar1_conditional",
    "build_training_set",
    "calibrate_conflict",
    "default_grid",
    "fit_ar1",
    "fit_setar",
    "impute_window",
    "kde_density",
    "make_model",
    "max_log_relative_belief",
    "rejection_abc",
    "renyi_divergence",
    "ricker_setar_summaries",
    "select_threshold",
    "subset_posterior",
    "tune_forest",
    "weighted_quantile",
    "window_scan",
]
