"""Semiparametric transition models for count data.

The count ``Y`` is modelled through its transitions: ``P(Y > r | Y >= r, x)
= F(theta_r + x'beta)`` with smooth intercepts ``theta_r``.  Penalized
maximum likelihood on the long (binary) form of the data gives the
estimates; baselines, proper scoring rules and resampling tools sit
alongside.
"""

__version__ = "0.1.0"

from .baselines import BaselineFit, BaselineSpec, fit_baseline, fit_hurdle, fit_negbin, fit_poisson, fit_zip
from .basis import BSplineBasis, PenaltyMatrix, bspline_matrix, difference_penalty, theta_penalty
from .data import (
    AugmentedDataset,
    CountDataset,
    DataError,
    SubsampleSplit,
    augment,
    load_csv,
    load_dataset,
    max_observed,
    subsample,
)
from .distribution import PredictedDistribution
from .experiments import SimConfig, build_spec, flexibility_study, run_study, simulate_counts
from .kernels import BACKEND
from .persist import load, save
from .scoring import (
    Protocol,
    ScoreReport,
    brier,
    compare_models,
    log_score,
    rps,
    select_lambda,
    select_lambda_aic,
)
from .transition import (
    FittedTransitionModel,
    SingularInformationError,
    TransitionSpec,
    continuation_ratio_effect,
    fit,
    fit_varying,
    fit_zero_split,
    predict_pmf,
    format_table,
    summarize,
)

__all__ = [
    "AugmentedDataset", "BACKEND", "BSplineBasis", "BaselineFit", "BaselineSpec", "CountDataset",
    "DataError", "FittedTransitionModel", "PenaltyMatrix", "PredictedDistribution", "Protocol",
    "ScoreReport", "SimConfig", "SingularInformationError", "SubsampleSplit", "TransitionSpec",
    "augment", "brier", "bspline_matrix", "build_spec", "compare_models", "continuation_ratio_effect",
    "difference_penalty", "fit", "fit_baseline", "fit_hurdle", "fit_negbin", "fit_poisson",
    "fit_varying", "fit_zero_split", "fit_zip", "flexibility_study", "format_table", "load", "load_csv",
    "load_dataset", "log_score", "max_observed", "predict_pmf", "rps", "run_study", "save",
    "select_lambda", "select_lambda_aic", "simulate_counts", "subsample", "summarize", "theta_penalty",
]
