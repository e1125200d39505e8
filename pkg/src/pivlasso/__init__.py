"""Pivotal sparse estimators: square-root / concomitant Lasso family,
smoothed noise estimation, machine-checked certificates, and synthetic
experiment pipelines."""

from .core import (
    Dataset,
    SvdFactors,
    Truth,
    block_soft_threshold,
    norm_l21,
    norm_l2inf,
    norm_nuclear,
    svd,
)
from .estimators import (
    EstimatorSpec,
    FitResult,
    fit,
    fit_lasso,
    fit_mt_lasso,
    fit_path,
    fit_scl,
    fit_sgcl,
    lambda_max,
    proposed_lambda,
)
from .smoothing import (
    SmoothingParams,
    optimal_covariance_root,
    optimal_sigma,
    smoothed_frobenius,
    smoothed_nuclear,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "EstimatorSpec",
    "FitResult",
    "SmoothingParams",
    "SvdFactors",
    "Truth",
    "block_soft_threshold",
    "fit",
    "fit_lasso",
    "fit_mt_lasso",
    "fit_path",
    "fit_scl",
    "fit_sgcl",
    "lambda_max",
    "norm_l21",
    "norm_l2inf",
    "norm_nuclear",
    "optimal_covariance_root",
    "optimal_sigma",
    "proposed_lambda",
    "smoothed_frobenius",
    "smoothed_nuclear",
    "svd",
]
