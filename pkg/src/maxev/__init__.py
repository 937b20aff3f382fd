"""Estimating the maximum expected value of a set of random variables from samples."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    BE,
    LBCV,
    LEAVE_ONE_OUT,
    LVCV,
    ME,
    Estimate,
    EstimatorSpec,
    FoldPartition,
    SampleSet,
    cv_estimator,
    cv_fold_estimate,
    estimate,
    max_estimator,
    maximal_indices,
    partition_folds,
    sample_mean,
)
from .errors import ConfigurationError, DomainError, EnumerationCapError, MaxEVError  # noqa: E402

__all__ = [
    "BE",
    "LBCV",
    "LEAVE_ONE_OUT",
    "LVCV",
    "ME",
    "ConfigurationError",
    "DomainError",
    "EnumerationCapError",
    "Estimate",
    "EstimatorSpec",
    "FoldPartition",
    "MaxEVError",
    "SampleSet",
    "cv_estimator",
    "cv_fold_estimate",
    "estimate",
    "max_estimator",
    "maximal_indices",
    "partition_folds",
    "sample_mean",
]
