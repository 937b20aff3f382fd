"""Vectorised estimators over a block of replications.

``data`` has shape (B, M, L): B replications, M variables, samples padded with
zeros beyond each variable's length. Folds are round-robin (sample j in fold
``j % K``), matching :func:`maxev.core.partition_folds` without a seed.
"""

from __future__ import annotations

import numpy as np

from .bayes import bayes_from_counts
from .bounds import round_robin_fold_sizes
from .core import BE, LBCV, ME, EstimatorSpec
from .errors import DomainError


def batch_max_estimator(data: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    return (data.sum(axis=-1) / lengths).max(axis=-1)


def fold_sums(data: np.ndarray, K: int) -> np.ndarray:
    """(B, M, K) per-fold sums under round-robin assignment."""
    B, M, L = data.shape
    padded = -(-L // K) * K
    if padded != L:
        data = np.concatenate([data, np.zeros((B, M, padded - L), dtype=data.dtype)], axis=-1)
    return data.reshape(B, M, padded // K, K).sum(axis=2)


def batch_cv_estimator(data: np.ndarray, lengths: np.ndarray, K: int, variant: str) -> np.ndarray:
    F = fold_sums(data, K)
    counts = round_robin_fold_sizes(lengths, K).T.astype(float)  # (M, K)
    n = lengths.astype(float)[:, None]
    total = F.sum(axis=-1, keepdims=True)
    inside = F / counts
    outside = (total - F) / (n - counts)
    args, vals = (outside, inside) if variant == LBCV else (inside, outside)
    mask = args == args.max(axis=1, keepdims=True)
    fold_values = np.where(mask, vals, 0.0).sum(axis=1) / mask.sum(axis=1)
    return fold_values.mean(axis=-1)


def batch_bayes_estimator(data: np.ndarray, lengths: np.ndarray, prior) -> np.ndarray:
    valid = np.arange(data.shape[-1])[None, :] < lengths[:, None]
    binary = (data == 0) | (data == 1)
    if not np.all(binary | ~valid[None]):
        raise DomainError("the Bayesian estimator needs 0/1 samples")
    ones = data.sum(axis=-1).astype(np.int64)
    return np.array([bayes_from_counts(row, lengths, prior) for row in ones])


def batch_estimate(data: np.ndarray, lengths, spec: EstimatorSpec) -> np.ndarray:
    lengths = np.asarray(lengths, dtype=np.int64)
    if spec.kind == ME:
        return batch_max_estimator(data, lengths)
    if spec.kind == BE:
        return batch_bayes_estimator(data, lengths, spec.prior)
    K = spec.resolve_k(lengths)
    if K < 2 or K > lengths.min():
        raise DomainError(f"{spec.label}: K={K} incompatible with sample sizes")
    if spec.fold_seed is not None:
        raise DomainError("batched cross-validation supports round-robin folds only")
    return batch_cv_estimator(data, lengths, K, spec.kind)
