"""Distribution-free bounds on the bias and variance of ME and CV estimators.

Bounds take a :class:`VarianceProfile`. ``per_variable_variance`` holds
Var(mu_hat_i) of each whole-sample estimator; ``fold_variances`` is an optional
(K, M) array holding the variances of per-fold estimators. Role ``"fold"``
means the single-fold averages mu_hat^k_i (what the variance bound needs for
both variants); ``"value"`` and ``"argument"`` mean the value-set and
argument-set averages of a given variant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import LBCV, LVCV, SampleSet
from .errors import DomainError


def round_robin_fold_sizes(sizes: Sequence[int], K: int) -> np.ndarray:
    """(K, M) counts of samples per fold under ``j % K`` assignment."""
    sizes = np.asarray(sizes, dtype=np.int64)
    k = np.arange(K)[:, None]
    return (sizes[None, :] - k + K - 1) // K


@dataclass(frozen=True)
class VarianceProfile:
    per_variable_variance: np.ndarray
    fold_variances: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.per_variable_variance, dtype=float).reshape(-1)
        if v.size == 0:
            raise DomainError("variance profile needs at least one variable")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise DomainError("variances must be finite and non-negative")
        object.__setattr__(self, "per_variable_variance", v)
        if self.fold_variances is not None:
            f = np.atleast_2d(np.asarray(self.fold_variances, dtype=float))
            if f.shape[1] != v.size:
                raise DomainError(f"fold variances have {f.shape[1]} columns for {v.size} variables")
            if np.any(f < 0) or not np.all(np.isfinite(f)):
                raise DomainError("fold variances must be finite and non-negative")
            object.__setattr__(self, "fold_variances", f)

    @property
    def M(self) -> int:
        return self.per_variable_variance.size

    @classmethod
    def analytic(cls, sigma2, sizes, K: int | None = None, role: str = "value", variant: str = LBCV):
        """Profile for sample averages of variables with per-sample variances ``sigma2``.

        With ``K`` given, fold variances follow round-robin fold sizes. ``role``
        ``"fold"`` gives Var of the single-fold averages, ``"value"`` of the
        value-set averages and ``"argument"`` of the argument-set averages for
        ``variant``.
        """
        sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), np.shape(sizes))
        sizes = np.asarray(sizes, dtype=np.int64)
        if np.any(sizes < 1):
            raise DomainError("every variable needs at least one sample")
        per_var = sigma2 / sizes
        if K is None:
            return cls(per_var)
        return cls(per_var, _fold_profile(sigma2, sizes, K, role, variant))

    @classmethod
    def plug_in(cls, x: SampleSet, K: int | None = None, role: str = "value", variant: str = LBCV):
        """Profile built from unbiased sample variances (ddof=1) of ``x``."""
        if min(x.sizes) < 2:
            raise DomainError("plug-in variances need at least two samples per variable")
        sigma2 = [float(np.var(np.asarray(col, dtype=float), ddof=1)) for col in x.variables]
        return cls.analytic(sigma2, x.sizes, K, role, variant)

    @classmethod
    def equal_folds(cls, variances, K: int, role: str = "value", variant: str = LBCV):
        """Fold variances from whole-sample Var(mu_hat_i), assuming |X^k_i| = N_i / K."""
        v = np.asarray(variances, dtype=float)
        if K < 1:
            raise DomainError("K must be positive")
        fold = K * v
        complement = K / (K - 1) * v if K > 1 else np.full_like(v, np.inf)
        if role == "fold":
            per_fold = fold
        elif role == "value":
            per_fold = fold if variant == LBCV else complement
        else:
            per_fold = complement if variant == LBCV else fold
        return cls(v, np.tile(per_fold, (K, 1)))


def _fold_profile(sigma2, sizes, K, role, variant):
    if variant not in (LBCV, LVCV):
        raise DomainError(f"variant must be lbcv or lvcv, got {variant!r}")
    if role not in ("fold", "value", "argument"):
        raise DomainError(f"role must be 'fold', 'value' or 'argument', got {role!r}")
    if K < 1 or K > sizes.min():
        raise DomainError(f"K={K} incompatible with sample sizes {sizes.tolist()}")
    inside = round_robin_fold_sizes(sizes, K)
    outside = sizes[None, :] - inside
    # LBCV argues on the complement and values on the fold; LVCV the reverse
    use_fold = role == "fold" or (role == "value") == (variant == LBCV)
    counts = inside if use_fold else outside
    with np.errstate(divide="ignore"):
        return np.where(counts > 0, sigma2[None, :] / np.maximum(counts, 1), np.inf)


def _variances(v) -> np.ndarray:
    if isinstance(v, VarianceProfile):
        return v.per_variable_variance
    return VarianceProfile(v).per_variable_variance


def me_bias_upper_bound(v) -> float:
    """sqrt((M-1)/M * sum_i Var(mu_hat_i))."""
    var = _variances(v)
    M = var.size
    return math.sqrt((M - 1) / M * math.fsum(var))


def me_variance_bound(v) -> float:
    return math.fsum(_variances(v))


def _fold_matrix(v: VarianceProfile, K: int | None) -> np.ndarray:
    if not isinstance(v, VarianceProfile) or v.fold_variances is None:
        raise DomainError("this bound needs per-fold variances in the profile")
    f = v.fold_variances
    if K is not None and f.shape[0] != K:
        raise DomainError(f"profile has {f.shape[0]} folds, K={K} requested")
    return f


def cv_variance_bound(v: VarianceProfile, K: int | None = None) -> float:
    """(1/K^2) sum_k sum_i Var(mu_hat^k_i) over single-fold variances (role ``"fold"``).

    The same bound holds for LBCV and LVCV.
    """
    if K is not None and K < 2:
        raise DomainError(f"cross-validation needs K >= 2, got {K}")
    f = _fold_matrix(v, K)
    K = f.shape[0]
    if K < 2:
        raise DomainError(f"cross-validation needs K >= 2, got {K}")
    return math.fsum(f.ravel()) / K**2


def cv_bias_lower_bound(v: VarianceProfile, K: int | None = None, m2_tightening: bool = False) -> float:
    """-(1/K) sum_k sqrt(sum_i Var(a_hat^k_i)) over argument-side fold variances.

    The factor 1/2 tightening is only valid for two variables.
    """
    f = _fold_matrix(v, K)
    if m2_tightening and f.shape[1] != 2:
        raise DomainError(f"the tightened bound holds for M=2 only, got M={f.shape[1]}")
    per_fold = [math.sqrt(math.fsum(row)) for row in f]
    bound = -math.fsum(per_fold) / f.shape[0]
    return 0.5 * bound if m2_tightening else bound
