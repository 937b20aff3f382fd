"""Maximum estimator, K-fold cross-validation estimators and fold machinery.

All functions here are pure. Samples may be floats or :class:`fractions.Fraction`
values; when every sample is a ``Fraction`` (ints allowed alongside) the
arithmetic stays exact, which is what the enumeration oracle relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import DomainError

Number = Union[float, Fraction]
IndexSet = frozenset  # frozenset[int] of variable indices

ME = "me"
LBCV = "lbcv"
LVCV = "lvcv"
BE = "be"
KINDS = (ME, LBCV, LVCV, BE)
CV_KINDS = (LBCV, LVCV)
LEAVE_ONE_OUT = "loo"


def _is_exact(values: Iterable) -> bool:
    has_fraction = False
    for v in values:
        if isinstance(v, Fraction):
            has_fraction = True
        elif not isinstance(v, int) or isinstance(v, bool):
            return False
    return has_fraction


def _mean(values: Sequence[Number]) -> Number:
    n = len(values)
    if _is_exact(values):
        return sum(values, Fraction(0)) / n
    return math.fsum(values) / n


def sample_mean(samples: Sequence[Number]) -> Number:
    """Arithmetic mean with compensated summation.

    Float input is summed with :func:`math.fsum`, so the result is within one
    ulp of the exact mean. Fraction input yields an exact Fraction.
    """
    if len(samples) == 0:
        raise DomainError("sample_mean of an empty list")
    return _mean(list(samples))


def maximal_indices(values: Sequence[Number]) -> IndexSet:
    """Indices attaining the maximum of ``values``, ties by exact equality."""
    if len(values) == 0:
        raise DomainError("maximal_indices needs at least one value")
    for i, v in enumerate(values):
        if not isinstance(v, Fraction) and not math.isfinite(v):
            raise DomainError(f"non-finite value {v!r} at index {i}")
    top = max(values)
    return frozenset(i for i, v in enumerate(values) if v == top)


def _coerce_sample(v) -> Number:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (bool, np.bool_)):
        return float(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, Real):
        return float(v)
    raise DomainError(f"sample {v!r} is not a real number")


@dataclass(frozen=True)
class SampleSet:
    """Samples for M random variables; ``variables[i]`` holds the samples of V_i."""

    variables: tuple[tuple[Number, ...], ...]

    def __init__(self, variables: Iterable[Iterable]):
        cols = tuple(tuple(_coerce_sample(v) for v in var) for var in variables)
        if len(cols) == 0:
            raise DomainError("a SampleSet needs at least one variable")
        for i, col in enumerate(cols):
            if len(col) == 0:
                raise DomainError(f"variable {i} has no samples")
            for j, v in enumerate(col):
                if not isinstance(v, Fraction) and not math.isfinite(v):
                    raise DomainError(f"non-finite sample at variable {i}, index {j}")
        object.__setattr__(self, "variables", cols)

    @property
    def M(self) -> int:
        return len(self.variables)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(v) for v in self.variables)

    def __getitem__(self, i: int) -> tuple[Number, ...]:
        return self.variables[i]

    def __len__(self) -> int:
        return len(self.variables)

    def map(self, fn) -> "SampleSet":
        return SampleSet([[fn(v) for v in var] for var in self.variables])


@dataclass(frozen=True)
class FoldPartition:
    """Assignment of every sample of every variable to one of K folds."""

    K: int
    assignment: tuple[tuple[int, ...], ...]

    def members(self, i: int, k: int) -> list[int]:
        return [j for j, f in enumerate(self.assignment[i]) if f == k]

    def fold_sizes(self) -> np.ndarray:
        """(K, M) array of per-fold sample counts."""
        out = np.zeros((self.K, len(self.assignment)), dtype=np.int64)
        for i, row in enumerate(self.assignment):
            for f in row:
                out[f, i] += 1
        return out


@dataclass(frozen=True)
class EstimatorSpec:
    """Which estimator to run.

    ``K`` is an int fold count or ``"loo"`` (leave-one-out, resolved to the
    smallest per-variable sample count). ``prior`` applies to the Bayesian
    estimator only; ``fold_seed=None`` means deterministic round-robin folds.
    """

    kind: str
    K: int | str | None = None
    prior: tuple[float, float] = (1, 1)
    fold_seed: int | None = None
    label: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown estimator kind {self.kind!r}")
        if self.kind in CV_KINDS:
            if self.K is None:
                raise DomainError(f"{self.kind} requires a fold count K")
            if self.K != LEAVE_ONE_OUT and (not isinstance(self.K, (int, np.integer)) or self.K < 2):
                raise DomainError(f"fold count must be >= 2 or 'loo', got {self.K!r}")
        elif self.K is not None:
            raise DomainError(f"{self.kind} does not take a fold count")
        if self.kind == BE:
            a, b = self.prior
            if not (a > 0 and b > 0):
                raise DomainError(f"Beta prior parameters must be positive, got {self.prior!r}")
        if self.label is None:
            object.__setattr__(self, "label", default_label(self.kind, self.K))

    def resolve_k(self, sizes: Sequence[int]) -> int | None:
        if self.kind not in CV_KINDS:
            return None
        if self.K == LEAVE_ONE_OUT:
            return int(min(sizes))
        return int(self.K)


def default_label(kind: str, K=None) -> str:
    if kind not in CV_KINDS:
        return kind.upper()
    suffix = "LOO" if K == LEAVE_ONE_OUT else str(K)
    return f"{kind.upper()}-{suffix}"


@dataclass(frozen=True)
class Estimate:
    """An estimate of the maximum expected value plus per-fold diagnostics."""

    value: Number
    maximal_sets: tuple[IndexSet, ...]
    fold_values: tuple[Number, ...] = field(default=())


def max_estimator(x: SampleSet) -> Estimate:
    means = [sample_mean(col) for col in x.variables]
    return Estimate(value=max(means), maximal_sets=(maximal_indices(means),))


def partition_folds(x: SampleSet, K: int, fold_seed: int | None = None) -> FoldPartition:
    """Split each variable's samples into K balanced folds.

    Without a seed sample j goes to fold ``j % K``. With a seed each variable's
    indices are shuffled first (one generator, variables in order).
    """
    if not isinstance(K, (int, np.integer)) or K < 2:
        raise DomainError(f"fold count must be an integer >= 2, got {K!r}")
    for i, n in enumerate(x.sizes):
        if K > n:
            raise DomainError(f"K={K} exceeds the {n} samples of variable {i}")
    rng = np.random.default_rng(fold_seed) if fold_seed is not None else None
    rows = []
    for n in x.sizes:
        if rng is None:
            rows.append(tuple(j % K for j in range(n)))
        else:
            perm = rng.permutation(n)
            row = [0] * n
            for pos, j in enumerate(perm):
                row[int(j)] = pos % K
            rows.append(tuple(row))
    return FoldPartition(K=int(K), assignment=tuple(rows))


def _fold_vectors(x: SampleSet, p: FoldPartition, k: int, variant: str):
    inside, outside = [], []
    for col, row in zip(x.variables, p.assignment):
        inside.append(_mean([v for v, f in zip(col, row) if f == k]))
        outside.append(_mean([v for v, f in zip(col, row) if f != k]))
    if variant == LBCV:
        return outside, inside
    if variant == LVCV:
        return inside, outside
    raise DomainError(f"variant must be 'lbcv' or 'lvcv', got {variant!r}")


def cv_fold_estimate(x: SampleSet, p: FoldPartition, k: int, variant: str) -> tuple[Number, IndexSet]:
    """Value of fold k: the mean value-set estimate over the maximal argument set."""
    if not 0 <= k < p.K:
        raise DomainError(f"fold index {k} outside [0, {p.K})")
    if len(p.assignment) != x.M or tuple(len(r) for r in p.assignment) != x.sizes:
        raise DomainError("partition does not match the sample set")
    args, vals = _fold_vectors(x, p, k, variant)
    chosen = maximal_indices(args)
    return _mean([vals[i] for i in sorted(chosen)]), chosen


def cv_estimator(x: SampleSet, spec: EstimatorSpec, partition: FoldPartition | None = None) -> Estimate:
    if spec.kind not in CV_KINDS:
        raise DomainError(f"cv_estimator needs an lbcv/lvcv spec, got {spec.kind!r}")
    if partition is None:
        partition = partition_folds(x, spec.resolve_k(x.sizes), spec.fold_seed)
    folds = [cv_fold_estimate(x, partition, k, spec.kind) for k in range(partition.K)]
    values = tuple(v for v, _ in folds)
    return Estimate(
        value=_mean(list(values)),
        maximal_sets=tuple(s for _, s in folds),
        fold_values=values,
    )


def estimate(x: SampleSet, spec: EstimatorSpec) -> Estimate:
    """Dispatch on ``spec.kind``."""
    if spec.kind == ME:
        return max_estimator(x)
    if spec.kind in CV_KINDS:
        return cv_estimator(x, spec)
    from .bayes import bayes_estimator

    return bayes_estimator(x, spec.prior)
