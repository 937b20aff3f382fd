"""Exact expectations of estimators over all outcomes of small Bernoulli instances.

Every quantity is a :class:`fractions.Fraction`. Outcomes are enumerated as a
mixed-radix counter whose digits are the per-variable 0/1 sample vectors, with
each vector's probability computed once.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

from .core import CV_KINDS, EstimatorSpec, SampleSet, cv_fold_estimate, estimate, partition_folds
from .errors import DomainError, EnumerationCapError

MAX_OUTCOME_BITS = 26


def to_fraction(p) -> Fraction:
    """Exact rational from a Fraction, int, decimal string or float (via its repr)."""
    if isinstance(p, Fraction):
        return p
    if isinstance(p, (int, str)):
        return Fraction(p)
    return Fraction(repr(float(p)))


@dataclass(frozen=True)
class DiscreteInstance:
    """M independent Bernoulli variables with ``n`` samples each."""

    means: tuple[Fraction, ...]
    n: int

    def __init__(self, means: Sequence, n: int):
        fr = tuple(to_fraction(p) for p in means)
        if not fr:
            raise DomainError("instance needs at least one variable")
        for i, p in enumerate(fr):
            if not 0 <= p <= 1:
                raise DomainError(f"mean of variable {i} is {p}, outside [0, 1]")
        if n < 1:
            raise DomainError("need at least one sample per variable")
        bits = len(fr) * n
        if bits > MAX_OUTCOME_BITS:
            raise EnumerationCapError(
                f"2^{bits} outcomes exceed the 2^{MAX_OUTCOME_BITS} cap; use Monte Carlo instead"
            )
        object.__setattr__(self, "means", fr)
        object.__setattr__(self, "n", int(n))

    @property
    def M(self) -> int:
        return len(self.means)

    @property
    def mu_star(self) -> Fraction:
        return max(self.means)


def _variable_outcomes(p: Fraction, n: int) -> list[tuple[tuple[int, ...], Fraction]]:
    q = 1 - p
    out = []
    for vec in itertools.product((0, 1), repeat=n):
        ones = sum(vec)
        prob = p**ones * q ** (n - ones)
        if prob:
            out.append((vec, prob))
    return out


def outcomes(inst: DiscreteInstance) -> Iterator[tuple[SampleSet, Fraction]]:
    """All sample sets with non-zero probability, with their probabilities."""
    per_var = [_variable_outcomes(p, inst.n) for p in inst.means]
    for combo in itertools.product(*per_var):
        prob = Fraction(1)
        for _, pr in combo:
            prob *= pr
        # Fraction samples keep every estimator exact
        x = SampleSet([[Fraction(v) for v in vec] for vec, _ in combo])
        yield x, prob


def _check_spec(inst: DiscreteInstance, spec: EstimatorSpec) -> None:
    if spec.kind in CV_KINDS:
        K = spec.resolve_k([inst.n] * inst.M)
        if not 2 <= K <= inst.n:
            raise DomainError(f"K={K} needs 2 <= K <= n={inst.n}")
        if spec.fold_seed is not None:
            raise DomainError("the oracle uses round-robin folds; fold_seed must be None")


def _exact_value(x: SampleSet, spec: EstimatorSpec) -> Fraction:
    v = estimate(x, spec).value
    if not isinstance(v, (Fraction, int)):
        raise DomainError(f"{spec.label} did not produce an exact value")
    return Fraction(v)


def enumerate_expected_value(inst: DiscreteInstance, spec: EstimatorSpec) -> Fraction:
    _check_spec(inst, spec)
    total = Fraction(0)
    for x, prob in outcomes(inst):
        total += prob * _exact_value(x, spec)
    return total


def exact_bias(inst: DiscreteInstance, spec: EstimatorSpec) -> Fraction:
    return enumerate_expected_value(inst, spec) - inst.mu_star


def selection_weights(inst: DiscreteInstance, spec: EstimatorSpec, k: int) -> list[Fraction]:
    """w_i = E[ I(i in M^k) / |M^k| ] for fold k."""
    if spec.kind not in CV_KINDS:
        raise DomainError("selection weights are defined for cross-validation estimators")
    _check_spec(inst, spec)
    K = spec.resolve_k([inst.n] * inst.M)
    if not 0 <= k < K:
        raise DomainError(f"fold index {k} outside [0, {K})")
    w = [Fraction(0)] * inst.M
    partition = None
    for x, prob in outcomes(inst):
        if partition is None:
            partition = partition_folds(x, K)
        _, chosen = cv_fold_estimate(x, partition, k, spec.kind)
        share = prob / len(chosen)
        for i in chosen:
            w[i] += share
    return w


def outcome_table(inst: DiscreteInstance, spec: EstimatorSpec) -> list[tuple[tuple[tuple[int, ...], ...], Fraction, Fraction]]:
    """(samples, probability, estimate) for every outcome."""
    _check_spec(inst, spec)
    rows = []
    for x, prob in outcomes(inst):
        samples = tuple(tuple(int(v) for v in col) for col in x.variables)
        rows.append((samples, prob, _exact_value(x, spec)))
    return rows


def format_fraction(v: Fraction) -> str:
    v = Fraction(v)
    return f"{v.numerator}/{v.denominator}"
