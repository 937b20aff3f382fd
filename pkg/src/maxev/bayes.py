"""Bayesian estimator for Bernoulli variables under Beta priors.

The maximum of independent posterior beliefs has CDF ``prod_i F_i(x)``, so its
mean is ``1 - int_0^1 prod_i F_i(x) dx``. With integer Beta parameters each
``F_i`` is a polynomial and the integral is done exactly in rationals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import betainc

from .core import Estimate, SampleSet
from .errors import DomainError

# Product degree above which the exact path falls back to quadrature.
MAX_EXACT_DEGREE = 4096
QUADRATURE_NODES = 128


def _is_integral(v) -> bool:
    return float(v).is_integer()


@dataclass(frozen=True)
class BetaPosterior:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise DomainError(f"Beta parameters must be positive, got ({self.alpha}, {self.beta})")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    @property
    def exact_mean(self) -> Fraction:
        return Fraction(self.alpha) / (Fraction(self.alpha) + Fraction(self.beta))

    @property
    def is_integer(self) -> bool:
        return _is_integral(self.alpha) and _is_integral(self.beta)

    def cdf(self, x):
        return betainc(self.alpha, self.beta, x)


@dataclass(frozen=True)
class PolynomialCdf:
    """A CDF on [0, 1] as monomial coefficients, lowest degree first."""

    coefficients: tuple[Fraction, ...]

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x):
        """Exact for Fraction input; float input is converted exactly and rounded once."""
        if isinstance(x, Fraction):
            acc = Fraction(0)
            for c in reversed(self.coefficients):
                acc = acc * x + c
            return acc
        # float Horner in the monomial basis cancels badly at high degree
        arr = np.asarray(x, dtype=float)
        out = [float(self(Fraction(v))) for v in arr.ravel()]
        return np.array(out).reshape(arr.shape) if arr.ndim else out[0]

    def __mul__(self, other: "PolynomialCdf") -> "PolynomialCdf":
        return PolynomialCdf(_polymul(self.coefficients, other.coefficients))

    def integral(self) -> Fraction:
        """Exact integral over [0, 1]."""
        return sum((c / (k + 1) for k, c in enumerate(self.coefficients)), Fraction(0))

    def check(self, grid_points: int = 1024) -> None:
        """Raise if P(0) != 0, P(1) != 1 or P decreases on a uniform grid."""
        if self(Fraction(0)) != 0 or self(Fraction(1)) != 1:
            raise DomainError("polynomial CDF must satisfy P(0)=0 and P(1)=1")
        vals = [self(Fraction(j, grid_points - 1)) for j in range(grid_points)]
        if any(b < a for a, b in zip(vals, vals[1:])):
            raise DomainError("polynomial CDF decreases on [0, 1]")


def _polymul(p: Sequence[Fraction], q: Sequence[Fraction]) -> tuple[Fraction, ...]:
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a == 0:
            continue
        for j, b in enumerate(q):
            out[i + j] += a * b
    return tuple(out)


def posterior_from_counts(ones: int, total: int, prior=(1, 1)) -> BetaPosterior:
    if not 0 <= ones <= total:
        raise DomainError(f"need 0 <= ones <= total, got ones={ones}, total={total}")
    a, b = prior
    return BetaPosterior(a + ones, b + total - ones)


@lru_cache(maxsize=4096)
def _beta_cdf_coefficients(a: int, b: int) -> tuple[Fraction, ...]:
    # I_x(a, b) = sum_{j=a}^{n} C(n, j) x^j (1-x)^(n-j),  n = a + b - 1
    n = a + b - 1
    coefs = [0] * (n + 1)
    for j in range(a, n + 1):
        cj = math.comb(n, j)
        for t in range(n - j + 1):
            coefs[j + t] += cj * math.comb(n - j, t) * (-1) ** t
    return tuple(Fraction(c) for c in coefs)


def cdf_polynomial(p: BetaPosterior) -> PolynomialCdf:
    """Exact CDF polynomial of a Beta posterior with integer parameters."""
    if not p.is_integer:
        raise DomainError(f"exact CDF needs integer parameters, got ({p.alpha}, {p.beta})")
    return PolynomialCdf(_beta_cdf_coefficients(int(p.alpha), int(p.beta)))


def _product_degree(posteriors: Sequence[BetaPosterior]) -> float:
    return sum(p.alpha + p.beta - 1 for p in posteriors)


def expected_max_exact(posteriors: Sequence[BetaPosterior]) -> Fraction:
    if not posteriors:
        raise DomainError("expected_max needs at least one posterior")
    product: tuple[Fraction, ...] = (Fraction(1),)
    for p in posteriors:
        product = _polymul(product, cdf_polynomial(p).coefficients)
    return 1 - PolynomialCdf(product).integral()


@lru_cache(maxsize=1)
def _gauss_legendre_unit(n: int = QUADRATURE_NODES):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return (nodes + 1.0) / 2.0, weights / 2.0


def expected_max_quadrature(posteriors: Sequence[BetaPosterior]) -> float:
    """Fixed 128-node Gauss-Legendre on [0, 1].

    Exact (up to rounding) when the integrand is a polynomial of degree < 256.
    """
    if not posteriors:
        raise DomainError("expected_max needs at least one posterior")
    x, w = _gauss_legendre_unit()
    prod = np.ones_like(x)
    for p in posteriors:
        prod *= p.cdf(x)
    return float(1.0 - math.fsum(w * prod))


def expected_max(posteriors: Sequence[BetaPosterior], method: str = "auto"):
    """Posterior expectation of the largest mean.

    ``method="auto"`` uses exact rationals when all parameters are integers and
    the product degree is at most ``MAX_EXACT_DEGREE``; otherwise quadrature.
    """
    posteriors = list(posteriors)
    if method == "quadrature":
        return expected_max_quadrature(posteriors)
    exact_ok = all(p.is_integer for p in posteriors) and _product_degree(posteriors) <= MAX_EXACT_DEGREE
    if method == "exact":
        if not exact_ok:
            raise DomainError("exact path needs integer parameters within the degree cap")
        return expected_max_exact(posteriors)
    if method != "auto":
        raise DomainError(f"unknown method {method!r}")
    return expected_max_exact(posteriors) if exact_ok else expected_max_quadrature(posteriors)


def _binary_count(col, i: int) -> int:
    ones = 0
    for j, v in enumerate(col):
        if v == 1:
            ones += 1
        elif v != 0:
            raise DomainError(f"non-binary sample {v!r} at variable {i}, index {j}")
    return ones


def bayes_estimator(x: SampleSet, prior=(1, 1), method: str = "auto") -> Estimate:
    posteriors = [
        posterior_from_counts(_binary_count(col, i), len(col), prior)
        for i, col in enumerate(x.variables)
    ]
    return Estimate(value=expected_max(posteriors, method), maximal_sets=())


@lru_cache(maxsize=65536)
def _cached_from_counts(counts: tuple[tuple[int, int], ...], prior: tuple) -> float:
    posteriors = [posterior_from_counts(o, t, prior) for o, t in counts]
    return float(expected_max(posteriors))


def bayes_from_counts(ones: Sequence[int], totals: Sequence[int], prior=(1, 1)) -> float:
    """Float BE value from success counts; memoised on the sorted count pairs."""
    counts = tuple(sorted(zip((int(o) for o in ones), (int(t) for t in totals))))
    return _cached_from_counts(counts, tuple(prior))
