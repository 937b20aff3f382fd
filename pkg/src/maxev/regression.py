"""Polynomial model-selection benchmark.

Candidate models are least-squares polynomials of several degrees fitted to
noisy samples of ``4 (sin y + sin 2y)`` on 81 equidistant inputs in [0, 4].
A model's score on a subset Z is its negative leave-one-out MSE over Z. The
ME maximises the scores on the full data set. The CV variants pick degrees by
scores on the argument part of each outer fold, then value each picked degree
by the negative MSE on the value part of a fit to the argument part. For LBCV
the argument part is the complement of the fold; for LVCV it is the fold.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from . import __version__
from .core import BE, CV_KINDS, LBCV, LVCV, ME, Estimate, EstimatorSpec, SampleSet, maximal_indices, partition_folds
from .errors import ConfigurationError, DomainError
from .report import MonteCarloReport, rows_from_values
from .simulation import block_seed, spec_to_dict

CANONICAL_INPUTS = np.arange(81) * 0.05
NOISE_VARIANCE = 4.0
DEFAULT_DEGREES = tuple(range(1, 10))
DEFAULT_SEED = 20130101


def target_function(y):
    return 4.0 * (np.sin(y) + np.sin(2.0 * y))


@dataclass(frozen=True)
class RegressionDataset:
    inputs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.inputs, dtype=float).reshape(-1)
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if y.shape != v.shape:
            raise DomainError(f"{y.size} inputs but {v.size} values")
        object.__setattr__(self, "inputs", y)
        object.__setattr__(self, "values", v)

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.inputs.tolist(), self.values.tolist()))

    def __len__(self) -> int:
        return self.inputs.size

    def subset(self, idx) -> "RegressionDataset":
        return RegressionDataset(self.inputs[idx], self.values[idx])


def generate_dataset(
    seed=None,
    noise_variance: float = NOISE_VARIANCE,
    inputs: np.ndarray | None = None,
    function: Callable = target_function,
    rng: np.random.Generator | None = None,
) -> RegressionDataset:
    """Noisy observations ``function(y) + N(0, noise_variance)`` at ``inputs``."""
    y = CANONICAL_INPUTS if inputs is None else np.asarray(inputs, dtype=float)
    if rng is None:
        rng = np.random.default_rng(seed)
    noise = math.sqrt(noise_variance) * rng.standard_normal(y.size)
    return RegressionDataset(y, function(y) + noise)


def _scale(y: np.ndarray, domain: tuple[float, float]) -> np.ndarray:
    lo, hi = domain
    return (2.0 * y - (lo + hi)) / (hi - lo)


@dataclass(frozen=True)
class PolynomialModel:
    """Coefficients in the monomial basis of the input rescaled from ``domain`` to [-1, 1]."""

    degree: int
    coefficients: np.ndarray
    domain: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        if len(self.coefficients) != self.degree + 1:
            raise DomainError("coefficient count must equal degree + 1")

    def __call__(self, y):
        return np.polynomial.polynomial.polyval(_scale(np.asarray(y, dtype=float), self.domain), self.coefficients)


class _SubsetFit:
    """One QR of the scaled Vandermonde matrix of a subset, shared by all degrees.

    The leading p columns of a Householder QR factor the degree p-1 design, so
    fitted values and leverages accumulate column by column.
    """

    def __init__(self, t: np.ndarray, y: np.ndarray, max_params: int):
        self.n = t.size
        self.y = y
        P = min(max_params, self.n)
        V = np.vander(t, P, increasing=True)
        self.Q, self.R = np.linalg.qr(V)
        self.c = self.Q.T @ y
        self.fitted = np.cumsum(self.Q * self.c[None, :], axis=1)  # column p-1: fit with p params
        self.leverage = np.cumsum(self.Q * self.Q, axis=1)
        diag = np.abs(np.diag(self.R))
        self.rank_ok = diag > 1e-10 * max(diag.max(), 1e-300)

    def _check_rank(self, p: int) -> None:
        if p > self.Q.shape[1] or not np.all(self.rank_ok[:p]):
            raise DomainError(f"rank-deficient fit: {p} coefficients from {self.n} points")

    def loo_score(self, degree: int) -> float:
        p = degree + 1
        self._check_rank(p)
        resid = self.y - self.fitted[:, p - 1]
        loo = resid / (1.0 - self.leverage[:, p - 1])
        return -float(np.mean(loo * loo))

    def coefficients(self, degree: int) -> np.ndarray:
        p = degree + 1
        self._check_rank(p)
        return solve_triangular(self.R[:p, :p], self.c[:p])


def _domain(data: RegressionDataset) -> tuple[float, float]:
    lo, hi = float(data.inputs.min()), float(data.inputs.max())
    if lo == hi:
        raise DomainError("inputs are all identical")
    return lo, hi


def fit_polynomial(data: RegressionDataset, degree: int, domain=None) -> PolynomialModel:
    """Least-squares fit through a Householder QR on rescaled inputs."""
    if degree < 0:
        raise DomainError("degree must be non-negative")
    if len(data) <= degree:
        raise DomainError(f"rank-deficient: degree {degree} needs more than {len(data)} points")
    domain = _domain(data) if domain is None else domain
    fit = _SubsetFit(_scale(data.inputs, domain), data.values, degree + 1)
    return PolynomialModel(degree, fit.coefficients(degree), domain)


def inner_cv_score(data: RegressionDataset, degree: int, domain=None) -> float:
    """Negative leave-one-out MSE of a degree ``degree`` fit over ``data``."""
    if len(data) < degree + 2:
        raise DomainError(f"leave-one-out for degree {degree} needs >= {degree + 2} points, got {len(data)}")
    domain = _domain(data) if domain is None else domain
    return _SubsetFit(_scale(data.inputs, domain), data.values, degree + 1).loo_score(degree)


@dataclass(frozen=True)
class OuterPlan:
    """Pre-fitting feasibility analysis of one estimator on one data size."""

    K: int | None
    excluded_degrees: tuple[int, ...]
    interpolating_degrees: tuple[int, ...]


def plan_outer(n: int, degrees: Sequence[int], spec: EstimatorSpec) -> OuterPlan:
    """Check that ``spec`` can run on ``n`` points; raise before any fitting if not.

    A degree whose leave-one-out score cannot be computed on some argument
    part is dropped from selection there; if no degree remains the
    configuration is rejected.
    """
    degrees = list(degrees)
    if not degrees:
        raise ConfigurationError("need at least one candidate degree")
    if spec.kind == BE:
        raise ConfigurationError("the Bayesian estimator does not apply to the regression benchmark")
    if spec.kind == ME:
        bad = [d for d in degrees if n < d + 2]
        if bad:
            raise ConfigurationError(f"ME: degrees {bad} need more than {n} points for leave-one-out")
        return OuterPlan(None, (), tuple(d for d in degrees if n == d + 2))
    K = spec.resolve_k([n])
    if not 2 <= K <= n:
        raise ConfigurationError(f"{spec.label}: K={K} needs 2 <= K <= {n}")
    fold_sizes = [(n - k + K - 1) // K for k in range(K)]
    arg_sizes = [n - s for s in fold_sizes] if spec.kind == LBCV else fold_sizes
    smallest = min(arg_sizes)
    if all(smallest < d + 2 for d in degrees):
        raise ConfigurationError(
            f"{spec.label}: argument sets of {smallest} point(s) cannot score any degree in {degrees}"
            + (" (cannot fit a polynomial on a single point)" if smallest == 1 else "")
        )
    excluded = tuple(d for d in degrees if smallest < d + 2)
    interpolating = tuple(d for d in degrees if d + 2 in arg_sizes)
    return OuterPlan(K, excluded, interpolating)


class _DatasetFits:
    def __init__(self, data: RegressionDataset, max_degree: int):
        self.data = data
        self.domain = _domain(data)
        self.t = _scale(data.inputs, self.domain)
        self.max_params = max_degree + 1
        self._cache: dict[bytes, _SubsetFit] = {}

    def fit(self, idx: np.ndarray) -> _SubsetFit:
        key = idx.tobytes()
        got = self._cache.get(key)
        if got is None:
            got = _SubsetFit(self.t[idx], self.data.values[idx], self.max_params)
            self._cache[key] = got
        return got

    def heldout_score(self, fit: _SubsetFit, degree: int, idx: np.ndarray) -> float:
        beta = fit.coefficients(degree)
        pred = np.polynomial.polynomial.polyval(self.t[idx], beta)
        err = self.data.values[idx] - pred
        return -float(np.mean(err * err))


def outer_estimate(
    data: RegressionDataset,
    degrees: Sequence[int],
    spec: EstimatorSpec,
    _fits: _DatasetFits | None = None,
) -> Estimate:
    """ME or CV estimate of the best model's negative MSE.

    ``maximal_sets`` hold positions into ``degrees``.
    """
    degrees = list(degrees)
    n = len(data)
    plan = plan_outer(n, degrees, spec)
    fits = _fits if _fits is not None else _DatasetFits(data, max(degrees))
    everything = np.arange(n)
    if spec.kind == ME:
        full = fits.fit(everything)
        scores = [full.loo_score(d) for d in degrees]
        return Estimate(max(scores), (maximal_indices(scores),))
    assignment = np.array(partition_folds(SampleSet([range(n)]), plan.K, spec.fold_seed).assignment[0])
    fold_values, chosen_sets = [], []
    for k in range(plan.K):
        inside = everything[assignment == k]
        outside = everything[assignment != k]
        arg_idx, val_idx = (outside, inside) if spec.kind == LBCV else (inside, outside)
        arg_fit = fits.fit(arg_idx)
        scores = [arg_fit.loo_score(d) if arg_idx.size >= d + 2 else -math.inf for d in degrees]
        chosen = maximal_indices([s for s in scores if s != -math.inf])
        feasible = [j for j, s in enumerate(scores) if s != -math.inf]
        chosen = frozenset(feasible[j] for j in chosen)
        vals = [fits.heldout_score(arg_fit, degrees[j], val_idx) for j in sorted(chosen)]
        fold_values.append(math.fsum(vals) / len(vals))
        chosen_sets.append(chosen)
    return Estimate(math.fsum(fold_values) / plan.K, tuple(chosen_sets), tuple(fold_values))


def _hat_matrices(inputs: np.ndarray, degrees: Sequence[int]) -> list[np.ndarray]:
    t = _scale(inputs, (float(inputs.min()), float(inputs.max())))
    Q, _ = np.linalg.qr(np.vander(t, max(degrees) + 1, increasing=True))
    return [Q[:, : d + 1] @ Q[:, : d + 1].T for d in degrees]


def analytic_model_values(
    degrees: Sequence[int] = DEFAULT_DEGREES,
    noise_variance: float = NOISE_VARIANCE,
    inputs: np.ndarray | None = None,
    function: Callable = target_function,
) -> np.ndarray:
    """Exact negative expected test MSE of each degree (fit and test sets share the inputs).

    E[test MSE] = s2 (1 + p/n) + |(I - H) r|^2 / n for p coefficients.
    """
    y = CANONICAL_INPUTS if inputs is None else np.asarray(inputs, dtype=float)
    r = function(y)
    n = y.size
    out = []
    for d, H in zip(degrees, _hat_matrices(y, degrees)):
        resid = r - H @ r
        out.append(-(noise_variance * (1.0 + (d + 1) / n) + float(resid @ resid) / n))
    return np.array(out)


def ground_truth_model_values(
    degrees: Sequence[int] = DEFAULT_DEGREES,
    replications: int = 10_000,
    seed: int = DEFAULT_SEED,
    noise_variance: float = NOISE_VARIANCE,
    inputs: np.ndarray | None = None,
    function: Callable = target_function,
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo negative test MSE per degree: fit on one noisy set, test on a fresh one.

    Returns ``(means, standard_errors)``.
    """
    y = CANONICAL_INPUTS if inputs is None else np.asarray(inputs, dtype=float)
    r = function(y)
    rng = np.random.default_rng(seed)
    sd = math.sqrt(noise_variance)
    train = r[None, :] + sd * rng.standard_normal((replications, y.size))
    test = r[None, :] + sd * rng.standard_normal((replications, y.size))
    means, ses = [], []
    for H in _hat_matrices(y, degrees):
        err = test - train @ H.T
        scores = -np.mean(err * err, axis=1)
        means.append(float(np.mean(scores)))
        ses.append(float(np.std(scores) / math.sqrt(replications)))
    return np.array(means), np.array(ses)


def regression_estimators() -> tuple[EstimatorSpec, ...]:
    """ME, then LVCV K=9, 3, the shared K=2 estimator, and LBCV K=3, 9, 81."""
    return (
        EstimatorSpec(ME),
        EstimatorSpec(LVCV, 9),
        EstimatorSpec(LVCV, 3),
        EstimatorSpec(LBCV, 2, label="CV-2"),
        EstimatorSpec(LBCV, 3),
        EstimatorSpec(LBCV, 9),
        EstimatorSpec(LBCV, 81),
    )


@dataclass(frozen=True)
class RegressionScenario:
    degrees: tuple[int, ...] = DEFAULT_DEGREES
    estimators: tuple[EstimatorSpec, ...] = field(default_factory=regression_estimators)
    replications: int = 1000
    master_seed: int = DEFAULT_SEED
    noise_variance: float = NOISE_VARIANCE
    scenario_id: str = "regression"

    def __post_init__(self):
        object.__setattr__(self, "degrees", tuple(int(d) for d in self.degrees))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if self.replications < 2:
            raise ConfigurationError("need at least 2 replications")
        if not self.degrees or min(self.degrees) < 0:
            raise ConfigurationError("degrees must be non-negative and non-empty")
        if len(set(self.degrees)) != len(self.degrees):
            raise ConfigurationError("duplicate degrees")
        if not self.estimators:
            raise ConfigurationError("need at least one estimator")
        labels = [e.label for e in self.estimators]
        if len(set(labels)) != len(labels):
            raise ConfigurationError(f"duplicate estimator labels in {labels}")

    @property
    def degree_set(self) -> str:
        return ";".join(str(d) for d in self.degrees)

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario_id": self.scenario_id,
            "degrees": list(self.degrees),
            "estimators": [spec_to_dict(e) for e in self.estimators],
            "replications": self.replications,
            "master_seed": self.master_seed,
            "noise_variance": self.noise_variance,
            "inputs": "81 equidistant points 0, 0.05, ..., 4",
        }


def _run_dataset(cfg: RegressionScenario, r: int) -> np.ndarray:
    rng = np.random.default_rng(block_seed(cfg.master_seed, r))
    data = generate_dataset(rng=rng, noise_variance=cfg.noise_variance)
    fits = _DatasetFits(data, max(cfg.degrees))
    return np.array([outer_estimate(data, cfg.degrees, spec, fits).value for spec in cfg.estimators])


def run_regression_benchmark(cfg: RegressionScenario, threads: int = 1) -> MonteCarloReport:
    n = CANONICAL_INPUTS.size
    plans = {spec.label: plan_outer(n, cfg.degrees, spec) for spec in cfg.estimators}
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_rep = list(pool.map(lambda r: _run_dataset(cfg, r), range(cfg.replications)))
    else:
        per_rep = [_run_dataset(cfg, r) for r in range(cfg.replications)]
    values = np.vstack(per_rep)
    truth = analytic_model_values(cfg.degrees, cfg.noise_variance)
    mu_star = float(truth.max())
    rows = rows_from_values(
        [e.label for e in cfg.estimators],
        [e.kind for e in cfg.estimators],
        [plans[e.label].K for e in cfg.estimators],
        values,
        mu_star,
        len(cfg.degrees),
        cfg.master_seed,
        degree_set=cfg.degree_set,
    )
    metadata = {
        "tool": "maxev",
        "version": __version__,
        "config": cfg.to_dict(),
        "master_seed": cfg.master_seed,
        "degree_set": cfg.degree_set,
        "fold_scheme": "round-robin over inputs in ascending order (point j -> fold j mod K)",
        "seed_derivation": "SeedSequence(entropy=master_seed, spawn_key=(replication,))",
        "value_sets": "negative MSE on the value part of a fit to the argument part",
        "mu_star_source": "analytic expected test MSE",
        "model_values": [float(v) for v in truth],
        "best_degree": int(cfg.degrees[int(np.argmax(truth))]),
        "excluded_degrees": {k: list(p.excluded_degrees) for k, p in plans.items() if p.excluded_degrees},
        "interpolating_fits": {k: list(p.interpolating_degrees) for k, p in plans.items() if p.interpolating_degrees},
        "variance_normalisation": "1/R",
    }
    return MonteCarloReport(cfg.scenario_id, mu_star, rows, metadata, values=values)
