"""Seeded Monte Carlo harness and the internet-ads scenarios.

Replications are processed in fixed-size blocks. Block ``b`` draws from a
generator seeded by a SeedSequence hash of ``(master_seed, b)``, and the block
size depends only on the scenario, so results do not depend on thread count
or scheduling. Every estimator sees the same sampled data (common random
numbers).
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence, Union

import numpy as np

from . import __version__
from .batch import batch_estimate
from .core import BE, CV_KINDS, LBCV, LEAVE_ONE_OUT, LVCV, ME, EstimatorSpec
from .errors import ConfigurationError, DomainError
from .report import MonteCarloReport, rows_from_values

BLOCK_CELLS = 1 << 21
MAX_BLOCK = 4096


@dataclass(frozen=True)
class Bernoulli:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise DomainError(f"Bernoulli p must lie in [0, 1], got {self.p}")

    @property
    def mean(self) -> float:
        return float(self.p)

    @property
    def variance(self) -> float:
        return float(self.p) * (1.0 - float(self.p))

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        return (rng.random(shape) < self.p).astype(float)

    def to_dict(self) -> dict:
        return {"kind": "bernoulli", "p": self.p}


@dataclass(frozen=True)
class Gaussian:
    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance >= 0:
            raise DomainError(f"Gaussian variance must be >= 0, got {self.variance}")

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        return self.mean + math.sqrt(self.variance) * rng.standard_normal(shape)

    def to_dict(self) -> dict:
        return {"kind": "gaussian", "mean": self.mean, "variance": self.variance}


@dataclass(frozen=True)
class PointMass:
    value: float

    @property
    def mean(self) -> float:
        return float(self.value)

    @property
    def variance(self) -> float:
        return 0.0

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        return np.full(shape, float(self.value))

    def to_dict(self) -> dict:
        return {"kind": "pointmass", "value": self.value}


DistributionSpec = Union[Bernoulli, Gaussian, PointMass]


def distribution_from_dict(d: dict) -> DistributionSpec:
    kind = d.get("kind")
    if kind == "bernoulli":
        return Bernoulli(float(d["p"]))
    if kind == "gaussian":
        return Gaussian(float(d["mean"]), float(d["variance"]))
    if kind == "pointmass":
        return PointMass(float(d["value"]))
    raise ConfigurationError(f"unknown distribution kind {kind!r}")


def true_max_mean(distributions: Sequence[DistributionSpec]) -> float:
    if len(distributions) == 0:
        raise DomainError("need at least one distribution")
    return max(d.mean for d in distributions)


def spec_to_dict(spec: EstimatorSpec) -> dict:
    d: dict[str, Any] = {"kind": spec.kind, "label": spec.label}
    if spec.K is not None:
        d["K"] = spec.K
    if spec.kind == BE:
        d["prior"] = list(spec.prior)
    if spec.fold_seed is not None:
        d["fold_seed"] = spec.fold_seed
    return d


@dataclass(frozen=True)
class ScenarioConfig:
    distributions: tuple[DistributionSpec, ...]
    samples_per_variable: tuple[int, ...]
    estimators: tuple[EstimatorSpec, ...]
    replications: int
    master_seed: int
    scenario_id: str = "custom"
    notes: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "distributions", tuple(self.distributions))
        object.__setattr__(self, "samples_per_variable", tuple(int(n) for n in self.samples_per_variable))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if len(self.distributions) == 0:
            raise ConfigurationError("scenario needs at least one variable")
        if len(self.samples_per_variable) != len(self.distributions):
            raise ConfigurationError(
                f"{len(self.distributions)} distributions but {len(self.samples_per_variable)} sample counts"
            )
        if min(self.samples_per_variable) < 1:
            raise ConfigurationError("every variable needs at least one sample")
        if self.replications < 2:
            raise ConfigurationError(f"need at least 2 replications, got {self.replications}")
        if not self.estimators:
            raise ConfigurationError("scenario needs at least one estimator")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigurationError("master_seed must be a 64-bit unsigned integer")
        labels = [e.label for e in self.estimators]
        if len(set(labels)) != len(labels):
            raise ConfigurationError(f"duplicate estimator labels in {labels}")

    @property
    def M(self) -> int:
        return len(self.distributions)

    @property
    def block_size(self) -> int:
        cells = self.M * max(self.samples_per_variable)
        return int(min(MAX_BLOCK, self.replications, max(1, BLOCK_CELLS // cells)))

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario_id": self.scenario_id,
            "distributions": [d.to_dict() for d in self.distributions],
            "samples_per_variable": list(self.samples_per_variable),
            "estimators": [spec_to_dict(e) for e in self.estimators],
            "replications": self.replications,
            "master_seed": self.master_seed,
        }


def block_seed(master_seed: int, block: int) -> int:
    """64-bit child seed for a replication block."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(block),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _draw_block(rng: np.random.Generator, cfg: ScenarioConfig, B: int) -> np.ndarray:
    sizes = cfg.samples_per_variable
    L = max(sizes)
    dists = cfg.distributions
    equal = min(sizes) == L
    if equal and all(isinstance(d, Bernoulli) for d in dists):
        p = np.array([d.p for d in dists], dtype=float)
        return (rng.random((B, cfg.M, L)) < p[None, :, None]).astype(float)
    if equal and all(isinstance(d, Gaussian) for d in dists):
        mean = np.array([d.mean for d in dists], dtype=float)
        sd = np.sqrt([d.variance for d in dists])
        return mean[None, :, None] + sd[None, :, None] * rng.standard_normal((B, cfg.M, L))
    data = np.zeros((B, cfg.M, L))
    for i, (d, n) in enumerate(zip(dists, sizes)):
        data[:, i, :n] = d.sample(rng, (B, n))
    return data


def validate_estimators(cfg: ScenarioConfig) -> None:
    n_min = min(cfg.samples_per_variable)
    for spec in cfg.estimators:
        if spec.kind in CV_KINDS:
            K = spec.resolve_k(cfg.samples_per_variable)
            if K < 2 or K > n_min:
                raise ConfigurationError(f"{spec.label}: K={K} needs 2 <= K <= min N_i = {n_min}")
        if spec.kind == BE and not all(isinstance(d, (Bernoulli, PointMass)) for d in cfg.distributions):
            raise ConfigurationError(f"{spec.label}: the Bayesian estimator needs Bernoulli variables")


def _run_block(cfg: ScenarioConfig, b: int) -> np.ndarray:
    start = b * cfg.block_size
    B = min(cfg.block_size, cfg.replications - start)
    seed = block_seed(cfg.master_seed, b)
    rng = np.random.default_rng(seed)
    data = _draw_block(rng, cfg, B)
    lengths = np.array(cfg.samples_per_variable)
    out = np.empty((B, len(cfg.estimators)))
    for j, spec in enumerate(cfg.estimators):
        try:
            out[:, j] = batch_estimate(data, lengths, spec)
        except DomainError as exc:
            raise DomainError(
                f"{spec.label} failed in replications {start}..{start + B - 1} (block seed {seed}): {exc}"
            ) from exc
    return out


def run_monte_carlo(cfg: ScenarioConfig, threads: int = 1) -> MonteCarloReport:
    """Run every estimator on ``cfg.replications`` fresh sample sets."""
    validate_estimators(cfg)
    n_blocks = -(-cfg.replications // cfg.block_size)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(lambda b: _run_block(cfg, b), range(n_blocks)))
    else:
        blocks = [_run_block(cfg, b) for b in range(n_blocks)]
    values = np.concatenate(blocks, axis=0)
    mu_star = true_max_mean(cfg.distributions)
    rows = rows_from_values(
        [e.label for e in cfg.estimators],
        [e.kind for e in cfg.estimators],
        [e.resolve_k(cfg.samples_per_variable) for e in cfg.estimators],
        values,
        mu_star,
        cfg.M,
        cfg.master_seed,
    )
    metadata = {
        "tool": "maxev",
        "version": __version__,
        "config": cfg.to_dict(),
        "master_seed": cfg.master_seed,
        "fold_scheme": "round-robin (sample j -> fold j mod K)",
        "seed_derivation": "SeedSequence(entropy=master_seed, spawn_key=(block,))",
        "block_size": cfg.block_size,
        "variance_normalisation": "1/R",
    }
    metadata.update(cfg.notes)
    return MonteCarloReport(cfg.scenario_id, mu_star, rows, metadata, values=values)


ADS_SETTINGS = {
    1: {"visitors": 100_000, "M": (10, 100, 1000)},
    2: {"visitors": 300_000, "M": (30, 300, 3000)},
}
DEFAULT_REPLICATIONS = 2000
DEFAULT_SEED = 20130101


def figure_estimators() -> tuple[EstimatorSpec, ...]:
    """ME followed by the seven cross-validation bars, left to right."""
    return (
        EstimatorSpec(ME),
        EstimatorSpec(LVCV, LEAVE_ONE_OUT),
        EstimatorSpec(LVCV, 10),
        EstimatorSpec(LVCV, 5),
        EstimatorSpec(LBCV, 2, label="CV-2"),
        EstimatorSpec(LBCV, 5),
        EstimatorSpec(LBCV, 10),
        EstimatorSpec(LBCV, LEAVE_ONE_OUT),
    )


def setting2_means(M: int) -> np.ndarray:
    """Inclusive equidistant grid from 0.02 to 0.05."""
    if M == 1:
        return np.array([0.05])
    return 0.02 + 0.03 * np.arange(M) / (M - 1)


def ads_scenario(
    setting: int,
    M: int,
    replications: int = DEFAULT_REPLICATIONS,
    master_seed: int = DEFAULT_SEED,
    estimators: Sequence[EstimatorSpec] | None = None,
) -> ScenarioConfig:
    if setting not in ADS_SETTINGS:
        raise ConfigurationError(f"ads setting must be 1 or 2, got {setting}")
    info = ADS_SETTINGS[setting]
    if M not in info["M"]:
        warnings.warn(f"ads setting {setting} is defined for M in {info['M']}, got M={M}", stacklevel=2)
    N = info["visitors"]
    if N % M:
        warnings.warn(f"{N} visitors not divisible by M={M}; using {N // M} per ad", stacklevel=2)
    n_i = N // M
    if n_i < 1:
        raise ConfigurationError(f"M={M} leaves no visitors per ad")
    if setting == 1:
        means = np.full(M, 0.5)
        notes = {"means_grid": "constant 0.5"}
    else:
        means = setting2_means(M)
        notes = {"means_grid": "inclusive equidistant grid 0.02..0.05"}
    return ScenarioConfig(
        distributions=tuple(Bernoulli(float(p)) for p in means),
        samples_per_variable=(n_i,) * M,
        estimators=tuple(estimators) if estimators is not None else figure_estimators(),
        replications=replications,
        master_seed=master_seed,
        scenario_id=f"ads{setting}-M{M}",
        notes=notes,
    )
