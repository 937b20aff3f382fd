"""Monte Carlo report type and its JSON / CSV wire formats."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Sequence

import numpy as np

from .errors import DomainError

SIMULATION_COLUMNS = ("scenario_id", "estimator", "K", "M", "bias", "variance", "rmse", "se", "replications", "seed")
REGRESSION_COLUMNS = ("scenario_id", "estimator", "K", "degree_set", "bias", "variance", "rmse", "se", "replications", "seed")
# appended after the schema columns so a report can be rebuilt from CSV alone
EXTRA_COLUMNS = ("kind", "mean_estimate", "mu_star", "variance_se")
PLOT_COLUMNS = ("scenario_id", "estimator", "K", "component", "value", "share", "rmse_contribution")


def fmt_real(x) -> str:
    """17 significant digits, '.' decimal separator."""
    if x is None:
        return ""
    return format(float(x), ".17g")


@dataclass(frozen=True)
class EstimatorRow:
    estimator: str
    kind: str
    K: int | None
    M: int
    mean_estimate: float
    bias: float
    variance: float
    rmse: float
    se: float
    variance_se: float
    replications: int
    seed: int
    degree_set: str | None = None


def summarize(values: np.ndarray, mu_star: float) -> dict[str, float]:
    """Bias / variance / RMSE / SE of one estimator's replication values.

    Variance uses the 1/R normalisation so that rmse**2 == bias**2 + variance.
    """
    values = np.asarray(values, dtype=float)
    R = values.size
    mean = math.fsum(values) / R
    dev = values - mean
    variance = math.fsum(dev * dev) / R
    m4 = math.fsum(dev**4) / R
    bias = mean - mu_star
    return {
        "mean_estimate": mean,
        "bias": bias,
        "variance": variance,
        "rmse": math.sqrt(bias * bias + variance),
        "se": math.sqrt(variance / R),
        "variance_se": math.sqrt(max(m4 - variance * variance, 0.0) / R),
    }


@dataclass
class MonteCarloReport:
    scenario_id: str
    mu_star: float
    rows: list[EstimatorRow]
    metadata: dict[str, Any] = field(default_factory=dict)
    # per-replication estimates, shape (R, n_estimators); never serialised
    values: np.ndarray | None = field(default=None, repr=False, compare=False)

    def row(self, label: str) -> EstimatorRow:
        for r in self.rows:
            if r.estimator == label:
                return r
        raise KeyError(label)

    @property
    def labels(self) -> list[str]:
        return [r.estimator for r in self.rows]

    @property
    def is_regression(self) -> bool:
        return any(r.degree_set is not None for r in self.rows)

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario_id": self.scenario_id,
            "mu_star": self.mu_star,
            "rows": [asdict(r) for r in self.rows],
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "MonteCarloReport":
        try:
            names = {f.name for f in fields(EstimatorRow)}
            rows = [EstimatorRow(**{k: v for k, v in r.items() if k in names}) for r in d["rows"]]
            return cls(str(d["scenario_id"]), float(d["mu_star"]), rows, dict(d.get("metadata", {})))
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"malformed report: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "MonteCarloReport":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DomainError(f"malformed report JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise DomainError("malformed report: top level is not an object")
        return cls.from_dict(d)

    def to_csv(self) -> str:
        columns = (REGRESSION_COLUMNS if self.is_regression else SIMULATION_COLUMNS) + EXTRA_COLUMNS
        buf = io.StringIO()
        buf.write("# " + json.dumps(self.metadata, sort_keys=True, separators=(",", ":")) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in self.rows:
            rec = asdict(r)
            rec["scenario_id"] = self.scenario_id
            rec["mu_star"] = self.mu_star
            out = []
            for c in columns:
                v = rec[c]
                if isinstance(v, float):
                    out.append(fmt_real(v))
                elif v is None:
                    out.append("")
                else:
                    out.append(str(v))
            w.writerow(out)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "MonteCarloReport":
        lines = text.splitlines()
        metadata: dict[str, Any] = {}
        if lines and lines[0].startswith("# "):
            try:
                metadata = json.loads(lines[0][2:])
            except json.JSONDecodeError as exc:
                raise DomainError(f"malformed report metadata: {exc}") from exc
            lines = lines[1:]
        reader = csv.DictReader(lines)
        rows, scenario, mu_star = [], None, None
        try:
            for rec in reader:
                scenario = rec["scenario_id"]
                mu_star = float(rec["mu_star"])
                rows.append(
                    EstimatorRow(
                        estimator=rec["estimator"],
                        kind=rec["kind"],
                        K=int(rec["K"]) if rec["K"] else None,
                        M=int(rec["M"]) if rec.get("M") else len(rec["degree_set"].split(";")),
                        mean_estimate=float(rec["mean_estimate"]),
                        bias=float(rec["bias"]),
                        variance=float(rec["variance"]),
                        rmse=float(rec["rmse"]),
                        se=float(rec["se"]),
                        variance_se=float(rec["variance_se"]),
                        replications=int(rec["replications"]),
                        seed=int(rec["seed"]),
                        degree_set=rec.get("degree_set") or None,
                    )
                )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise DomainError(f"malformed report CSV: {exc}") from exc
        if not rows:
            raise DomainError("report CSV has no estimator rows")
        return cls(scenario, mu_star, rows, metadata)

    @classmethod
    def load(cls, text: str) -> "MonteCarloReport":
        """Parse either wire format, sniffed from the first character."""
        stripped = text.lstrip()
        if stripped.startswith("{"):
            return cls.from_json(text)
        return cls.from_csv(text)


def plot_rows(report: MonteCarloReport) -> list[dict[str, Any]]:
    """Long-format stacked-bar data: bias**2 and variance shares of the MSE.

    A zero-MSE row is attributed wholly to variance so shares still sum to 1.
    """
    out = []
    for r in report.rows:
        mse = r.bias * r.bias + r.variance
        parts = {"bias": r.bias * r.bias, "variance": r.variance}
        for comp in ("bias", "variance"):
            if mse > 0:
                share = parts[comp] / mse
            else:
                share = 0.0 if comp == "bias" else 1.0
            out.append(
                {
                    "scenario_id": report.scenario_id,
                    "estimator": r.estimator,
                    "K": r.K,
                    "component": comp,
                    "value": parts[comp],
                    "share": share,
                    "rmse_contribution": share * r.rmse,
                }
            )
    return out


def plot_csv(report: MonteCarloReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PLOT_COLUMNS)
    for rec in plot_rows(report):
        w.writerow([fmt_real(rec[c]) if isinstance(rec[c], float) else ("" if rec[c] is None else rec[c]) for c in PLOT_COLUMNS])
    return buf.getvalue()


def format_table(report: MonteCarloReport) -> str:
    """Human-readable bias / variance / RMSE table."""
    head = f"{'estimator':<12} {'bias':>12} {'variance':>12} {'rmse':>12} {'se':>12}"
    lines = [f"scenario {report.scenario_id}  mu* = {report.mu_star:.6g}", head, "-" * len(head)]
    for r in report.rows:
        lines.append(f"{r.estimator:<12} {r.bias:>12.5g} {r.variance:>12.5g} {r.rmse:>12.5g} {r.se:>12.3g}")
    return "\n".join(lines)


def rows_from_values(
    labels: Sequence[str],
    kinds: Sequence[str],
    ks: Sequence[int | None],
    values: np.ndarray,
    mu_star: float,
    M: int,
    seed: int,
    degree_set: str | None = None,
) -> list[EstimatorRow]:
    rows = []
    for j, (label, kind, K) in enumerate(zip(labels, kinds, ks)):
        s = summarize(values[:, j], mu_star)
        rows.append(
            EstimatorRow(
                estimator=label,
                kind=kind,
                K=K,
                M=M,
                replications=int(values.shape[0]),
                seed=int(seed),
                degree_set=degree_set,
                **s,
            )
        )
    return rows
