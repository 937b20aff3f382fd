"""Command-line front end.

Exit status: 0 success, 1 configuration / input parse error, 2 precondition
violation, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .bounds import (
    VarianceProfile,
    cv_bias_lower_bound,
    cv_variance_bound,
    me_bias_upper_bound,
    me_variance_bound,
)
from .core import BE, CV_KINDS, LBCV, LEAVE_ONE_OUT, LVCV, ME, EstimatorSpec
from .errors import ConfigurationError, DomainError, EnumerationCapError
from .oracle import DiscreteInstance, enumerate_expected_value, format_fraction, outcome_table
from .regression import DEFAULT_DEGREES, RegressionScenario, regression_estimators, run_regression_benchmark
from .report import MonteCarloReport, format_table, plot_csv
from .simulation import (
    ADS_SETTINGS,
    DEFAULT_REPLICATIONS,
    DEFAULT_SEED,
    Bernoulli,
    Gaussian,
    ScenarioConfig,
    ads_scenario,
    figure_estimators,
    run_monte_carlo,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_CONFIG = 1
EXIT_PRECONDITION = 2
EXIT_IO = 3

SCENARIOS = {
    "ads1": "internet ads, all click rates 0.5, 100,000 visitors (M in 10, 100, 1000)",
    "ads2": "internet ads, click rates evenly 0.02..0.05, 300,000 visitors (M in 30, 300, 3000)",
    "regression": "polynomial model selection on 4(sin y + sin 2y), 81 points, noise variance 4",
    "custom": "inline Bernoulli or Gaussian variables given by means / variances / samples",
}


class ConfigParseError(Exception):
    """A config file or flag value could not be parsed (exit status 1)."""


def parse_k(token: str) -> int | str:
    token = token.strip().lower()
    if token == LEAVE_ONE_OUT:
        return LEAVE_ONE_OUT
    try:
        return int(token)
    except ValueError:
        raise ConfigParseError(f"fold count {token!r} is neither an integer nor 'loo'") from None


def parse_estimator(token: str) -> EstimatorSpec:
    """``me``, ``be``, ``be:2,3``, ``lbcv:10``, ``lvcv:loo`` or ``cv:2``."""
    name, _, arg = token.strip().lower().partition(":")
    if name == ME and not arg:
        return EstimatorSpec(ME)
    if name == BE:
        prior = parse_pair(arg) if arg else (1, 1)
        return EstimatorSpec(BE, prior=prior)
    if name == "cv" and arg:
        return EstimatorSpec(LBCV, parse_k(arg), label=f"CV-{arg.upper()}")
    if name in CV_KINDS and arg:
        return EstimatorSpec(name, parse_k(arg))
    raise ConfigParseError(f"cannot parse estimator {token!r}")


def parse_pair(text: str) -> tuple[float, float]:
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) != 2:
        raise ConfigParseError(f"expected two comma-separated numbers, got {text!r}")
    try:
        vals = tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigParseError(f"expected numbers, got {text!r}") from None
    return tuple(int(v) if v.is_integer() else v for v in vals)


def _split(value) -> list:
    if isinstance(value, (list, tuple)):
        return list(value)
    if isinstance(value, str):
        return [v for v in value.split(",") if v.strip()]
    return [value]


def parse_degrees(value) -> tuple[int, ...]:
    if isinstance(value, str) and "-" in value and "," not in value:
        lo, _, hi = value.partition("-")
        try:
            return tuple(range(int(lo), int(hi) + 1))
        except ValueError:
            raise ConfigParseError(f"bad degree range {value!r}") from None
    try:
        return tuple(int(v) for v in _split(value))
    except (TypeError, ValueError):
        raise ConfigParseError(f"bad degree list {value!r}") from None


@dataclass
class RunConfig:
    """Resolved run options: config-file values overridden by flags."""

    scenario: str = "ads1"
    m: int | None = None
    replications: int | None = None
    k: list | None = None
    variant: str | None = None
    seed: int = DEFAULT_SEED
    degrees: tuple[int, ...] = DEFAULT_DEGREES
    output: str | None = None
    format: str | None = None
    threads: int | None = None
    # inline scenario
    distribution: str = "bernoulli"
    means: list | None = None
    variances: list | None = None
    samples: list | None = None
    estimators: list | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    _INT_FIELDS = ("m", "replications", "seed", "threads")

    @classmethod
    def from_mapping(cls, data: dict[str, Any], source: str = "config") -> "RunConfig":
        cfg = cls()
        cfg.update(data, source)
        return cfg

    def update(self, data: dict[str, Any], source: str = "flag") -> None:
        names = {f.name for f in fields(self)} - {"extra"}
        for key, value in data.items():
            if value is None:
                continue
            key = key.replace("-", "_")
            if key not in names:
                raise ConfigParseError(f"{source}: unknown field {key!r}")
            setattr(self, key, self._coerce(key, value, source))

    def _coerce(self, key: str, value, source: str):
        try:
            if key in self._INT_FIELDS:
                if isinstance(value, bool) or not isinstance(value, (int, str)):
                    raise TypeError
                return int(value)
            if key == "k":
                return [parse_k(str(v)) for v in _split(value)]
            if key == "degrees":
                return parse_degrees(value)
            if key in ("means", "variances"):
                return [float(v) for v in _split(value)]
            if key == "samples":
                return [int(v) for v in _split(value)]
            if key == "estimators":
                items = value.split(";") if isinstance(value, str) else value
                return [str(v).strip() for v in items if str(v).strip()]
            if key in ("variant", "scenario", "format", "distribution"):
                return str(value).lower()
            return str(value)
        except (TypeError, ValueError):
            raise ConfigParseError(f"{source}: field {key!r} has invalid value {value!r}") from None

    def check(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigParseError(f"field 'scenario': unknown scenario {self.scenario!r}")
        if self.variant not in (None, LBCV, LVCV, "both"):
            raise ConfigParseError(f"field 'variant': expected lbcv, lvcv or both, got {self.variant!r}")
        if self.format not in (None, "csv", "json"):
            raise ConfigParseError(f"field 'format': expected csv or json, got {self.format!r}")
        if self.distribution not in ("bernoulli", "gaussian"):
            raise ConfigParseError(f"field 'distribution': expected bernoulli or gaussian, got {self.distribution!r}")

    def cv_overrides(self) -> list[EstimatorSpec] | None:
        if self.estimators:
            return [parse_estimator(t) for t in self.estimators]
        if self.k is None and self.variant is None:
            return None
        ks = self.k if self.k is not None else [10]
        variants = [LBCV, LVCV] if self.variant in (None, "both") else [self.variant]
        specs = [EstimatorSpec(ME)]
        for K in ks:
            for v in variants:
                specs.append(EstimatorSpec(v, K))
        return specs

    def output_format(self) -> str:
        if self.format:
            return self.format
        if self.output and self.output.lower().endswith(".json"):
            return "json"
        return "csv"

    def to_dict(self) -> dict[str, Any]:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "extra"}
        d["degrees"] = list(d["degrees"])
        d["k"] = list(d["k"]) if d["k"] is not None else None
        return d


def load_config_file(path: str) -> dict[str, Any]:
    text = Path(path).read_text()
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigParseError(f"{path}: {exc}") from exc
    for key, value in data.items():
        if isinstance(value, dict):
            raise ConfigParseError(f"{path}: field {key!r}: nested tables are not allowed (flat keys only)")
    return data


def build_run(cfg: RunConfig):
    overrides = cfg.cv_overrides()
    if cfg.scenario in ("ads1", "ads2"):
        setting = 1 if cfg.scenario == "ads1" else 2
        M = cfg.m if cfg.m is not None else ADS_SETTINGS[setting]["M"][0]
        if M < 1:
            raise ConfigurationError(f"M must be positive, got {M}")
        return ads_scenario(
            setting,
            M,
            replications=cfg.replications or DEFAULT_REPLICATIONS,
            master_seed=cfg.seed,
            estimators=overrides,
        )
    if cfg.scenario == "regression":
        return RegressionScenario(
            degrees=cfg.degrees,
            estimators=tuple(overrides) if overrides else regression_estimators(),
            replications=cfg.replications or 1000,
            master_seed=cfg.seed,
        )
    if not cfg.means or not cfg.samples:
        raise ConfigParseError("custom scenario needs 'means' and 'samples'")
    M = len(cfg.means)
    samples = cfg.samples * M if len(cfg.samples) == 1 else cfg.samples
    if cfg.distribution == "bernoulli":
        dists = [Bernoulli(p) for p in cfg.means]
    else:
        variances = cfg.variances or [1.0]
        variances = variances * M if len(variances) == 1 else variances
        if len(variances) != M:
            raise ConfigParseError(f"field 'variances': {len(variances)} values for {M} variables")
        dists = [Gaussian(mu, v) for mu, v in zip(cfg.means, variances)]
    return ScenarioConfig(
        distributions=tuple(dists),
        samples_per_variable=tuple(samples),
        estimators=tuple(overrides) if overrides else figure_estimators(),
        replications=cfg.replications or DEFAULT_REPLICATIONS,
        master_seed=cfg.seed,
        scenario_id="custom",
    )


def _threads(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get("MAXEV_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigParseError(f"MAXEV_THREADS={env!r} is not an integer") from None
    return 1


def cmd_run(args) -> int:
    cfg = RunConfig()
    if args.config:
        cfg.update(load_config_file(args.config), source=args.config)
    cfg.update(
        {
            "scenario": args.scenario,
            "m": args.m,
            "replications": args.r,
            "k": args.k,
            "variant": args.variant,
            "seed": args.seed,
            "degrees": args.degrees,
            "output": args.output,
            "format": args.format,
            "threads": args.threads,
            "means": args.means,
            "variances": args.variances,
            "samples": args.samples,
            "estimators": args.estimators,
            "distribution": args.distribution,
        }
    )
    cfg.check()
    threads = _threads(cfg.threads)
    scenario = build_run(cfg)
    if isinstance(scenario, RegressionScenario):
        report = run_regression_benchmark(scenario, threads=threads)
    else:
        report = run_monte_carlo(scenario, threads=threads)
    # neither threads nor the destination change results
    resolved = cfg.to_dict()
    resolved.pop("threads")
    resolved.pop("output")
    report.metadata["run_config"] = resolved
    print(format_table(report))
    if cfg.output:
        text = report.to_json() if cfg.output_format() == "json" else report.to_csv()
        Path(cfg.output).write_text(text)
        print(f"wrote {cfg.output}")
    return 0


def cmd_oracle(args) -> int:
    try:
        means = [Fraction(t.strip()) for t in args.means.split(",") if t.strip()]
    except ValueError:
        raise ConfigParseError(f"cannot parse means {args.means!r}") from None
    token = args.estimator
    if args.estimator in CV_KINDS:
        if args.k is None:
            raise ConfigParseError(f"--estimator {args.estimator} needs --k")
        token = f"{args.estimator}:{args.k}"
    elif args.estimator == BE and args.prior:
        token = f"be:{args.prior}"
    spec = parse_estimator(token)
    try:
        inst = DiscreteInstance(means, args.n)
    except EnumerationCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(
            "suggested Monte Carlo run: maxev run --scenario custom "
            f"--means {','.join(str(float(p)) for p in means)} --samples {args.n} --estimators {token} --r 100000",
            file=sys.stderr,
        )
        return EXIT_PRECONDITION
    value = enumerate_expected_value(inst, spec)
    bias = value - inst.mu_star
    print(f"instance: means=[{', '.join(format_fraction(p) for p in inst.means)}] n={inst.n} M={inst.M}")
    print(f"estimator: {spec.label}" + (f" prior={spec.prior}" if spec.kind == BE else ""))
    print(f"expected: {format_fraction(value)} ({float(value):.17g})")
    print(f"mu*: {format_fraction(inst.mu_star)}")
    print(f"bias: {format_fraction(bias)} ({float(bias):.17g})")
    if args.expect:
        target = Fraction(args.expect)
        verdict = "match" if target == value else "MISMATCH"
        print(f"reference {format_fraction(target)}: {verdict} (difference {format_fraction(value - target)})")
    if args.table or (args.expect and Fraction(args.expect) != value):
        print("outcome table (samples per variable | probability | estimate):")
        for samples, prob, est_value in outcome_table(inst, spec):
            cols = " ".join("".join(str(v) for v in col) for col in samples)
            print(f"  {cols} | {format_fraction(prob)} | {format_fraction(est_value)}")
    return 0


def cmd_bounds(args) -> int:
    try:
        var = [float(v) for v in args.var.split(",") if v.strip()]
    except ValueError:
        raise ConfigParseError(f"cannot parse variances {args.var!r}") from None
    if any(v < 0 for v in var):
        raise ConfigParseError("variances must be non-negative")
    M = args.m if args.m is not None else len(var)
    if len(var) == 1:
        var = var * M
    if len(var) != M:
        raise ConfigParseError(f"{len(var)} variances for M={M}")
    K = parse_k(args.k) if isinstance(args.k, str) else args.k
    if args.n is not None:
        sizes = [args.n] * M
        K = args.n if K == LEAVE_ONE_OUT else K
        whole = VarianceProfile.analytic(var, sizes)
        fold_side = VarianceProfile.analytic(var, sizes, K, role="fold")
        arg_side = VarianceProfile.analytic(var, sizes, K, role="argument", variant=args.variant)
    else:
        if K == LEAVE_ONE_OUT:
            raise ConfigParseError("--k loo needs --n")
        whole = VarianceProfile(var)
        fold_side = VarianceProfile.equal_folds(var, K, role="fold")
        arg_side = VarianceProfile.equal_folds(var, K, role="argument", variant=args.variant)
    rows = [
        ("me_bias_upper_bound", me_bias_upper_bound(whole)),
        ("me_variance_bound", me_variance_bound(whole)),
        (f"cv_variance_bound[K={K}]", cv_variance_bound(fold_side, K)),
        (f"cv_bias_lower_bound[{args.variant},K={K}]", cv_bias_lower_bound(arg_side, K)),
    ]
    if M == 2:
        rows.append((f"cv_bias_lower_bound_m2[{args.variant},K={K}]", cv_bias_lower_bound(arg_side, K, m2_tightening=True)))
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        print(f"{name:<{width}}  {value:.6g}")
    return 0


def cmd_plotdata(args) -> int:
    try:
        text = Path(args.report).read_text()
    except OSError as exc:
        print(f"error: cannot read {args.report}: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        report = MonteCarloReport.load(text)
    except DomainError as exc:
        raise ConfigParseError(str(exc)) from exc
    out = plot_csv(report)
    if args.output:
        Path(args.output).write_text(out)
    else:
        sys.stdout.write(out)
    return 0


def cmd_list(args) -> int:
    print("scenarios:")
    for name, desc in SCENARIOS.items():
        print(f"  {name:<11} {desc}")
    print("estimators:")
    print("  me          maximum of the sample estimates")
    print("  lbcv:K      low-bias K-fold cross-validation (K integer or 'loo')")
    print("  lvcv:K      low-variance K-fold cross-validation (K integer or 'loo')")
    print("  cv:K        alias for lbcv:K labelled CV-K")
    print("  be[:a,b]    Bayesian estimator with Beta(a, b) prior, Bernoulli data only")
    print("default ads estimators: " + ", ".join(e.label for e in figure_estimators()))
    print("default regression estimators: " + ", ".join(e.label for e in regression_estimators()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxev", description="Estimate maximum expected values from samples.")
    p.add_argument("--version", action="version", version=f"maxev {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo scenario and write a report")
    run.add_argument("--config", help="flat TOML config file; flags override its values")
    run.add_argument("--scenario", choices=sorted(SCENARIOS))
    run.add_argument("--m", type=int, help="number of variables (ads scenarios)")
    run.add_argument("--r", type=int, help="number of replications")
    run.add_argument("--k", help="comma-separated fold counts, 'loo' for leave-one-out")
    run.add_argument("--variant", help="lbcv, lvcv or both (with --k)")
    run.add_argument("--seed", type=int, help="master seed")
    run.add_argument("--degrees", help="regression degrees, e.g. 1-9 or 1,3,5")
    run.add_argument("--means", help="custom scenario means")
    run.add_argument("--variances", help="custom Gaussian variances")
    run.add_argument("--samples", help="custom samples per variable")
    run.add_argument("--distribution", help="custom distribution: bernoulli or gaussian")
    run.add_argument("--estimators", help="semicolon-separated estimators, e.g. 'me;lbcv:10;be:1,1'")
    run.add_argument("--output", help="report path")
    run.add_argument("--format", help="csv or json (default from extension, else csv)")
    run.add_argument("--threads", type=int, help="worker cap (env MAXEV_THREADS); results do not depend on it")
    run.set_defaults(func=cmd_run)

    orc = sub.add_parser("oracle", help="exact expectation by outcome enumeration")
    orc.add_argument("--means", required=True, help="Bernoulli means, e.g. 0.5,0.5 or 1/2,1/4")
    orc.add_argument("--n", type=int, required=True, help="samples per variable")
    orc.add_argument("--estimator", required=True, choices=[ME, LBCV, LVCV, BE])
    orc.add_argument("--k", help="fold count for lbcv/lvcv")
    orc.add_argument("--prior", help="Beta prior a,b for be (default 1,1)")
    orc.add_argument("--expect", help="reference value p/q to compare against")
    orc.add_argument("--table", action="store_true", help="print the full outcome table")
    orc.set_defaults(func=cmd_oracle)

    bnd = sub.add_parser("bounds", help="closed-form bias and variance bounds")
    bnd.add_argument("--m", type=int, help="number of variables")
    bnd.add_argument("--var", required=True, help="variances: per-sample with --n, else of each estimator")
    bnd.add_argument("--n", type=int, help="samples per variable")
    bnd.add_argument("--k", default=10, help="fold count or 'loo' (default 10)")
    bnd.add_argument("--variant", default=LBCV, choices=[LBCV, LVCV])
    bnd.set_defaults(func=cmd_bounds)

    plot = sub.add_parser("plotdata", help="long-format bias/variance shares for stacked bars")
    plot.add_argument("report", help="report file (csv or json)")
    plot.add_argument("--output", help="write here instead of stdout")
    plot.set_defaults(func=cmd_plotdata)

    lst = sub.add_parser("list", help="list built-in scenarios and estimators")
    lst.set_defaults(func=cmd_list)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigurationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
