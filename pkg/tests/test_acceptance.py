"""Acceptance criteria, one test and one PASS/FAIL line each.

Seeds are fixed here, before any run. Tolerances are the stated ones.
"""

import time
from fractions import Fraction

import numpy as np
import pytest

from maxev import BE, LBCV, LVCV, ME, ConfigurationError, EstimatorSpec, SampleSet, estimate
from maxev.bayes import BetaPosterior, expected_max_exact, expected_max_quadrature
from maxev.bounds import (
    VarianceProfile,
    cv_bias_lower_bound,
    cv_variance_bound,
    me_bias_upper_bound,
    me_variance_bound,
)
from maxev.oracle import DiscreteInstance, enumerate_expected_value, format_fraction, outcome_table
from maxev.regression import (
    RegressionScenario,
    analytic_model_values,
    ground_truth_model_values,
    plan_outer,
    run_regression_benchmark,
)
from maxev.simulation import Bernoulli, Gaussian, ScenarioConfig, ads_scenario, run_monte_carlo

pytestmark = pytest.mark.slow

SEED = 20130101
SCENARIO_SEED = 424242
REGRESSION_SEED = 20130101
CONVERGENCE_SEED = 777
BE_SEED = 99


def _fmt(ok):
    return "ok" if ok else "NO"


# --- 1 ---------------------------------------------------------------------


def test_criterion_1_oracle_exactness(verdict):
    start = time.perf_counter()
    inst = DiscreteInstance([Fraction(1, 2)] * 2, 2)
    be = enumerate_expected_value(inst, EstimatorSpec(BE))
    cv = {v: enumerate_expected_value(inst, EstimatorSpec(v, 2)) - inst.mu_star for v in (LBCV, LVCV)}
    me = enumerate_expected_value(inst, EstimatorSpec(ME))
    elapsed = time.perf_counter() - start
    reference = Fraction(21, 32)
    if me != reference:
        print(f"ME expectation {format_fraction(me)} != reference {format_fraction(reference)}; outcome table:")
        for samples, prob, value in outcome_table(inst, EstimatorSpec(ME)):
            print(f"  {samples} p={format_fraction(prob)} ME={format_fraction(value)}")
    ok = be == Fraction(737, 1120) and all(b == 0 for b in cv.values()) and elapsed < 1.0
    verdict(
        "1",
        ok,
        f"BE={format_fraction(be)}, CV bias={[format_fraction(b) for b in cv.values()]}, "
        f"ME={format_fraction(me)} vs reference 21/32 ({'match' if me == reference else 'mismatch reported'}), "
        f"{elapsed:.3f}s",
    )
    assert ok


# --- 2 and 3 -----------------------------------------------------------------


def _random_scenarios():
    rng = np.random.default_rng(SCENARIO_SEED)
    out = []
    for s in range(20):
        M = 2 if s < 4 else int(rng.integers(3, 51))
        N = int(rng.integers(2, 11))
        K = int(rng.integers(2, N + 1))
        equal = s % 4 == 1
        if s % 2 == 0:
            means = np.full(M, rng.uniform(0.1, 0.9)) if equal else rng.uniform(0.1, 0.9, M)
            dists = tuple(Bernoulli(float(p)) for p in means)
        else:
            means = np.full(M, rng.normal(0, 0.5)) if equal else rng.normal(0, 0.5, M)
            var = rng.uniform(0.5, 2.0, M)
            dists = tuple(Gaussian(float(m), float(v)) for m, v in zip(means, var))
        estimators = (EstimatorSpec(ME), EstimatorSpec(LBCV, K), EstimatorSpec(LVCV, K))
        cfg = ScenarioConfig(dists, (N,) * M, estimators, 100_000, SEED + s, scenario_id=f"random-{s}")
        out.append((cfg, K, equal))
    return out


@pytest.fixture(scope="module")
def random_runs():
    start = time.perf_counter()
    runs = [(cfg, K, equal, run_monte_carlo(cfg)) for cfg, K, equal in _random_scenarios()]
    return runs, time.perf_counter() - start


def test_criterion_2_bias_signs(verdict, random_runs):
    runs, elapsed = random_runs
    failures = []
    for cfg, K, equal, rep in runs:
        me = rep.row("ME")
        if me.bias < -3 * me.se:
            failures.append(f"{cfg.scenario_id} ME {me.bias:.3g}")
        for label in (f"LBCV-{K}", f"LVCV-{K}"):
            row = rep.row(label)
            if row.bias > 3 * row.se:
                failures.append(f"{cfg.scenario_id} {label} {row.bias:.3g}")
            if equal and abs(row.bias) > 3 * row.se:
                failures.append(f"{cfg.scenario_id} {label} equal-means {row.bias:.3g}")
    kinds = {type(cfg.distributions[0]).__name__ for cfg, *_ in runs}
    Ms = [cfg.M for cfg, *_ in runs]
    ok = not failures and elapsed < 120 and kinds == {"Bernoulli", "Gaussian"} and min(Ms) >= 2 and max(Ms) <= 50
    verdict(
        "2",
        ok,
        f"{len(runs)} scenarios (M {min(Ms)}..{max(Ms)}), R=1e5, {elapsed:.1f}s, violations={failures or 'none'}",
    )
    assert ok


def _bound_checks(cfg, K, rep):
    sigma2 = [d.variance for d in cfg.distributions]
    sizes = cfg.samples_per_variable
    whole = VarianceProfile.analytic(sigma2, sizes)
    me = rep.row("ME")
    checks = {
        "ME bias": me.bias <= me_bias_upper_bound(whole) + 3 * me.se,
        "ME variance": me.variance <= me_variance_bound(whole) + 3 * me.variance_se,
    }
    folds = VarianceProfile.analytic(sigma2, sizes, K, role="fold")
    for variant in (LBCV, LVCV):
        row = rep.row(f"{variant.upper()}-{K}")
        arg = VarianceProfile.analytic(sigma2, sizes, K, role="argument", variant=variant)
        checks[f"{variant} variance"] = row.variance <= cv_variance_bound(folds) + 3 * row.variance_se
        checks[f"{variant} bias"] = row.bias >= cv_bias_lower_bound(arg) - 3 * row.se
        if cfg.M == 2:
            tight = cv_bias_lower_bound(arg, m2_tightening=True)
            checks[f"{variant} bias (M=2 tightened)"] = row.bias >= tight - 3 * row.se
    return checks


def test_criterion_3_bounds(verdict, random_runs):
    runs, _ = random_runs
    failures, n_checks = [], 0
    for cfg, K, _, rep in runs:
        for name, ok in _bound_checks(cfg, K, rep).items():
            n_checks += 1
            if not ok:
                failures.append(f"{cfg.scenario_id}: {name}")
    ok = not failures
    verdict("3", ok, f"{n_checks} bound checks over {len(runs)} scenarios, violations={failures or 'none'}")
    assert ok


# --- 4 -----------------------------------------------------------------------


def test_criterion_4_ads_setting_one(verdict):
    start = time.perf_counter()
    reports = {M: run_monte_carlo(ads_scenario(1, M, 2000, SEED)) for M in (10, 100, 1000)}
    elapsed = time.perf_counter() - start
    rep = reports[1000]
    cv_rows = [r for r in rep.rows if r.kind != ME]
    unbiased = all(abs(r.bias) <= 3 * r.se for r in cv_rows)
    best_cv = min(cv_rows, key=lambda r: r.rmse).estimator
    me_bias = rep.row("ME").bias
    ok = me_bias > 0.15 and unbiased and best_cv == "LVCV-LOO" and elapsed < 120
    verdict(
        "4",
        ok,
        f"M=1000 ME bias={me_bias:.4f} (>0.15 {_fmt(me_bias > 0.15)}), CV unbiased {_fmt(unbiased)}, "
        f"min-RMSE CV={best_cv}, {elapsed:.1f}s",
    )
    assert ok


# --- 5 -----------------------------------------------------------------------


def test_criterion_5_ads_setting_two(verdict):
    start = time.perf_counter()
    reports = {M: run_monte_carlo(ads_scenario(2, M, 2000, SEED)) for M in (30, 300, 3000)}
    elapsed = time.perf_counter() - start
    loo = {M: r.row("LVCV-LOO").rmse for M, r in reports.items()}
    loo_ok = all(abs(v - 0.013) <= 0.003 for v in loo.values())
    me30, lb30 = reports[30].row("ME").bias, reports[30].row("LBCV-LOO").bias
    witness = abs(lb30) > abs(me30)
    me_rmse = {M: r.row("ME").rmse for M, r in reports.items()}
    order = min(me_rmse, key=me_rmse.get) == 30 and max(me_rmse, key=me_rmse.get) == 3000
    ok = loo_ok and witness and order and elapsed < 300
    verdict(
        "5",
        ok,
        f"LVCV-LOO RMSE={ {M: round(v, 4) for M, v in loo.items()} } ({_fmt(loo_ok)}); "
        f"M=30 |LBCV-LOO bias|={abs(lb30):.5f} vs |ME bias|={abs(me30):.5f} (witness {_fmt(witness)}); "
        f"ME RMSE order {_fmt(order)}; {elapsed:.1f}s",
    )
    assert ok


# --- 6 -----------------------------------------------------------------------


def test_criterion_6_regression(verdict):
    start = time.perf_counter()
    try:
        plan_outer(81, range(1, 10), EstimatorSpec(LVCV, 81))
        rejected = False
    except ConfigurationError:
        rejected = True
    sweep, _ = ground_truth_model_values(replications=10_000, seed=REGRESSION_SEED)
    analytic = analytic_model_values()
    peak = int(np.argmax(sweep)) + 1
    mu_star = float(analytic.max())
    rep = run_regression_benchmark(RegressionScenario(replications=1000, master_seed=REGRESSION_SEED))
    elapsed = time.perf_counter() - start
    me, lb81 = rep.row("ME"), rep.row("LBCV-81")
    me_ok = me.bias > 0 and abs(me.bias - 0.018) <= 0.5 * 0.018
    lb_ok = lb81.bias < 0 and abs(lb81.bias + 0.190) <= 0.5 * 0.190 and abs(lb81.bias) > abs(me.bias)
    rmse_ok = all(me.rmse < r.rmse for r in rep.rows if r.kind != ME)
    truth_ok = peak == 5 and int(np.argmax(analytic)) == 4 and abs(mu_star + 4.34) <= 0.05
    ok = truth_ok and me_ok and lb_ok and rmse_ok and rejected and elapsed < 600
    verdict(
        "6",
        ok,
        f"peak degree={peak}, mu*={mu_star:.4f} ({_fmt(truth_ok)}); ME bias={me.bias:.4f}±{me.se:.4f} "
        f"(target 0.018±50% {_fmt(me_ok)}); LBCV-81 bias={lb81.bias:.4f}±{lb81.se:.4f} ({_fmt(lb_ok)}); "
        f"ME RMSE smallest {_fmt(rmse_ok)}; LVCV-81 rejected {_fmt(rejected)}; {elapsed:.1f}s",
    )
    assert ok


# --- 7 -----------------------------------------------------------------------


def test_criterion_7_determinism(verdict):
    cfg = ads_scenario(2, 300, 300, 5)
    a, b = run_monte_carlo(cfg, threads=1), run_monte_carlo(cfg, threads=4)
    reg = RegressionScenario(replications=8, master_seed=5)
    c, d = run_regression_benchmark(reg, threads=1), run_regression_benchmark(reg, threads=3)
    ok = a.to_csv() == b.to_csv() and a.to_json() == b.to_json() and c.to_csv() == d.to_csv() and c.to_json() == d.to_json()
    verdict("7", ok, "ads2 M=300 and regression: CSV and JSON byte-identical for 1 vs 4 and 1 vs 3 threads")
    assert ok


# --- 8 -----------------------------------------------------------------------

CONVERGENCE_CASES = [
    ([Fraction(1, 2), Fraction(1, 2)], 2, EstimatorSpec(ME)),
    ([Fraction(3, 10), Fraction(1, 2), Fraction(3, 5)], 4, EstimatorSpec(LBCV, 4)),
    ([Fraction(1, 5), Fraction(7, 10)], 5, EstimatorSpec(BE)),
]


def test_criterion_8_oracle_monte_carlo_convergence(verdict):
    details, ok = [], True
    for j, (means, n, spec) in enumerate(CONVERGENCE_CASES):
        exact = enumerate_expected_value(DiscreteInstance(means, n), spec)
        cfg = ScenarioConfig(
            tuple(Bernoulli(float(p)) for p in means), (n,) * len(means), (spec,), 1_000_000, CONVERGENCE_SEED + j
        )
        row = run_monte_carlo(cfg).rows[0]
        z = (row.mean_estimate - float(exact)) / row.se
        ok &= abs(z) <= 4
        details.append(f"{spec.label} z={z:+.2f}")
    verdict("8", ok, "R=1e6: " + ", ".join(details))
    assert ok


# --- 9 -----------------------------------------------------------------------


def test_criterion_9_bayes_exact_vs_quadrature(verdict):
    rng = np.random.default_rng(BE_SEED)
    worst = 0.0
    for _ in range(100):
        M = int(rng.integers(1, 6))
        posts = [BetaPosterior(int(a), int(b)) for a, b in rng.integers(1, 21, size=(M, 2))]
        worst = max(worst, abs(float(expected_max_exact(posts)) - expected_max_quadrature(posts)))
    zeros = estimate(SampleSet([[0, 0], [0, 0]]), EstimatorSpec(BE)).value
    ok = worst <= 1e-10 and zeros == Fraction(5, 14)
    verdict("9", ok, f"max |exact - quadrature| = {worst:.2e} over 100 instances; all-zeros instance = {zeros}")
    assert ok
