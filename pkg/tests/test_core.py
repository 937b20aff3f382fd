from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxev import (
    LBCV,
    LEAVE_ONE_OUT,
    LVCV,
    ME,
    DomainError,
    EstimatorSpec,
    SampleSet,
    cv_estimator,
    cv_fold_estimate,
    estimate,
    max_estimator,
    maximal_indices,
    partition_folds,
    sample_mean,
)
from maxev.errors import MaxEVError

# hand-worked: round-robin K=2 puts samples 0,2 in fold 0 and 1,3 in fold 1
CROSSED = SampleSet([[1, 2, 3, 4], [4, 3, 2, 1]])


def test_sample_mean_and_maximal_indices():
    assert sample_mean([1, 2, 3]) == 2
    assert sample_mean([Fraction(1), Fraction(2)]) == Fraction(3, 2)
    assert maximal_indices([1, 3, 3, 2]) == frozenset({1, 2})
    assert maximal_indices([5]) == frozenset({0})
    with pytest.raises(DomainError):
        maximal_indices([])
    with pytest.raises(DomainError):
        maximal_indices([1.0, float("nan")])


def test_max_estimator_single_variable_is_its_mean():
    est = max_estimator(SampleSet([[0.2, 0.4, 0.9]]))
    assert est.value == pytest.approx(0.5)


def test_crossed_example():
    assert max_estimator(CROSSED).value == Fraction(5, 2)
    lb = cv_estimator(CROSSED, EstimatorSpec(LBCV, 2))
    lv = cv_estimator(CROSSED, EstimatorSpec(LVCV, 2))
    assert lb.value == 2
    assert lv.value == 2
    assert lb.maximal_sets == (frozenset({0}), frozenset({1}))
    assert lv.maximal_sets == (frozenset({1}), frozenset({0}))
    assert lb.fold_values == (2, 2)


def test_tied_argument_averages_value_set():
    # fold 0 argument (fold 1 means) ties at 1, so fold 0 values average 0 and 2
    x = SampleSet([[0, 1], [2, 1]])
    value, chosen = cv_fold_estimate(x, partition_folds(x, 2), 0, LBCV)
    assert chosen == frozenset({0, 1})
    assert value == 1


def test_round_robin_partition():
    p = partition_folds(SampleSet([[0] * 7, [0] * 5]), 3)
    assert p.assignment[0] == (0, 1, 2, 0, 1, 2, 0)
    assert p.members(1, 1) == [1, 4]
    assert p.fold_sizes().tolist() == [[3, 2], [2, 2], [2, 1]]


def test_partition_errors_name_variable():
    x = SampleSet([[1, 2, 3], [1, 2]])
    with pytest.raises(DomainError, match="variable 1"):
        partition_folds(x, 3)
    with pytest.raises(DomainError):
        partition_folds(x, 1)


def test_leave_one_out_resolves_to_min_size():
    spec = EstimatorSpec(LBCV, LEAVE_ONE_OUT)
    assert spec.resolve_k([5, 3, 4]) == 3
    assert spec.label == "LBCV-LOO"
    assert EstimatorSpec(LVCV, 10).label == "LVCV-10"
    assert EstimatorSpec(ME).label == "ME"


@pytest.mark.parametrize("kwargs", [{"kind": "median"}, {"kind": LBCV}, {"kind": LBCV, "K": 1}])
def test_spec_validation(kwargs):
    with pytest.raises(MaxEVError):
        EstimatorSpec(**kwargs)


def test_sample_set_rejects_bad_input():
    with pytest.raises(DomainError):
        SampleSet([])
    with pytest.raises(DomainError, match="variable 1"):
        SampleSet([[1.0], []])
    with pytest.raises(DomainError, match="variable 0, index 1"):
        SampleSet([[1.0, float("inf")]])


def test_seeded_folds_are_balanced_and_reproducible():
    x = SampleSet([list(range(23)), list(range(17))])
    a = partition_folds(x, 5, fold_seed=42)
    b = partition_folds(x, 5, fold_seed=42)
    assert a == b
    assert a != partition_folds(x, 5)
    sizes = a.fold_sizes()
    assert (sizes.max(axis=0) - sizes.min(axis=0)).max() <= 1
    assert sizes.sum(axis=0).tolist() == [23, 17]


# --- properties -----------------------------------------------------------

fractions = st.fractions(min_value=-10, max_value=10, max_denominator=12)


@st.composite
def sample_sets(draw, min_n=2, max_m=5, max_n=8):
    M = draw(st.integers(1, max_m))
    col = st.lists(fractions, min_size=min_n, max_size=max_n)
    return SampleSet([draw(col) for _ in range(M)])


@st.composite
def cv_cases(draw):
    x = draw(sample_sets())
    K = draw(st.integers(2, min(x.sizes)))
    variant = draw(st.sampled_from([LBCV, LVCV]))
    return x, EstimatorSpec(variant, K)


@given(cv_cases())
def test_cv_equals_selection_weighted_sum(case):
    x, spec = case
    p = partition_folds(x, spec.K)
    total = Fraction(0)
    for k in range(spec.K):
        inside = [sample_mean([x[i][j] for j in p.members(i, k)]) for i in range(x.M)]
        outside = [
            sample_mean([x[i][j] for j in range(x.sizes[i]) if p.assignment[i][j] != k]) for i in range(x.M)
        ]
        arg, val = (outside, inside) if spec.kind == LBCV else (inside, outside)
        chosen = maximal_indices(arg)
        total += sum(Fraction(1, len(chosen)) * val[i] for i in chosen)
    assert cv_estimator(x, spec).value == total / spec.K


@given(sample_sets())
def test_two_fold_variants_coincide(x):
    assert cv_estimator(x, EstimatorSpec(LBCV, 2)).value == cv_estimator(x, EstimatorSpec(LVCV, 2)).value


@given(cv_cases())
def test_estimates_within_sample_range(case):
    x, spec = case
    lo = min(min(col) for col in x.variables)
    hi = max(max(col) for col in x.variables)
    for s in (spec, EstimatorSpec(ME)):
        assert lo <= estimate(x, s).value <= hi


@given(cv_cases(), fractions.filter(lambda a: a > 0), fractions)
def test_affine_equivariance(case, a, b):
    x, spec = case
    y = x.map(lambda v: a * v + b)
    for s in (spec, EstimatorSpec(ME)):
        assert estimate(y, s).value == a * estimate(x, s).value + b


@given(cv_cases(), st.randoms())
def test_variable_permutation_invariance(case, rnd):
    x, spec = case
    order = list(range(x.M))
    rnd.shuffle(order)
    y = SampleSet([x[i] for i in order])
    for s in (spec, EstimatorSpec(ME)):
        assert estimate(y, s).value == estimate(x, s).value


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_seeded_partition_balanced_property(seed, K):
    x = SampleSet([[0] * 13, [0] * 9])
    sizes = partition_folds(x, K, fold_seed=seed).fold_sizes()
    assert (sizes.max(axis=0) - sizes.min(axis=0)).max() <= 1


def test_seeded_fold_value_is_mean_of_fold_values():
    rng = np.random.default_rng(0)
    x = SampleSet(rng.normal(size=(3, 12)).tolist())
    spec = EstimatorSpec(LBCV, 3, fold_seed=5)
    est = estimate(x, spec)
    assert len(est.fold_values) == 3
    assert est.value == pytest.approx(np.mean(est.fold_values))
