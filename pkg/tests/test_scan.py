from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from maxperm.errors import DegenerateSplitError, InputError, NoAdmissibleThresholdError
from maxperm.scan import SplitLayout, TrimPolicy, candidate_thresholds, max_scan
from maxperm.stats import (
    Counts2x2,
    GroupSummary,
    StatKind,
    chi_square_2x2,
    mann_whitney_z,
    midranks,
    pooled_t,
    tie_sizes,
    welch_t,
)

ALL_KINDS = list(StatKind)
LOOSE = TrimPolicy(0.0, 1)


def brute_force(y, x, kind, trim):
    """Every admissible split, each statistic computed from scratch."""
    y, x = np.asarray(y, float), np.asarray(x, float)
    n = y.size
    lo, hi = trim.bounds(n)
    out = {}
    for c in np.unique(x):
        left = x <= c
        n1 = int(left.sum())
        if not lo <= n1 <= hi:
            continue
        a, b = y[left], y[~left]
        try:
            if kind is StatKind.POOLED_T:
                t = pooled_t(GroupSummary.from_values(a), GroupSummary.from_values(b))
            elif kind is StatKind.WELCH_T:
                t = welch_t(GroupSummary.from_values(a), GroupSummary.from_values(b))
            elif kind is StatKind.MANN_WHITNEY:
                r = midranks(y)
                t = mann_whitney_z(r[left], n1, n - n1, tie_sizes(y))
            else:
                t = chi_square_2x2(
                    Counts2x2(
                        int(np.sum(a == 0)), int(np.sum(b == 0)), int(np.sum(a == 1)), int(np.sum(b == 1))
                    )
                )
        except DegenerateSplitError:
            t = 0.0
        out[float(c)] = abs(t)
    return out


def test_candidate_threshold_examples():
    assert_array_equal(candidate_thresholds([1, 2, 3, 4, 5], LOOSE), [1, 2, 3, 4])
    assert_array_equal(candidate_thresholds([1, 1, 2, 2], LOOSE), [1])
    assert_array_equal(candidate_thresholds(np.arange(1, 11), TrimPolicy(0.2, 1)), [3, 4, 5, 6, 7])


def test_trim_policy_bounds_and_validation():
    assert TrimPolicy().bounds(100) == (11, 89)
    assert TrimPolicy(0.1, 5).bounds(20) == (5, 15)
    with pytest.raises(InputError):
        TrimPolicy(0.5, 1)
    with pytest.raises(InputError):
        TrimPolicy(0.1, 0)


def test_no_admissible_threshold():
    with pytest.raises(NoAdmissibleThresholdError):
        SplitLayout.from_x([1, 1, 1, 1], LOOSE)
    with pytest.raises(NoAdmissibleThresholdError):
        SplitLayout.from_x(np.arange(8), TrimPolicy(0.1, 5))


@pytest.mark.parametrize("kind", [StatKind.POOLED_T, StatKind.WELCH_T, StatKind.MANN_WHITNEY])
def test_constant_outcome_gives_zero(kind):
    res = max_scan(np.full(20, 3.0), np.arange(20.0), kind)
    assert res.max_stat == 0.0
    assert np.all(res.stats == 0.0)


def test_median_split_example():
    v = np.arange(1.0, 7.0)
    res = max_scan(v, v, StatKind.POOLED_T, LOOSE)
    assert res.argmax_threshold == 3.0 and res.argmax_n1 == 3
    # interior splits hold at least one two-point group; single-point sides give 0
    assert_allclose(res.stats, [0.0, 2.9541957, 3.6742346, 2.9541957, 0.0], rtol=1e-7)


def test_scan_result_invariants():
    rng = np.random.default_rng(0)
    y, x = rng.normal(size=40), rng.uniform(size=40)
    res = max_scan(y, x, "welch")
    assert res.max_stat == res.stats.max()
    assert res.argmax_threshold in res.thresholds
    assert res.stats.size == res.thresholds.size == res.split_sizes.size >= 1
    assert res.df > 0
    assert max_scan(y, x, "t").df == 38


def test_chisq_requires_binary_outcome():
    with pytest.raises(InputError):
        max_scan(np.arange(20.0), np.arange(20.0), StatKind.CHI_SQUARE)


def test_length_mismatch():
    with pytest.raises(InputError):
        max_scan(np.arange(20.0), np.arange(21.0), "t")


def _small_case(draw, kind):
    n = draw(st.integers(3, 8))
    if kind is StatKind.CHI_SQUARE:
        y = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    else:
        y = draw(st.lists(st.integers(-3, 3), min_size=n, max_size=n))
    x = draw(st.lists(st.integers(0, 5), min_size=n, max_size=n))
    return np.array(y, float), np.array(x, float)


@st.composite
def small_cases(draw):
    kind = draw(st.sampled_from(ALL_KINDS))
    y, x = _small_case(draw, kind)
    eps = draw(st.sampled_from([0.0, 0.1, 0.2]))
    return kind, y, x, TrimPolicy(eps, 1)


@settings(max_examples=300, deadline=None)
@given(small_cases())
def test_max_scan_equals_brute_force(case):
    kind, y, x, trim = case
    oracle = brute_force(y, x, kind, trim)
    try:
        res = max_scan(y, x, kind, trim)
    except NoAdmissibleThresholdError:
        assert not oracle
        return
    assert_array_equal(res.thresholds, sorted(oracle))
    assert_allclose(res.stats, [oracle[c] for c in res.thresholds], rtol=1e-10, atol=1e-12)
    assert res.max_stat == pytest.approx(max(oracle.values()), rel=1e-10, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(ALL_KINDS), st.integers(0, 10_000))
def test_incremental_equals_from_scratch_moderate_n(kind, seed):
    rng = np.random.default_rng(seed)
    n = 40
    y = rng.integers(0, 2, n).astype(float) if kind is StatKind.CHI_SQUARE else rng.normal(size=n).round(1)
    x = rng.integers(0, 15, n).astype(float)
    res = max_scan(y, x, kind)
    oracle = brute_force(y, x, kind, TrimPolicy())
    assert_allclose(res.stats, [oracle[c] for c in res.thresholds], rtol=1e-10, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(ALL_KINDS), st.integers(0, 10_000))
def test_invariant_under_increasing_transform_of_x(kind, seed):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, 30).astype(float) if kind is StatKind.CHI_SQUARE else rng.normal(size=30)
    x = rng.uniform(-1, 1, 30)
    a, b = max_scan(y, x, kind), max_scan(y, np.exp(3 * x) + x, kind)
    assert_array_equal(a.stats, b.stats)
    assert_array_equal(a.split_sizes, b.split_sizes)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_mann_whitney_invariant_under_increasing_transform_of_y(seed):
    rng = np.random.default_rng(seed)
    y, x = rng.normal(size=30), rng.uniform(size=30)
    a = max_scan(y, x, "mw")
    b = max_scan(np.arctan(y) * 10 + 5, x, "mw")
    assert_allclose(a.stats, b.stats, rtol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([StatKind.POOLED_T, StatKind.WELCH_T, StatKind.MANN_WHITNEY]), st.integers(0, 10_000))
def test_sign_flip_of_y_leaves_abs_stats(kind, seed):
    rng = np.random.default_rng(seed)
    y, x = rng.standard_t(3, size=25), rng.uniform(size=25)
    assert_allclose(max_scan(-y, x, kind).stats, max_scan(y, x, kind).stats, rtol=1e-10, atol=1e-12)
