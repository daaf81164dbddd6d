from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal
from scipy import stats as sps

from maxperm.errors import DegenerateSplitError, InputError
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

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def gs(v):
    return GroupSummary.from_values(v)


def mw_from_groups(y1, y2):
    pooled = np.concatenate([y1, y2])
    r = midranks(pooled)
    return mann_whitney_z(r[: len(y1)], len(y1), len(y2), tie_sizes(pooled))


# -- midranks ------------------------------------------------------------------
@pytest.mark.parametrize(
    "y, expected",
    [
        ((10, 20, 30), (1, 2, 3)),
        ((5, 5, 7), (1.5, 1.5, 3)),
        ((3, 1, 2, 2), (4, 1, 2.5, 2.5)),
    ],
)
def test_midranks_examples(y, expected):
    assert_array_equal(midranks(y), expected)


@given(st.lists(st.integers(-5, 5), min_size=1, max_size=30))
def test_midranks_match_scipy_rankdata(values):
    assert_allclose(midranks(values), sps.rankdata(values, method="average"))


@given(st.lists(st.integers(-4, 4), min_size=1, max_size=20), st.randoms(use_true_random=False))
def test_midranks_permutation_equivariant(values, rnd):
    y = np.array(values, dtype=float)
    perm = list(range(len(y)))
    rnd.shuffle(perm)
    assert_array_equal(midranks(y[perm]), midranks(y)[perm])


def test_midranks_rejects_nonfinite():
    with pytest.raises(InputError):
        midranks([1.0, np.nan])


# -- t statistics --------------------------------------------------------------
def test_pooled_t_examples():
    assert pooled_t(gs([1, 2, 3]), gs([4, 5, 6])) == pytest.approx(-3.0 / math.sqrt(2.0 / 3.0), rel=1e-12)
    assert pooled_t(gs([1, 2, 3]), gs([4, 5, 6])) == pytest.approx(-3.6742, abs=1e-4)
    assert pooled_t(gs([1, 2, 3]), gs([1, 2, 3])) == 0.0
    assert pooled_t(gs([7, 7, 7]), gs([7, 7, 7])) == 0.0


def test_welch_t_examples():
    assert welch_t(gs([1, 2, 3]), gs([4, 5, 6])) == pytest.approx(-3.6742, abs=1e-4)
    assert welch_t(gs([0, 2]), gs([10, 30])) == pytest.approx(-19.0 / math.sqrt(2 / 2 + 200 / 2), rel=1e-12)
    assert welch_t(gs([0, 2]), gs([10, 30])) == pytest.approx(-1.8906, abs=1e-4)
    assert welch_t(gs([4, 1, 2]), gs([4, 1, 2])) == 0.0


def test_t_statistics_match_scipy():
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=7), rng.normal(1, 2, size=11)
    assert_allclose(pooled_t(gs(a), gs(b)), sps.ttest_ind(a, b).statistic, rtol=1e-12)
    assert_allclose(welch_t(gs(a), gs(b)), sps.ttest_ind(a, b, equal_var=False).statistic, rtol=1e-12)


def test_t_statistics_degenerate():
    with pytest.raises(DegenerateSplitError):
        pooled_t(gs([1.0]), gs([1, 2, 3]))
    with pytest.raises(DegenerateSplitError):
        welch_t(gs([1, 1]), gs([2, 2]))
    with pytest.raises(InputError):
        GroupSummary(0, 0.0)
    with pytest.raises(InputError):
        GroupSummary(3, 0.0, -1.0)


@given(st.lists(finite, min_size=2, max_size=12), st.lists(finite, min_size=2, max_size=12))
def test_t_antisymmetry(a, b):
    g1, g2 = gs(a), gs(b)
    for f in (pooled_t, welch_t):
        try:
            t12 = f(g1, g2)
        except DegenerateSplitError:
            continue
        assert f(g2, g1) == pytest.approx(-t12, rel=1e-12, abs=1e-12)


@given(st.lists(finite, min_size=2, max_size=10), finite)
def test_pooled_equals_welch_for_equal_sizes_and_variances(a, shift):
    # second group is a shifted copy: same n and same variance
    a = np.array(a)
    g1, g2 = gs(a), gs(a + shift)
    try:
        tp = pooled_t(g1, g2)
    except DegenerateSplitError:
        return
    assert welch_t(g1, g2) == pytest.approx(tp, rel=1e-12, abs=1e-12)


# -- Mann-Whitney --------------------------------------------------------------
def test_mann_whitney_examples():
    z = -2.0 / math.sqrt(4 * 5 / 12)
    assert mw_from_groups([1, 2], [3, 4]) == pytest.approx(z, rel=1e-12)
    assert mw_from_groups([1, 2], [3, 4]) == pytest.approx(-1.5492, abs=1e-4)
    assert mw_from_groups([3, 4], [1, 2]) == pytest.approx(-z, rel=1e-12)
    assert mw_from_groups([2, 2, 2], [2, 2]) == 0.0


def test_mann_whitney_matches_scipy_normal_approximation():
    rng = np.random.default_rng(11)
    a = rng.integers(0, 6, size=13).astype(float)
    b = rng.integers(0, 6, size=9).astype(float)
    res = sps.mannwhitneyu(a, b, use_continuity=False, method="asymptotic")
    p = 2 * sps.norm.sf(abs(mw_from_groups(a, b)))
    assert_allclose(p, res.pvalue, rtol=1e-10)


def test_mann_whitney_rank_count_checked():
    with pytest.raises(InputError):
        mann_whitney_z([1.0, 2.0], 3, 2)


@given(
    st.lists(st.integers(0, 6), min_size=1, max_size=10),
    st.lists(st.integers(0, 6), min_size=1, max_size=10),
)
def test_mann_whitney_antisymmetric_and_rank_invariant(a, b):
    a, b = np.array(a, float), np.array(b, float)
    z = mw_from_groups(a, b)
    assert mw_from_groups(b, a) == pytest.approx(-z, rel=1e-12, abs=1e-12)
    # strictly increasing transform of the pooled data
    assert mw_from_groups(np.exp(a / 3) + 2 * a, np.exp(b / 3) + 2 * b) == pytest.approx(z, rel=1e-12, abs=1e-12)


# -- chi-square --------------------------------------------------------------
def test_chi_square_examples():
    assert chi_square_2x2(Counts2x2(10, 0, 0, 10)) == pytest.approx(20.0)
    assert chi_square_2x2(Counts2x2(5, 5, 5, 5)) == 0.0
    assert chi_square_2x2(Counts2x2(3, 1, 1, 3)) == pytest.approx(2.0)


def test_chi_square_matches_scipy():
    table = np.array([[12, 5], [7, 19]])
    ref = sps.chi2_contingency(table, correction=False).statistic
    assert_allclose(chi_square_2x2(Counts2x2(*table.ravel())), ref, rtol=1e-12)


def test_chi_square_empty_margin():
    with pytest.raises(DegenerateSplitError):
        chi_square_2x2(Counts2x2(0, 0, 3, 4))
    with pytest.raises(InputError):
        Counts2x2(-1, 0, 1, 1)


tables = st.tuples(*[st.integers(1, 40)] * 4)


@given(tables)
def test_chi_square_symmetries(t):
    a, b, c, d = t
    x = chi_square_2x2(Counts2x2(a, b, c, d))
    assert chi_square_2x2(Counts2x2(a, c, b, d)) == pytest.approx(x, rel=1e-12)
    assert chi_square_2x2(Counts2x2(d, c, b, a)) == pytest.approx(x, rel=1e-12)


@given(tables)
def test_chi_square_is_squared_two_proportion_z(t):
    a, b, c, d = t
    # columns are the two groups; compare the proportion of outcome 1
    n1, n2 = a + c, b + d
    p1, p2 = c / n1, d / n2
    pbar = (c + d) / (n1 + n2)
    se2 = pbar * (1 - pbar) * (1 / n1 + 1 / n2)
    z2 = (p1 - p2) ** 2 / se2
    assert chi_square_2x2(Counts2x2(a, b, c, d)) == pytest.approx(z2, rel=1e-10, abs=1e-12)


def test_statkind_parse():
    assert StatKind.parse("MW") is StatKind.MANN_WHITNEY
    assert StatKind.parse("chi2") is StatKind.CHI_SQUARE
    assert StatKind.CHI_SQUARE.binary_outcome and not StatKind.WELCH_T.binary_outcome
    with pytest.raises(InputError):
        StatKind.parse("fisher")


@settings(max_examples=50)
@given(st.lists(finite, min_size=1, max_size=20))
def test_tie_sizes_sum_to_n(values):
    assert tie_sizes(values).sum() == len(values)
