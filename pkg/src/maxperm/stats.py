"""Two-group statistics evaluated at a single threshold split.

These are the from-scratch reference implementations.  The threshold scan
computes the same quantities incrementally for every split at once; the
functions here are what those sweeps are checked against.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from maxperm.errors import DegenerateSplitError, InputError

__all__ = [
    "StatKind",
    "GroupSummary",
    "Counts2x2",
    "midranks",
    "tie_sizes",
    "tie_term",
    "pooled_t",
    "welch_t",
    "mann_whitney_z",
    "chi_square_2x2",
]


class StatKind(enum.Enum):
    """Two-group statistic used at each threshold."""

    POOLED_T = "t"
    WELCH_T = "welch"
    MANN_WHITNEY = "mw"
    CHI_SQUARE = "chisq"

    @property
    def binary_outcome(self) -> bool:
        return self is StatKind.CHI_SQUARE

    @classmethod
    def parse(cls, value: str | StatKind) -> StatKind:
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"pooled": "t", "ttest": "t", "mannwhitney": "mw", "chi2": "chisq"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise InputError(f"unknown statistic {value!r}; expected one of {choices}") from None


@dataclass(frozen=True)
class GroupSummary:
    """Size, mean and unbiased variance of one side of a split."""

    n: int
    mean: float
    variance: float = math.nan

    def __post_init__(self):
        if self.n < 1:
            raise InputError("group must contain at least one observation")
        if self.n >= 2 and not self.variance >= 0:
            raise InputError("variance must be nonnegative")

    @classmethod
    def from_values(cls, values) -> GroupSummary:
        v = np.asarray(values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise InputError("group values must be a non-empty 1-D array")
        var = float(np.var(v, ddof=1)) if v.size >= 2 else math.nan
        return cls(int(v.size), float(np.mean(v)), var)


@dataclass(frozen=True)
class Counts2x2:
    """Cell counts of the outcome-by-split table.

    Rows are outcome 0 / outcome 1, columns are ``x <= c`` / ``x > c``.
    """

    n11: int
    n12: int
    n21: int
    n22: int

    def __post_init__(self):
        if min(self.n11, self.n12, self.n21, self.n22) < 0:
            raise InputError("cell counts must be nonnegative")

    @property
    def n(self) -> int:
        return self.n11 + self.n12 + self.n21 + self.n22

    @property
    def margins(self) -> tuple[int, int, int, int]:
        """Row sums then column sums."""
        return (
            self.n11 + self.n12,
            self.n21 + self.n22,
            self.n11 + self.n21,
            self.n12 + self.n22,
        )


def _check_finite(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise InputError("expected a non-empty 1-D vector")
    if not np.all(np.isfinite(y)):
        raise InputError("vector contains non-finite values")
    return y


def midranks(y) -> np.ndarray:
    """Ranks 1..n with tied values sharing the mean of the ranks they span."""
    y = _check_finite(y)
    n = y.size
    order = np.argsort(y, kind="stable")
    sorted_y = y[order]
    # starts of runs of equal values in sorted order
    new_run = np.empty(n, dtype=bool)
    new_run[0] = True
    np.not_equal(sorted_y[1:], sorted_y[:-1], out=new_run[1:])
    starts = np.flatnonzero(new_run)
    ends = np.append(starts[1:], n)
    # mean of ranks start+1 .. end is (start + 1 + end) / 2
    run_rank = (starts + 1 + ends) / 2.0
    ranks = np.empty(n, dtype=float)
    ranks[order] = np.repeat(run_rank, ends - starts)
    return ranks


def tie_sizes(y) -> np.ndarray:
    """Sizes of the groups of equal values in ``y`` (singletons included)."""
    y = _check_finite(y)
    _, counts = np.unique(y, return_counts=True)
    return counts


def tie_term(sizes) -> float:
    """Sum of ``t**3 - t`` over tie groups."""
    t = np.asarray(sizes, dtype=float)
    return float(np.sum(t**3 - t))


def _require_pair(g1: GroupSummary, g2: GroupSummary) -> None:
    if g1.n < 2 or g2.n < 2:
        raise DegenerateSplitError(f"split too small: group sizes {g1.n} and {g2.n}, need >= 2 each")


def pooled_t(g1: GroupSummary, g2: GroupSummary) -> float:
    """Equal-variance two-sample t statistic (group 1 minus group 2).

    Includes the ``sqrt(1/n1 + 1/n2)`` factor so values are comparable
    across splits with different group sizes.
    """
    _require_pair(g1, g2)
    n1, n2 = g1.n, g2.n
    diff = g1.mean - g2.mean
    sp2 = ((n1 - 1) * g1.variance + (n2 - 1) * g2.variance) / (n1 + n2 - 2)
    if sp2 <= 0.0:
        if diff == 0.0:
            return 0.0
        raise DegenerateSplitError("zero pooled variance with a nonzero mean difference")
    return diff / math.sqrt(sp2 * (1.0 / n1 + 1.0 / n2))


def welch_t(g1: GroupSummary, g2: GroupSummary) -> float:
    """Two-sample t statistic with separately estimated group variances."""
    _require_pair(g1, g2)
    diff = g1.mean - g2.mean
    se2 = g1.variance / g1.n + g2.variance / g2.n
    if se2 <= 0.0:
        if diff == 0.0:
            return 0.0
        raise DegenerateSplitError("both group variances are zero with a nonzero mean difference")
    return diff / math.sqrt(se2)


def mann_whitney_z(ranks_group1, n1: int, n2: int, tie_spec=()) -> float:
    """Standardized Mann-Whitney statistic with the tie-corrected variance.

    Args:
        ranks_group1: Midranks (within the pooled sample) of the group-1
            observations.
        n1, n2: Group sizes.
        tie_spec: Sizes of the tie groups in the pooled sample.  Singletons
            may be included or omitted; they contribute nothing.

    Returns:
        ``(U - n1*n2/2) / sigma_U`` where ``U`` is the group-1 rank sum minus
        ``n1*(n1+1)/2``.  Zero when every pooled value is tied.
    """
    r = np.asarray(ranks_group1, dtype=float)
    if n1 < 1 or n2 < 1:
        raise DegenerateSplitError("both groups must be non-empty")
    if r.size != n1:
        raise InputError(f"got {r.size} ranks for a group of size {n1}")
    n = n1 + n2
    u = float(r.sum()) - n1 * (n1 + 1) / 2.0
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term(tie_spec) / (n * (n - 1)))
    if var <= 0.0:
        return 0.0
    return (u - n1 * n2 / 2.0) / math.sqrt(var)


def chi_square_2x2(c: Counts2x2) -> float:
    """Pearson chi-square of a 2x2 table, without continuity correction."""
    r1, r2, c1, c2 = c.margins
    if min(r1, r2, c1, c2) < 1:
        raise DegenerateSplitError("2x2 table has an empty margin")
    det = float(c.n11) * c.n22 - float(c.n12) * c.n21
    return c.n * det * det / (float(r1) * r2 * c1 * c2)
