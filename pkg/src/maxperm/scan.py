"""Threshold enumeration and the maximal two-group statistic.

A split ``{x <= c}`` vs ``{x > c}`` only depends on the ordering of ``x``, so
everything here is expressed through a :class:`SplitLayout`: the stable sort
order of ``x`` plus the group-1 sizes ``n1`` of the admissible splits.  The
layout is computed once and reused read-only by every permutation.

Statistics are swept left to right with cumulative sums over the outcome
arranged in ``x`` order, so a batch of ``B`` outcome vectors costs
``O(B * n)`` after the initial sort.  Each kernel maps a ``(B, n)`` batch to
the ``(B, K)`` matrix of ``|T|`` values at the ``K`` admissible splits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from maxperm.errors import InputError, NoAdmissibleThresholdError
from maxperm.stats import StatKind, midranks, tie_sizes, tie_term

__all__ = [
    "TrimPolicy",
    "SplitLayout",
    "ScanResult",
    "candidate_thresholds",
    "max_scan",
    "make_kernel",
    "check_outcome",
]

# Variances below this fraction of the overall scale are treated as exact
# zeros; cumulative-sum round-off would otherwise turn a degenerate split
# into an arbitrarily large statistic.
_ZERO_VAR_RTOL = 1e-12


@dataclass(frozen=True)
class TrimPolicy:
    """Which splits are admissible.

    Group-1 sizes must satisfy ``floor(eps*n) + 1 <= n1 <= n - floor(eps*n) - 1``
    and both groups must hold at least ``min_group`` observations.
    """

    epsilon: float = 0.1
    min_group: int = 5

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 0.5:
            raise InputError(f"epsilon must lie in [0, 0.5), got {self.epsilon}")
        if self.min_group < 1:
            raise InputError(f"min_group must be >= 1, got {self.min_group}")

    def bounds(self, n: int) -> tuple[int, int]:
        """Inclusive range of admissible group-1 sizes for sample size ``n``."""
        k = math.floor(self.epsilon * n + 1e-9)
        lo = max(k + 1, self.min_group)
        hi = min(n - k - 1, n - self.min_group)
        return lo, hi


@dataclass(frozen=True)
class SplitLayout:
    """Sort order of ``x`` and the admissible splits it induces."""

    order: np.ndarray
    thresholds: np.ndarray
    n1: np.ndarray
    n: int

    @classmethod
    def from_x(cls, x, trim: TrimPolicy = TrimPolicy()) -> SplitLayout:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise InputError("feature must be a 1-D vector")
        if not np.all(np.isfinite(x)):
            raise InputError("feature contains non-finite values")
        n = x.size
        if n < 2 * trim.min_group:
            raise NoAdmissibleThresholdError(
                f"n={n} is too small for min_group={trim.min_group}"
            )
        order = np.argsort(x, kind="stable")
        xs = x[order]
        # a threshold sits at the last element of each run of equal values
        run_end = np.flatnonzero(np.append(xs[1:] != xs[:-1], True))
        n1 = run_end + 1
        lo, hi = trim.bounds(n)
        keep = (n1 >= lo) & (n1 <= hi)
        if not np.any(keep):
            raise NoAdmissibleThresholdError(
                f"no admissible threshold for n={n} under {trim}"
            )
        n1 = n1[keep]
        return cls(order=order, thresholds=xs[n1 - 1], n1=n1, n=n)

    @property
    def n2(self) -> np.ndarray:
        return self.n - self.n1


@dataclass(frozen=True)
class ScanResult:
    """Per-threshold ``|T|`` and the maximal statistic.

    ``df`` is the reference degrees of freedom at the maximizing split for the
    t-type statistics (``n - 2`` for pooled, Welch-Satterthwaite for Welch)
    and NaN otherwise.
    """

    kind: StatKind
    thresholds: np.ndarray
    stats: np.ndarray
    split_sizes: np.ndarray
    n: int
    max_stat: float
    argmax_threshold: float
    argmax_n1: int
    df: float = math.nan
    signed_stat: float = field(default=math.nan, compare=False)


def check_outcome(y, kind: StatKind) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise InputError("outcome must be a 1-D vector")
    if not np.all(np.isfinite(y)):
        raise InputError("outcome contains non-finite values")
    if kind is StatKind.CHI_SQUARE and not np.all((y == 0.0) | (y == 1.0)):
        raise InputError("chi-square statistic requires a binary 0/1 outcome")
    return y


class _Kernel:
    """Evaluates ``|T|`` at every admissible split for a batch of outcomes.

    ``prepare`` turns the original outcome into the values that get permuted
    (ranks for Mann-Whitney); ``signed`` maps a ``(B, n)`` batch already in
    ``x`` order to signed statistics of shape ``(B, K)``.
    """

    def __init__(self, y: np.ndarray, layout: SplitLayout):
        self.layout = layout
        self.n1 = layout.n1.astype(float)
        self.n2 = layout.n2.astype(float)
        self.idx = layout.n1 - 1

    def prepare(self, y: np.ndarray) -> np.ndarray:
        return y

    def signed(self, batch: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def abs_stats(self, batch: np.ndarray) -> np.ndarray:
        return np.abs(self.signed(batch))

    def maxima(self, batch: np.ndarray) -> np.ndarray:
        return self.abs_stats(batch).max(axis=1)


class _MomentKernel(_Kernel):
    def __init__(self, y, layout):
        super().__init__(y, layout)
        self.center = float(np.mean(y))
        yc = y - self.center
        self.total = float(np.sum(yc))
        self.total_sq = float(np.sum(yc * yc))

    def prepare(self, y):
        return y - self.center

    def _sums(self, batch):
        s1 = np.cumsum(batch, axis=1)[:, self.idx]
        q1 = np.cumsum(batch * batch, axis=1)[:, self.idx]
        return s1, q1


class _PooledKernel(_MomentKernel):
    def signed(self, batch):
        n1, n2, n = self.n1, self.n2, float(self.layout.n)
        s1, q1 = self._sums(batch)
        s2 = self.total - s1
        diff = s1 / n1 - s2 / n2
        within = self.total_sq - s1 * s1 / n1 - s2 * s2 / n2
        scale = _ZERO_VAR_RTOL * self.total_sq
        ok = (within > scale) & (n1 >= 2) & (n2 >= 2)
        denom = np.sqrt(np.where(ok, within, 1.0) / (n - 2) * (1.0 / n1 + 1.0 / n2))
        return np.where(ok, diff / denom, 0.0)


class _WelchKernel(_MomentKernel):
    def signed(self, batch):
        n1, n2 = self.n1, self.n2
        s1, q1 = self._sums(batch)
        s2 = self.total - s1
        ss1 = np.maximum(q1 - s1 * s1 / n1, 0.0)
        ss2 = np.maximum(self.total_sq - q1 - s2 * s2 / n2, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            se2 = ss1 / (n1 - 1) / n1 + ss2 / (n2 - 1) / n2
        scale = _ZERO_VAR_RTOL * self.total_sq / self.layout.n
        ok = (n1 >= 2) & (n2 >= 2) & (se2 > scale)
        diff = s1 / n1 - s2 / n2
        return np.where(ok, diff / np.sqrt(np.where(ok, se2, 1.0)), 0.0)


class _RankKernel(_Kernel):
    """Mann-Whitney z; the permuted values are midranks of the original y."""

    def __init__(self, y, layout):
        super().__init__(y, layout)
        n = layout.n
        n1, n2 = self.n1, self.n2
        var = n1 * n2 / 12.0 * ((n + 1) - tie_term(tie_sizes(y)) / (n * (n - 1)))
        self.ok = var > 0.0
        self.sd = np.sqrt(np.where(self.ok, var, 1.0))
        self.offset = n1 * (n1 + 1) / 2.0 + n1 * n2 / 2.0

    def prepare(self, y):
        return midranks(y)

    def signed(self, batch):
        r1 = np.cumsum(batch, axis=1)[:, self.idx]
        return np.where(self.ok, (r1 - self.offset) / self.sd, 0.0)


class _ChiSquareKernel(_Kernel):
    def __init__(self, y, layout):
        super().__init__(y, layout)
        n = float(layout.n)
        self.ones = float(np.sum(y))
        zeros = n - self.ones
        self.degenerate = self.ones == 0.0 or zeros == 0.0
        self.denom = zeros * self.ones * self.n1 * self.n2

    def signed(self, batch):
        if self.degenerate:
            return np.zeros((batch.shape[0], self.n1.size))
        a = np.cumsum(batch, axis=1)[:, self.idx]
        n = float(self.layout.n)
        det = self.n1 * self.ones - n * a
        return n * det * det / self.denom


_KERNELS = {
    StatKind.POOLED_T: _PooledKernel,
    StatKind.WELCH_T: _WelchKernel,
    StatKind.MANN_WHITNEY: _RankKernel,
    StatKind.CHI_SQUARE: _ChiSquareKernel,
}


def make_kernel(y: np.ndarray, layout: SplitLayout, kind: StatKind) -> _Kernel:
    return _KERNELS[kind](y, layout)


def candidate_thresholds(x, trim: TrimPolicy = TrimPolicy()) -> np.ndarray:
    """Sorted observed values ``c`` whose split ``{x <= c}`` is admissible."""
    return SplitLayout.from_x(x, trim).thresholds


def _welch_df(y_sorted: np.ndarray, n1: int) -> float:
    a, b = y_sorted[:n1], y_sorted[n1:]
    if a.size < 2 or b.size < 2:
        return math.nan
    va, vb = np.var(a, ddof=1) / a.size, np.var(b, ddof=1) / b.size
    if va + vb == 0.0:
        return math.nan
    return float((va + vb) ** 2 / (va**2 / (a.size - 1) + vb**2 / (b.size - 1)))


def max_scan(
    y,
    x,
    kind: StatKind | str = StatKind.MANN_WHITNEY,
    trim: TrimPolicy = TrimPolicy(),
    layout: SplitLayout | None = None,
) -> ScanResult:
    """Maximal ``|T|`` over all admissible thresholds of ``x``.

    Ties in the maximum go to the smallest threshold.  Degenerate splits
    (too small, zero variance) contribute 0.
    """
    kind = StatKind.parse(kind)
    y = check_outcome(y, kind)
    if layout is None:
        layout = SplitLayout.from_x(x, trim)
    if y.size != layout.n:
        raise InputError(f"outcome has length {y.size}, feature has length {layout.n}")
    kernel = make_kernel(y, layout, kind)
    row = kernel.prepare(y)[layout.order][None, :]
    signed = kernel.signed(row)[0]
    stats = np.abs(signed)
    j = int(np.argmax(stats))
    n1 = int(layout.n1[j])
    if kind is StatKind.POOLED_T:
        df = float(layout.n - 2)
    elif kind is StatKind.WELCH_T:
        df = _welch_df(y[layout.order], n1)
    else:
        df = math.nan
    return ScanResult(
        kind=kind,
        thresholds=layout.thresholds,
        stats=stats,
        split_sizes=layout.n1,
        n=layout.n,
        max_stat=float(stats[j]),
        argmax_threshold=float(layout.thresholds[j]),
        argmax_n1=n1,
        df=df,
        signed_stat=float(signed[j]),
    )
