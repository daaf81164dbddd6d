"""Permutation distribution of the maximal statistic.

The outcome is permuted, the feature (and therefore the split layout) stays
fixed.  Permutation ``b`` is drawn from its own RNG stream derived from
``(seed, b)``, and permutations are processed in fixed-size chunks, so the
null sample does not depend on how many workers evaluate it.

For Mann-Whitney the midranks of the permuted outcome are the permuted
midranks of the original outcome, so ranks are computed once and only rank
labels are shuffled (:func:`mw_fast_path`).
"""

from __future__ import annotations

import enum
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from maxperm.errors import InputError, PlanError
from maxperm.scan import (
    ScanResult,
    SplitLayout,
    TrimPolicy,
    check_outcome,
    make_kernel,
    max_scan,
)
from maxperm.stats import StatKind, midranks

__all__ = [
    "PermMode",
    "PermPlan",
    "PermResult",
    "draw_permutation",
    "permutation_rng",
    "permutation_test",
    "mw_fast_path",
    "p_value_from_null",
]

_CHUNK = 128
# Relative slack for ">=" against the observed maximum.  Statistics that are
# mathematically equal can differ in the last bits when the same group sums
# are accumulated in a different order.
_GEQ_RTOL = 1e-10


class PermMode(enum.Enum):
    MONTE_CARLO = "monte_carlo"
    EXHAUSTIVE = "exhaustive"


@dataclass(frozen=True)
class PermPlan:
    """How the permutation null is built.

    Attributes:
        B: Number of random permutations (Monte Carlo mode).
        seed: Master seed; permutation ``b`` uses the stream ``(seed, b)``.
        mode: Monte Carlo sampling or full enumeration of all ``n!`` orders.
        exhaustive_cap: Largest ``n!`` allowed in exhaustive mode.
    """

    B: int = 1000
    seed: int = 0
    mode: PermMode = PermMode.MONTE_CARLO
    exhaustive_cap: int = 40320

    def __post_init__(self):
        object.__setattr__(self, "mode", PermMode(self.mode))
        if self.mode is PermMode.MONTE_CARLO and self.B < 1:
            raise PlanError(f"B must be >= 1, got {self.B}")
        if not 0 <= int(self.seed) < 2**64:
            raise PlanError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class PermResult:
    t_obs: float
    null_sample: np.ndarray
    p_value: float
    b_geq: int
    mode: PermMode
    scan: ScanResult | None = None


def permutation_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for permutation ``index`` under master ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))


def draw_permutation(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random permutation of ``0..n-1`` (Fisher-Yates inside numpy)."""
    if n < 1:
        raise InputError("n must be >= 1")
    return rng.permutation(n)


def p_value_from_null(t_obs: float, null: np.ndarray, mode: PermMode) -> tuple[float, int]:
    """Tail probability of ``t_obs``; add-one rule in Monte Carlo mode."""
    cutoff = t_obs - _GEQ_RTOL * max(abs(t_obs), 1.0)
    b_geq = int(np.count_nonzero(null >= cutoff))
    if mode is PermMode.EXHAUSTIVE:
        return b_geq / null.size, b_geq
    return (1 + b_geq) / (null.size + 1), b_geq


def _chunk_maxima(kernel, values, order, seed, start, stop, rerank):
    n = values.size
    perms = np.empty((stop - start, n), dtype=np.intp)
    for row, b in enumerate(range(start, stop)):
        perms[row] = draw_permutation(n, permutation_rng(seed, b))
    # permuted outcomes go straight into x-sorted positions: a uniform
    # relabelling either way, and the null sample then depends only on y and
    # the split sizes (features with the same layout shape share a null)
    batch = values[perms]
    if rerank:
        batch = np.stack([midranks(r) for r in batch])
    return kernel.maxima(batch)


def _monte_carlo_null(kernel, values, order, plan, workers, rerank=False):
    bounds = [(s, min(s + _CHUNK, plan.B)) for s in range(0, plan.B, _CHUNK)]
    run = lambda se: _chunk_maxima(kernel, values, order, plan.seed, se[0], se[1], rerank)  # noqa: E731
    if workers is None or workers <= 1 or len(bounds) == 1:
        parts = [run(se) for se in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, bounds))
    return np.concatenate(parts)


def _exhaustive_null(kernel, values, order, plan, rerank=False):
    n = values.size
    if math.factorial(n) > plan.exhaustive_cap:
        raise PlanError(
            f"exhaustive mode needs n! <= {plan.exhaustive_cap}, got n={n} (n!={math.factorial(n)})"
        )
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    out = []
    for s in range(0, perms.shape[0], 4096):
        batch = values[perms[s : s + 4096]]
        if rerank:
            batch = np.stack([midranks(r) for r in batch])
        out.append(kernel.maxima(batch))
    return np.concatenate(out)


def _run(y, layout, kind, plan, workers, values, rerank=False):
    kernel = make_kernel(y, layout, kind)
    observed = max_scan(y, None, kind, layout=layout)
    if plan.mode is PermMode.EXHAUSTIVE:
        null = _exhaustive_null(kernel, values, layout.order, plan, rerank)
    else:
        null = _monte_carlo_null(kernel, values, layout.order, plan, workers, rerank)
    # observed value through the same kernel path as the null sample
    row = values[layout.order]
    if rerank:
        row = midranks(row)
    t_obs = float(kernel.maxima(row[None, :])[0])
    p, b_geq = p_value_from_null(t_obs, null, plan.mode)
    return PermResult(t_obs=t_obs, null_sample=null, p_value=p, b_geq=b_geq, mode=plan.mode, scan=observed)


def permutation_test(
    y,
    x,
    kind: StatKind | str = StatKind.MANN_WHITNEY,
    trim: TrimPolicy = TrimPolicy(),
    plan: PermPlan = PermPlan(),
    workers: int = 1,
    layout: SplitLayout | None = None,
    reuse_ranks: bool = True,
) -> PermResult:
    """Maximal permutation test of association between ``y`` and ``x``.

    Args:
        y: Outcome vector (0/1 for the chi-square statistic).
        x: Feature vector; only its ordering matters.
        kind: Two-group statistic evaluated at each threshold.
        trim: Admissible-split policy.
        plan: Number of permutations, seed and mode.
        workers: Threads evaluating permutation chunks.  Results do not
            depend on this value.
        layout: Precomputed split layout of ``x`` (``x`` is then ignored).
        reuse_ranks: For Mann-Whitney, rank once and permute ranks.  With
            ``False`` every permuted outcome is re-ranked from scratch; the
            result is identical and only useful as a check.

    Returns:
        :class:`PermResult` with the observed maximum, the null sample and
        the p-value (``(1 + b_geq) / (B + 1)`` in Monte Carlo mode,
        ``b_geq / n!`` when exhaustive).
    """
    kind = StatKind.parse(kind)
    y = check_outcome(y, kind)
    if layout is None:
        layout = SplitLayout.from_x(x, trim)
    if y.size != layout.n:
        raise InputError(f"outcome has length {y.size}, feature has length {layout.n}")
    if kind is StatKind.MANN_WHITNEY:
        if reuse_ranks:
            return mw_fast_path(midranks(y), layout, plan, workers=workers, y=y)
        return _run(y, layout, kind, plan, workers, y, rerank=True)
    kernel_values = make_kernel(y, layout, kind).prepare(y)
    return _run(y, layout, kind, plan, workers, kernel_values)


def mw_fast_path(
    ranks,
    layout: SplitLayout,
    plan: PermPlan = PermPlan(),
    workers: int = 1,
    y=None,
) -> PermResult:
    """Mann-Whitney maximal permutation test on precomputed midranks.

    ``ranks`` must be the midranks of the original outcome; they are
    permutation-equivariant, so permuting them is the same as ranking each
    permuted outcome.  ``y`` is only used to attach the observed scan; the
    ranks carry the same tie structure and are used when it is omitted.
    """
    ranks = np.asarray(ranks, dtype=float)
    if ranks.size != layout.n:
        raise InputError(f"got {ranks.size} ranks for a layout of size {layout.n}")
    source = ranks if y is None else np.asarray(y, dtype=float)
    return _run(source, layout, StatKind.MANN_WHITNEY, plan, workers, ranks)
