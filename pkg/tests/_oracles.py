"""Independent reference computations shared by several test modules."""

from __future__ import annotations

import math

import numpy as np


def max_chi_square_null(n: int, reps: int, eps: float = 0.1, min_group: int = 5, seed: int = 0) -> np.ndarray:
    """Monte Carlo null of the maximal 2x2 chi-square over cutpoints.

    Outcomes are Bernoulli(1/2) in the order of a tie-free feature, so the
    split after position ``n1`` has ``n1`` observations on the left.  The
    chi-square comes from cumulative counts, not from the package.
    """
    rng = np.random.default_rng(seed)
    k = math.floor(eps * n + 1e-9)
    lo, hi = max(k + 1, min_group), min(n - k - 1, n - min_group)
    n1 = np.arange(lo, hi + 1, dtype=float)[None, :]
    out = np.empty(reps)
    for s in range(0, reps, 2000):
        m = min(2000, reps - s)
        y = (rng.uniform(size=(m, n)) < 0.5).astype(float)
        ones = y.sum(axis=1, keepdims=True)
        a = np.cumsum(y, axis=1)[:, lo - 1 : hi]
        with np.errstate(divide="ignore", invalid="ignore"):
            chi = n * (n * a - n1 * ones) ** 2 / ((n - ones) * ones * n1 * (n - n1))
        out[s : s + m] = np.nan_to_num(chi).max(axis=1)
    return out
