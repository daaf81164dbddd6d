"""Sample distance covariance and distance correlation for scalar variables.

Uses the original (biased, V-statistic) definition: double-centred
absolute-difference matrices averaged over all ``n**2`` pairs.  Time and
memory are O(n**2) per pair of variables; at n = 400 that is a 400 x 400
matrix per call, and screening reuses the outcome's centred matrix across
features.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from maxperm.errors import InputError

__all__ = ["DCorResult", "distance_correlation", "centered_distances", "dcor_from_centered"]


@dataclass(frozen=True)
class DCorResult:
    dcov_sq: float
    dvar_x: float
    dvar_y: float
    dcor: float
    constant: bool = False


def centered_distances(v) -> np.ndarray:
    """Double-centred matrix of ``|v_j - v_k|``."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise InputError("distance correlation needs a 1-D vector with n >= 2")
    if not np.all(np.isfinite(v)):
        raise InputError("vector contains non-finite values")
    a = np.abs(v[:, None] - v[None, :])
    row = a.mean(axis=1)
    return a - row[:, None] - row[None, :] + row.mean()


def dcor_from_centered(a: np.ndarray, b: np.ndarray) -> DCorResult:
    n2 = float(a.shape[0]) ** 2
    dcov_sq = max(float(np.vdot(a, b)) / n2, 0.0)
    dvar_x = float(np.vdot(a, a)) / n2
    dvar_y = float(np.vdot(b, b)) / n2
    sa, sb = float(np.max(np.abs(a))), float(np.max(np.abs(b)))
    if sa == 0.0 or sb == 0.0:
        return DCorResult(dcov_sq, dvar_x, dvar_y, 0.0, constant=True)
    # dcor is scale-free; rescaling keeps tiny distances from underflowing when squared
    a, b = a / sa, b / sb
    r2 = max(float(np.vdot(a, b)), 0.0) / math.sqrt(float(np.vdot(a, a)) * float(np.vdot(b, b)))
    return DCorResult(dcov_sq, dvar_x, dvar_y, min(math.sqrt(r2), 1.0))


def distance_correlation(x, y) -> DCorResult:
    """Distance correlation of two equal-length samples.

    A constant input gives ``dcor = 0`` with ``constant=True`` rather than an
    error.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise InputError(f"length mismatch: {x.shape} vs {y.shape}")
    return dcor_from_centered(centered_distances(x), centered_distances(y))
