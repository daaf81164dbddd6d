"""Model-based comparator tests of a zero slope.

Simple regression of ``y`` on an intercept and one feature, fitted directly
with numpy so that thousands of replicates stay cheap.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from maxperm.errors import FitError, InputError, SeparationWarning

__all__ = ["HC", "RegFit", "ols_slope_test", "sandwich_slope_test", "logistic_wald_test"]

_LEVERAGE_CAP = 1.0 - 1e-8
# |beta1 * sd(x)| beyond this means fitted odds change by more than e^30 per
# standard deviation of x: treated as separation, not a finite MLE.
_DIVERGENCE_GUARD = 30.0


class HC(enum.Enum):
    HC1 = "hc1"
    HC3 = "hc3"


@dataclass(frozen=True)
class RegFit:
    beta0: float
    beta1: float
    se_beta1: float
    test_stat: float
    p_value: float
    converged: bool = True
    iterations: int = 0
    flag: str | None = None


def _design(y, x) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if y.ndim != 1 or y.shape != x.shape:
        raise InputError("y and x must be 1-D vectors of equal length")
    if y.size < 3:
        raise InputError("need at least 3 observations")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
        raise InputError("non-finite values in y or x")
    if np.ptp(x) == 0.0:
        raise FitError("feature is constant; slope is not identifiable")
    return y, x


def _ols(y, x):
    X = np.column_stack([np.ones_like(x), x])
    xtx_inv = np.linalg.inv(X.T @ X)
    beta = xtx_inv @ (X.T @ y)
    resid = y - X @ beta
    return X, xtx_inv, beta, resid


def _t_result(beta, se, df, flag=None) -> RegFit:
    if se > 0.0:
        t = beta[1] / se
        p = 2.0 * stats.t.sf(abs(t), df)
    else:
        # exact fit: any nonzero slope is infinitely significant
        t = math.copysign(math.inf, beta[1]) if beta[1] != 0 else 0.0
        p = 0.0 if beta[1] != 0 else 1.0
        flag = flag or "perfect-fit"
    return RegFit(float(beta[0]), float(beta[1]), float(se), float(t), float(p), flag=flag)


def ols_slope_test(y, x) -> RegFit:
    """Classical least-squares t test of ``H0: beta1 = 0`` (n - 2 df)."""
    y, x = _design(y, x)
    n = y.size
    _, xtx_inv, beta, resid = _ols(y, x)
    rss = float(resid @ resid)
    # residuals of an exact fit are round-off
    if rss <= 1e-28 * max(float(y @ y), 1.0) * n:
        rss = 0.0
    sigma2 = rss / (n - 2)
    se = math.sqrt(sigma2 * xtx_inv[1, 1])
    return _t_result(beta, se, n - 2)


def sandwich_slope_test(y, x, hc: HC | str = HC.HC3) -> RegFit:
    """Slope t test with a heteroscedasticity-consistent standard error.

    HC1 scales the White meat by ``n / (n - 2)``; HC3 divides each squared
    residual by ``(1 - h_ii)**2``.  Leverages of 1 are capped just below 1
    and flagged.
    """
    hc = HC(hc) if not isinstance(hc, HC) else hc
    y, x = _design(y, x)
    n = y.size
    X, xtx_inv, beta, resid = _ols(y, x)
    flag = None
    if hc is HC.HC1:
        w = resid**2 * (n / (n - 2))
    else:
        h = np.einsum("ij,jk,ik->i", X, xtx_inv, X)
        if np.any(h >= _LEVERAGE_CAP):
            flag = "leverage-capped"
        h = np.minimum(h, _LEVERAGE_CAP)
        w = resid**2 / (1.0 - h) ** 2
    meat = (X * w[:, None]).T @ X
    cov = xtx_inv @ meat @ xtx_inv
    se = math.sqrt(max(cov[1, 1], 0.0))
    return _t_result(beta, se, n - 2, flag)


def logistic_wald_test(y, x, max_iter: int = 50, tol: float = 1e-8) -> RegFit:
    """Wald test of the slope in ``logit P(y=1) = b0 + b1 x``, fitted by IRLS.

    Separation (or failure to converge) is reported with ``converged=False``
    and ``p_value = 1`` instead of a meaningless Wald statistic.
    """
    y = np.asarray(y, dtype=float)
    y, x = _design(y, x)
    if not np.all((y == 0.0) | (y == 1.0)):
        raise InputError("logistic regression needs a 0/1 outcome")
    if y.min() == y.max():
        raise FitError("only one outcome class present")
    X = np.column_stack([np.ones_like(x), x])
    beta = np.zeros(2)
    sd_x = float(np.std(x))
    converged = False
    it = 0
    info = None
    for it in range(1, max_iter + 1):
        eta = X @ beta
        mu = 1.0 / (1.0 + np.exp(-eta))
        w = mu * (1.0 - mu)
        info = (X * w[:, None]).T @ X
        score = X.T @ (y - mu)
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            break
        beta = beta + step
        if abs(beta[1]) * sd_x > _DIVERGENCE_GUARD:
            break
        if np.max(np.abs(step)) <= tol:
            converged = True
            break
    if converged:
        mu = 1.0 / (1.0 + np.exp(-(X @ beta)))
        w = mu * (1.0 - mu)
        info = (X * w[:, None]).T @ X
        try:
            cov = np.linalg.inv(info)
        except np.linalg.LinAlgError:
            converged = False
    if not converged:
        warnings.warn("logistic fit did not converge (separation?)", SeparationWarning, stacklevel=2)
        return RegFit(float(beta[0]), float(beta[1]), math.nan, math.nan, 1.0, False, it, "separation")
    se = math.sqrt(cov[1, 1])
    z = beta[1] / se
    p = 2.0 * stats.norm.sf(abs(z))
    return RegFit(float(beta[0]), float(beta[1]), float(se), float(z), float(p), True, it)
