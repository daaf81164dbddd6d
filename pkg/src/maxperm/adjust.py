"""Analytic p-value corrections for a maximally selected statistic.

These are the classical comparators to the permutation p-value:

* unadjusted minimum-p (reference null of a single split),
* Miller & Siegmund (1982) asymptotic approximation for the maximal
  chi-square,
* Altman et al. (1994) small-p approximation,
* Lausen & Schumacher (1996) improved Bonferroni bound using adjacent-split
  correlations.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from maxperm.errors import ConfigError
from maxperm.scan import ScanResult
from maxperm.stats import StatKind

__all__ = [
    "Method",
    "AdjustedP",
    "ALTMAN_COEFFICIENTS",
    "unadjusted_min_p",
    "miller_siegmund",
    "altman",
    "modified_bonferroni",
    "normal_scores",
    "adjacent_correlations",
    "bivariate_upper_tail",
    "benjamini_hochberg",
]


class Method(enum.Enum):
    UNADJUSTED = "unadjusted"
    MILLER_SIEGMUND = "miller-siegmund"
    ALTMAN = "altman"
    MODIFIED_BONFERRONI = "modified-bonferroni"


@dataclass(frozen=True)
class AdjustedP:
    method: Method
    p: float
    raw: float

    @classmethod
    def clamped(cls, method: Method, raw: float) -> AdjustedP:
        return cls(method, min(max(raw, 0.0), 1.0), raw)


# Altman, Lausen, Sauerbrei & Schumacher (1994), J. Natl Cancer Inst. 86:829-835:
# p_cor = c1 * p_min * (1 + c2 * ln p_min), stated for 1e-4 <= p_min <= 0.1,
# with cutpoints restricted to the central (1 - 2*eps) proportion of x.
ALTMAN_COEFFICIENTS = {
    0.05: (-3.13, 1.65),
    0.10: (-1.63, 2.35),
}
ALTMAN_RANGE = (1e-4, 0.1)

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def unadjusted_min_p(scan: ScanResult, kind: StatKind | None = None, df: float | None = None) -> AdjustedP:
    """Single-split tail probability of the maximal statistic.

    Chi-square uses chi2(1); Mann-Whitney z a two-sided normal; the t-type
    statistics a two-sided Student t with ``df`` (default: ``scan.df``).
    """
    kind = scan.kind if kind is None else StatKind.parse(kind)
    t = scan.max_stat
    if kind is StatKind.CHI_SQUARE:
        p = stats.chi2.sf(t, 1)
    elif kind is StatKind.MANN_WHITNEY:
        p = 2.0 * stats.norm.sf(t)
    else:
        df = scan.df if df is None else df
        if not df > 0:
            df = scan.n - 2
        p = 2.0 * stats.t.sf(t, df)
    return AdjustedP.clamped(Method.UNADJUSTED, float(p))


def _ms_log_factor(eps_low: float, eps_high: float) -> float:
    return math.log((1.0 - eps_low) * eps_high / (eps_low * (1.0 - eps_high)))


def miller_siegmund(max_chi_sq: float, eps_low: float = 0.1, eps_high: float = 0.9) -> AdjustedP:
    """Miller-Siegmund approximation to ``P(max chi2 >= max_chi_sq)``.

    ``eps_low``/``eps_high`` are the quantiles of ``x`` bounding the
    cutpoint range (``eps`` and ``1 - eps`` for symmetric trimming).  The
    approximation needs ``b = sqrt(max_chi_sq) > 1``; below that p = 1.
    """
    if not 0.0 < eps_low <= eps_high < 1.0:
        raise ConfigError(f"need 0 < eps_low <= eps_high < 1, got {eps_low}, {eps_high}")
    if not max_chi_sq > 1.0:
        return AdjustedP(Method.MILLER_SIEGMUND, 1.0, math.nan)
    b = math.sqrt(max_chi_sq)
    phi = stats.norm.pdf(b)
    raw = phi * (b - 1.0 / b) * _ms_log_factor(eps_low, eps_high) + 4.0 * phi / b
    return AdjustedP.clamped(Method.MILLER_SIEGMUND, float(raw))


def altman(p_min: float, eps: float = 0.1) -> AdjustedP:
    """Altman et al. correction of a minimum p-value.

    Outside the stated validity range of ``p_min`` the Miller-Siegmund value
    at the equivalent chi-square is returned instead.
    """
    key = round(eps, 6)
    if key not in ALTMAN_COEFFICIENTS:
        raise ConfigError(f"Altman coefficients exist for eps in {sorted(ALTMAN_COEFFICIENTS)}, got {eps}")
    if not 0.0 < p_min < 1.0:
        if p_min >= 1.0:
            return AdjustedP(Method.ALTMAN, 1.0, 1.0)
        p_min = np.nextafter(0.0, 1.0)
    lo, hi = ALTMAN_RANGE
    if lo <= p_min <= hi:
        c1, c2 = ALTMAN_COEFFICIENTS[key]
        raw = c1 * p_min * (1.0 + c2 * math.log(p_min))
        return AdjustedP.clamped(Method.ALTMAN, raw)
    ms = miller_siegmund(float(stats.chi2.isf(p_min, 1)), eps, 1.0 - eps)
    return AdjustedP(Method.ALTMAN, ms.p, ms.raw)


def normal_scores(scan: ScanResult) -> np.ndarray:
    """Per-split statistics on the standard-normal scale."""
    if scan.kind is StatKind.CHI_SQUARE:
        return np.sqrt(scan.stats)
    return np.asarray(scan.stats, dtype=float)


def adjacent_correlations(split_sizes, n: int) -> np.ndarray:
    """Null correlation of the statistics at consecutive thresholds."""
    m = np.asarray(split_sizes, dtype=float)
    a, b = m[:-1], m[1:]
    return np.sqrt(a * (n - b) / (b * (n - a)))


def bivariate_upper_tail(b: float, r: float) -> float:
    """``P(Z1 > b, Z2 > b)`` for standard bivariate normal with correlation r.

    Integrates ``phi(z) * P(Z2 > b | Z1 = z)`` over ``z > b``.
    """
    if r >= 1.0 - 1e-12:
        return float(stats.norm.sf(b))
    if r <= -1.0 + 1e-12:
        return float(max(stats.norm.cdf(-b) - stats.norm.cdf(b), 0.0))
    c = 1.0 / math.sqrt(2.0 * (1.0 - r * r))

    def integrand(z):
        return _INV_SQRT_2PI * math.exp(-0.5 * z * z) * 0.5 * math.erfc((b - r * z) * c)

    val, _ = integrate.quad(integrand, b, np.inf, epsabs=1e-8, epsrel=1e-8, limit=200)
    return float(val)


def _pair_exceedance(b: float, r: float) -> float:
    # P(|Z1| > b, |Z2| > b): same-sign corners have correlation r,
    # opposite-sign corners correlation -r
    return 2.0 * (bivariate_upper_tail(b, r) + bivariate_upper_tail(b, -r))


def modified_bonferroni(scan: ScanResult, split_sizes=None) -> AdjustedP:
    """Improved Bonferroni bound of Lausen & Schumacher at ``b = max score``.

    ``sum_j P(|Z| > b) - sum_j P(|Z_j| > b, |Z_{j+1}| > b)`` with adjacent
    correlations from the group-1 sizes of consecutive thresholds.
    """
    sizes = scan.split_sizes if split_sizes is None else np.asarray(split_sizes)
    z = normal_scores(scan)
    b = float(np.max(z))
    if b <= 0.0:
        return AdjustedP(Method.MODIFIED_BONFERRONI, 1.0, float(len(z)))
    marginal = 2.0 * stats.norm.sf(b)
    raw = len(z) * marginal
    for r in adjacent_correlations(sizes, scan.n):
        raw -= _pair_exceedance(b, float(r))
    return AdjustedP.clamped(Method.MODIFIED_BONFERRONI, float(raw))


def benjamini_hochberg(pvalues) -> np.ndarray:
    """Benjamini-Hochberg step-up adjusted p-values, in input order."""
    p = np.asarray(pvalues, dtype=float)
    if p.ndim != 1:
        raise ConfigError("p-values must be a 1-D sequence")
    if p.size == 0:
        return p.copy()
    if np.any(~np.isfinite(p)) or np.any((p < 0.0) | (p > 1.0)):
        raise ConfigError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    # running minimum from the largest p-value down
    adj_sorted = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(adj_sorted, 1.0)
    return out
