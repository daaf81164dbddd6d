"""Seeded data-generating models for the size, power and screening studies.

Every generator is a pure function of its :class:`GenConfig` (seed
included).  Single-feature families draw ``x ~ Uniform(x_low, x_high)``
(default ``Uniform(0, 4)``); the sparse additive model draws an ``n x p``
matrix of ``Uniform(0, 1)`` features.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from maxperm.errors import ConfigError, InputError

__all__ = [
    "Family",
    "GenConfig",
    "Dataset",
    "generate",
    "gen_logistic",
    "gen_linear",
    "gen_quadratic",
    "gen_bspline",
    "gen_ald",
    "gen_sparse_additive",
    "bspline_knots",
    "bspline_basis",
    "sparse_components",
    "DEFAULT_BSPLINE_SHAPE",
]


class Family(enum.Enum):
    LOGISTIC_LINEAR = "logistic_linear"
    LOGISTIC_QUADRATIC = "logistic_quadratic"
    LINEAR_NORMAL = "linear_normal"
    HETEROSCEDASTIC = "heteroscedastic"
    QUADRATIC_REG = "quadratic_reg"
    BSPLINE_NP = "bspline_np"
    CONTAMINATED = "contaminated"
    T_ERRORS = "t_errors"
    ALD_QUANTILE = "ald_quantile"
    SPARSE_ADDITIVE = "sparse_additive"

    @property
    def binary(self) -> bool:
        return self in (Family.LOGISTIC_LINEAR, Family.LOGISTIC_QUADRATIC)


# Cubic spline coefficients, symmetric about x = 2 so that the mean function
# has no linear trend in x over Uniform(0, 4): high at both ends, a dip in
# the middle and two shoulders in between.
DEFAULT_BSPLINE_SHAPE = (1.5, 1.5, 0.0, -1.0, -1.0, 0.5, 0.5, -1.0, -1.0, 0.0, 1.5, 1.5)
_SPARSE_BASE = (5.0, 3.0, 4.0, 6.0)
_DEFAULT_N = {Family.LOGISTIC_LINEAR: 100, Family.LOGISTIC_QUADRATIC: 100, Family.SPARSE_ADDITIVE: 400}


@dataclass(frozen=True)
class GenConfig:
    """Full description of one data-generating model.

    Attributes:
        family: Which model.
        n: Sample size (family default when ``None``).
        beta: Association coefficients.  One slope for single-feature
            families, spline coefficients for ``bspline_np`` and
            ``(b1, b2, b3, b4)`` for ``sparse_additive``.  A single value
            for either of the latter two scales its base pattern.
        beta0: Intercept.
        sigma: Error scale.
        seed: Seed of the generator's RNG.
        x_low, x_high: Support of the uniform feature distribution.
        df: Degrees of freedom of t errors.
        quantile: Quantile level of the asymmetric-Laplace model.
        p: Number of features (sparse additive model).
        noise_var: Error variance (sparse additive model).
        interior_knots: Uniform interior knots of the cubic spline.
        contamination: ``(prob_large, var_small, var_large)`` of the
            outlier mixture.
    """

    family: Family
    n: int | None = None
    beta: tuple[float, ...] = (0.0,)
    beta0: float = 0.0
    sigma: float = 1.0
    seed: int = 0
    x_low: float = 0.0
    x_high: float = 4.0
    df: float = 1.0
    quantile: float = 0.5
    p: int = 100
    noise_var: float = 1.74
    interior_knots: int = 8
    contamination: tuple[float, float, float] = (0.1, 1.0, 100.0)
    shape: tuple[float, ...] | None = field(default=None, compare=True)

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.n is None:
            object.__setattr__(self, "n", _DEFAULT_N.get(self.family, 50))
        object.__setattr__(self, "beta", tuple(float(b) for b in np.atleast_1d(self.beta)))
        if self.family is Family.SPARSE_ADDITIVE and len(self.beta) == 1:
            # a single value scales the base coefficient pattern
            base = self.shape or _SPARSE_BASE
            object.__setattr__(self, "beta", tuple(self.beta[0] * b for b in base))
        if self.shape is not None:
            object.__setattr__(self, "shape", tuple(float(b) for b in self.shape))
        self.validate()

    def validate(self) -> None:
        f = self.family
        if self.n < 2:
            raise ConfigError(f"n must be >= 2, got {self.n}")
        if not self.sigma > 0:
            raise ConfigError("sigma must be positive")
        if not self.x_high > self.x_low:
            raise ConfigError("x_high must exceed x_low")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if f is Family.T_ERRORS and not self.df > 0:
            raise ConfigError("t errors need df > 0")
        if f is Family.ALD_QUANTILE and not 0.0 < self.quantile < 1.0:
            raise ConfigError("quantile must lie in (0, 1)")
        if f is Family.HETEROSCEDASTIC and self.x_low < 0:
            raise ConfigError("heteroscedastic family needs x >= 0")
        if f is Family.CONTAMINATED:
            prob, v_small, v_large = self.contamination
            if not 0.0 <= prob <= 1.0 or v_small <= 0 or v_large <= 0:
                raise ConfigError("contamination needs a probability and two positive variances")
        if f is Family.SPARSE_ADDITIVE:
            if self.p < 4:
                raise ConfigError("sparse additive model needs p >= 4")
            if len(self.beta) != 4:
                raise ConfigError("sparse additive model needs 4 coefficients (or one scale)")
            if not self.noise_var > 0:
                raise ConfigError("noise_var must be positive")
        if f is Family.BSPLINE_NP and len(self.beta) not in (1, self.interior_knots + 4):
            raise ConfigError(
                f"bspline_np needs {self.interior_knots + 4} coefficients (or one scale), got {len(self.beta)}"
            )

    def with_seed(self, seed: int) -> GenConfig:
        return replace(self, seed=int(seed))

    def with_signal(self, s: float) -> GenConfig:
        """Copy with association strength ``s`` (0 gives the null model).

        Single-feature families get slope ``s``; spline and sparse models
        get ``s`` times their base coefficient pattern.
        """
        if self.family is Family.BSPLINE_NP:
            base = self.shape or DEFAULT_BSPLINE_SHAPE
        elif self.family is Family.SPARSE_ADDITIVE:
            base = self.shape or _SPARSE_BASE
        else:
            base = (1.0,)
        return replace(self, beta=tuple(s * b for b in base))

    @property
    def is_null(self) -> bool:
        return all(b == 0.0 for b in self.beta)


@dataclass(frozen=True)
class Dataset:
    y: np.ndarray
    x: np.ndarray
    config: GenConfig | None = None

    @property
    def n(self) -> int:
        return self.y.size


def _rng(cfg: GenConfig) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(cfg.seed)))


def _uniform_x(cfg: GenConfig, rng) -> np.ndarray:
    return rng.uniform(cfg.x_low, cfg.x_high, size=cfg.n)


def gen_logistic(cfg: GenConfig, quadratic: bool | None = None) -> Dataset:
    """Binary outcome with ``logit P(y=1) = b0 + b1 x`` (plus ``b1 x^2`` if quadratic).

    The quadratic model reuses the slope on the squared term.
    """
    if quadratic is None:
        quadratic = cfg.family is Family.LOGISTIC_QUADRATIC
    rng = _rng(cfg)
    x = _uniform_x(cfg, rng)
    b1 = cfg.beta[0]
    eta = cfg.beta0 + b1 * x + (b1 * x * x if quadratic else 0.0)
    prob = 1.0 / (1.0 + np.exp(-eta))
    y = (rng.uniform(size=cfg.n) < prob).astype(float)
    return Dataset(y, x, cfg)


def _errors(cfg: GenConfig, rng, x) -> np.ndarray:
    f, n, s = cfg.family, cfg.n, cfg.sigma
    if f is Family.HETEROSCEDASTIC:
        return s * np.sqrt(1.0 + x) * rng.standard_normal(n)
    if f is Family.CONTAMINATED:
        prob, v_small, v_large = cfg.contamination
        large = rng.uniform(size=n) < prob
        sd = np.where(large, math.sqrt(v_large), math.sqrt(v_small))
        return s * sd * rng.standard_normal(n)
    if f is Family.T_ERRORS:
        return s * rng.standard_t(cfg.df, size=n)
    return s * rng.standard_normal(n)


def gen_linear(cfg: GenConfig) -> Dataset:
    """``y = b0 + b1 x + e`` with the family's error law.

    Normal, heteroscedastic (sd ``sigma * sqrt(1 + x)``), contaminated
    normal (variance 1 w.p. 0.9, 100 w.p. 0.1) or scaled t errors.
    """
    rng = _rng(cfg)
    x = _uniform_x(cfg, rng)
    y = cfg.beta0 + cfg.beta[0] * x + _errors(cfg, rng, x)
    return Dataset(y, x, cfg)


def gen_quadratic(cfg: GenConfig) -> Dataset:
    rng = _rng(cfg)
    x = _uniform_x(cfg, rng)
    y = cfg.beta0 + cfg.beta[0] * (x - 2.0) ** 2 + cfg.sigma * rng.standard_normal(cfg.n)
    return Dataset(y, x, cfg)


def bspline_knots(low: float, high: float, interior: int, degree: int = 3) -> np.ndarray:
    """Clamped knot vector with ``interior`` uniform interior knots."""
    inner = np.linspace(low, high, interior + 2)
    return np.concatenate([np.full(degree, low), inner, np.full(degree, high)])


def bspline_basis(x, knots: np.ndarray, degree: int = 3) -> np.ndarray:
    """Evaluate all B-spline basis functions at ``x`` by Cox-de Boor recursion.

    Returns an ``(len(x), len(knots) - degree - 1)`` matrix.  Intervals are
    half-open except the last, which includes the right end of the support.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t = np.asarray(knots, dtype=float)
    lo, hi = t[degree], t[-degree - 1]
    if np.any(x < lo) or np.any(x > hi):
        raise InputError(f"x outside the spline support [{lo}, {hi}]")
    m = t.size - 1
    basis = np.zeros((x.size, m))
    for i in range(m):
        if t[i] < t[i + 1]:
            basis[:, i] = (x >= t[i]) & (x < t[i + 1])
    last = np.flatnonzero(t[:-1] < t[1:])[-1]
    basis[x == hi, last] = 1.0
    for d in range(1, degree + 1):
        nxt = np.zeros((x.size, m - d))
        for i in range(m - d):
            left = t[i + d] - t[i]
            right = t[i + d + 1] - t[i + 1]
            if left > 0:
                nxt[:, i] += (x - t[i]) / left * basis[:, i]
            if right > 0:
                nxt[:, i] += (t[i + d + 1] - x) / right * basis[:, i + 1]
        basis = nxt
    return basis


def gen_bspline(cfg: GenConfig) -> Dataset:
    """``y = sum_j beta_j B_j(x) + e`` on a cubic spline basis over the x support."""
    rng = _rng(cfg)
    x = _uniform_x(cfg, rng)
    knots = bspline_knots(cfg.x_low, cfg.x_high, cfg.interior_knots)
    coef = np.asarray(cfg.beta)
    if coef.size == 1:
        coef = coef[0] * np.asarray(cfg.shape or DEFAULT_BSPLINE_SHAPE)
    f = bspline_basis(x, knots) @ coef
    y = cfg.beta0 + f + cfg.sigma * rng.standard_normal(cfg.n)
    return Dataset(y, x, cfg)


def gen_ald(cfg: GenConfig) -> Dataset:
    """Asymmetric Laplace outcome whose ``quantile``-th conditional quantile is linear.

    ``y = mu + sigma * (U / p - V / (1 - p))`` with ``U, V`` unit exponentials,
    so ``P(y <= mu) = p`` and ``mu = b0 + b1 x``.
    """
    rng = _rng(cfg)
    x = _uniform_x(cfg, rng)
    q = cfg.quantile
    mu = cfg.beta0 + cfg.beta[0] * x
    u = rng.standard_exponential(cfg.n)
    v = rng.standard_exponential(cfg.n)
    y = mu + cfg.sigma * (u / q - v / (1.0 - q))
    return Dataset(y, x, cfg)


def sparse_components(X: np.ndarray, beta) -> np.ndarray:
    """The four additive signal terms evaluated on the first four columns."""
    b1, b2, b3, b4 = beta
    s = np.sin(2 * np.pi * X[:, 2])
    s4 = np.sin(2 * np.pi * X[:, 3])
    c4 = np.cos(2 * np.pi * X[:, 3])
    return np.column_stack(
        [
            b1 * X[:, 0],
            b2 * (2 * X[:, 1] - 1) ** 2,
            b3 * s / (2 - s),
            b4 * (0.1 * s4 + 0.2 * c4 + 0.3 * s4**2 + 0.4 * c4**3 + 0.5 * s4**3),
        ]
    )


def gen_sparse_additive(cfg: GenConfig) -> Dataset:
    """``y = g1(x1) + g2(x2) + g3(x3) + g4(x4) + e``; the other ``p - 4`` columns are inert."""
    rng = _rng(cfg)
    X = rng.uniform(0.0, 1.0, size=(cfg.n, cfg.p))
    eps = math.sqrt(cfg.noise_var) * rng.standard_normal(cfg.n)
    y = sparse_components(X, cfg.beta).sum(axis=1) + eps
    return Dataset(y, X, cfg)


_GENERATORS = {
    Family.LOGISTIC_LINEAR: gen_logistic,
    Family.LOGISTIC_QUADRATIC: gen_logistic,
    Family.LINEAR_NORMAL: gen_linear,
    Family.HETEROSCEDASTIC: gen_linear,
    Family.CONTAMINATED: gen_linear,
    Family.T_ERRORS: gen_linear,
    Family.QUADRATIC_REG: gen_quadratic,
    Family.BSPLINE_NP: gen_bspline,
    Family.ALD_QUANTILE: gen_ald,
    Family.SPARSE_ADDITIVE: gen_sparse_additive,
}


def generate(cfg: GenConfig) -> Dataset:
    """Draw one dataset from ``cfg``."""
    return _GENERATORS[cfg.family](cfg)
