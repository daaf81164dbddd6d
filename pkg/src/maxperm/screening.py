"""Marginal feature screening by a univariate association utility.

Each feature gets a utility against the outcome (the observed maximal
statistic, its permutation p-value, or distance correlation) and the ``k``
features with the largest utility are kept.  Ties go to the smaller column
index.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from maxperm.datagen import Family, GenConfig, generate
from maxperm.dependence import centered_distances, dcor_from_centered
from maxperm.errors import ConfigError, InputError, NoAdmissibleThresholdError
from maxperm.permutation import PermPlan, permutation_test
from maxperm.scan import SplitLayout, TrimPolicy, max_scan
from maxperm.stats import StatKind

logger = logging.getLogger(__name__)

__all__ = [
    "Utility",
    "ScreenConfig",
    "ScreenResult",
    "InclusionTable",
    "feature_utilities",
    "marginal_screen",
    "inclusion_experiment",
]


class Utility(enum.Enum):
    MAX_STAT = "maxstat"
    PERM_PVALUE = "perm-pvalue"
    DIST_CORR = "dcor"


@dataclass(frozen=True)
class ScreenConfig:
    """Screening settings.

    ``utility="maxstat"`` ranks by the observed maximal statistic.  Without
    ties in the features every column has the same split layout, so the
    permutation null of the maximum is the same for all columns and this
    ranking agrees with ranking by permutation p-value (``"perm-pvalue"``,
    B times slower, kept for verification).
    """

    utility: Utility = Utility.MAX_STAT
    k: int = 4
    kind: StatKind = StatKind.POOLED_T
    trim: TrimPolicy = field(default_factory=TrimPolicy)
    perm_plan: PermPlan = field(default_factory=PermPlan)

    def __post_init__(self):
        object.__setattr__(self, "utility", Utility(self.utility))
        object.__setattr__(self, "kind", StatKind.parse(self.kind))
        if self.k < 1:
            raise ConfigError("k must be >= 1")


@dataclass(frozen=True)
class ScreenResult:
    utilities: np.ndarray
    ranking: np.ndarray
    selected: np.ndarray
    constant_columns: tuple[int, ...] = ()

    def rank_of(self, j: int) -> int:
        """1-based rank of column ``j``."""
        return int(np.flatnonzero(self.ranking == j)[0]) + 1


def _perm_pvalue_utility(y, col, cfg, j):
    res = permutation_test(y, col, cfg.kind, cfg.trim, cfg.perm_plan)
    # larger utility = stronger association
    return 1.0 - res.p_value


def feature_utilities(y, X, cfg: ScreenConfig, workers: int = 1) -> tuple[np.ndarray, tuple[int, ...]]:
    """Utility of every column of ``X``; constant columns get 0 and are reported."""
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise InputError(f"X must be (n, p) with n={y.size}, got {X.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InputError("missing or non-finite values")
    p = X.shape[1]
    constant = tuple(int(j) for j in np.flatnonzero(np.ptp(X, axis=0) == 0.0))
    live = [j for j in range(p) if j not in set(constant)]
    out = np.zeros(p)
    if cfg.utility is Utility.DIST_CORR:
        b = centered_distances(y)
        vals = Parallel(n_jobs=workers, prefer="threads")(
            delayed(lambda j: dcor_from_centered(centered_distances(X[:, j]), b).dcor)(j) for j in live
        )
    elif cfg.utility is Utility.MAX_STAT:

        def one(j):
            try:
                return max_scan(y, X[:, j], cfg.kind, cfg.trim).max_stat
            except NoAdmissibleThresholdError:
                return 0.0

        vals = [one(j) for j in live]
    else:
        vals = Parallel(n_jobs=workers, prefer="threads")(
            delayed(_perm_pvalue_utility)(y, X[:, j], cfg, j) for j in live
        )
    out[live] = vals
    if constant:
        logger.warning("constant feature columns given utility 0: %s", list(constant))
    return out, constant


def marginal_screen(y, X, cfg: ScreenConfig, workers: int = 1) -> ScreenResult:
    """Keep the ``cfg.k`` columns of ``X`` with the largest utility."""
    X = np.asarray(X, dtype=float)
    if cfg.k > X.shape[1]:
        raise ConfigError(f"k={cfg.k} exceeds the number of features p={X.shape[1]}")
    util, constant = feature_utilities(y, X, cfg, workers)
    # stable sort on -utility keeps the smaller index first among ties
    ranking = np.argsort(-util, kind="stable")
    return ScreenResult(util, ranking, np.sort(ranking[: cfg.k]), constant)


@dataclass(frozen=True)
class InclusionTable:
    """Inclusion probabilities of the four active predictors, per ``k``.

    ``marginal[k]`` has one entry per active predictor; ``joint[k]`` is the
    probability that all four are selected together.
    """

    k_list: tuple[int, ...]
    reps: int
    marginal: dict[int, np.ndarray]
    joint: dict[int, float]
    beta: tuple[float, ...] = ()
    utility: Utility = Utility.MAX_STAT

    def se(self, value: float) -> float:
        return math.sqrt(value * (1.0 - value) / self.reps)

    def rows(self) -> list[dict]:
        out = []
        for k in self.k_list:
            row = {"k": k, "utility": self.utility.value}
            for i, v in enumerate(self.marginal[k], start=1):
                row[f"x{i}"] = float(v)
                row[f"x{i}_se"] = self.se(float(v))
            row["all4"] = float(self.joint[k])
            row["all4_se"] = self.se(float(self.joint[k]))
            out.append(row)
        return out


def _replicate_indicators(gen: GenConfig, cfg: ScreenConfig, k_list, seed: int) -> np.ndarray:
    data = generate(gen.with_seed(seed))
    util, _ = feature_utilities(data.y, data.x, cfg)
    ranking = np.argsort(-util, kind="stable")
    rows = []
    for k in k_list:
        top = set(ranking[:k].tolist())
        hits = [j in top for j in range(4)]
        rows.append(hits + [all(hits)])
    return np.array(rows, dtype=float)


def inclusion_experiment(
    gen: GenConfig,
    cfg: ScreenConfig,
    k_list=(4, 10, 20),
    reps: int = 100,
    master_seed: int = 0,
    workers: int = 1,
) -> InclusionTable:
    """Estimate inclusion probabilities of the active predictors by replication."""
    if gen.family is not Family.SPARSE_ADDITIVE:
        raise ConfigError("inclusion experiments need the sparse_additive family")
    k_list = tuple(int(k) for k in k_list)
    if any(k < 1 or k > gen.p for k in k_list):
        raise ConfigError(f"every k must lie in [1, {gen.p}]")
    seeds = np.random.SeedSequence(int(master_seed)).generate_state(reps, dtype=np.uint64)
    ind = Parallel(n_jobs=workers)(
        delayed(_replicate_indicators)(gen, cfg, k_list, int(s)) for s in seeds
    )
    mean = np.mean(np.stack(ind), axis=0)
    marginal = {k: mean[i, :4] for i, k in enumerate(k_list)}
    joint = {k: float(mean[i, 4]) for i, k in enumerate(k_list)}
    return InclusionTable(k_list, reps, marginal, joint, gen.beta, cfg.utility)
