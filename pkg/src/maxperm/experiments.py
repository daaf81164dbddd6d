"""Size and power studies over a (generator x method) grid.

Replicate ``r`` draws its data and its permutation stream from seeds derived
from ``(master_seed, r)`` only.  The same data are reused across the signal
grid (common random numbers) and across methods, so adding a method or a
grid point never changes another method's rejection indicators.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import platform
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed

from maxperm import __version__
from maxperm.adjust import altman, miller_siegmund, modified_bonferroni, unadjusted_min_p
from maxperm.datagen import Family, GenConfig, generate
from maxperm.errors import ConfigError, FitError, SeparationWarning
from maxperm.permutation import PermPlan, permutation_test
from maxperm.regression import HC, logistic_wald_test, ols_slope_test, sandwich_slope_test
from maxperm.scan import SplitLayout, TrimPolicy, max_scan
from maxperm.stats import StatKind

logger = logging.getLogger(__name__)

__all__ = [
    "METHODS",
    "StudyConfig",
    "ExperimentReport",
    "run_study",
    "power_curve",
    "pilot_signal",
    "replicate_seeds",
]

_STAT_OF = {"t": StatKind.POOLED_T, "welch": StatKind.WELCH_T, "mw": StatKind.MANN_WHITNEY, "chisq": StatKind.CHI_SQUARE}

METHODS = (
    "lm",
    "sandwich",
    "logistic",
    "unadj-t",
    "unadj-welch",
    "unadj-mw",
    "unadj-chisq",
    "miller-siegmund",
    "altman",
    "modified-bonferroni",
    "perm-t",
    "perm-welch",
    "perm-mw",
    "perm-chisq",
)
_BINARY_ONLY = {"logistic", "unadj-chisq", "perm-chisq", "miller-siegmund", "altman", "modified-bonferroni"}


@dataclass(frozen=True)
class StudyConfig:
    """One simulation study.

    ``beta_grid`` values are signal strengths passed to
    :meth:`GenConfig.with_signal`; 0 is the null model.
    """

    generator: GenConfig
    methods: tuple[str, ...]
    beta_grid: tuple[float, ...] = (0.0,)
    alpha: float = 0.05
    reps: int = 500
    master_seed: int = 0
    permutations: int = 1000
    trim: TrimPolicy = field(default_factory=TrimPolicy)
    hc: HC = HC.HC3
    name: str = "study"

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(str(m).lower() for m in self.methods))
        object.__setattr__(self, "beta_grid", tuple(float(b) for b in self.beta_grid))
        object.__setattr__(self, "hc", HC(self.hc))
        self.validate()

    def validate(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if self.permutations < 1:
            raise ConfigError("permutations must be >= 1")
        if not self.methods:
            raise ConfigError("no methods given")
        if not self.beta_grid:
            raise ConfigError("beta_grid is empty")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; choose from {list(METHODS)}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("duplicate methods")
        if self.generator.family is Family.SPARSE_ADDITIVE:
            raise ConfigError("sparse_additive has many features; use the screening experiment")
        binary = self.generator.family.binary
        if not binary:
            bad = sorted(set(self.methods) & _BINARY_ONLY)
            if bad:
                raise ConfigError(f"methods {bad} need a binary outcome; {self.generator.family.value} is continuous")
        if {"miller-siegmund", "altman"} & set(self.methods) and self.trim.epsilon <= 0.0:
            raise ConfigError("Miller-Siegmund and Altman corrections need epsilon > 0")
        if "altman" in self.methods and round(self.trim.epsilon, 6) not in (0.05, 0.1):
            raise ConfigError("Altman correction is tabulated for epsilon 0.05 or 0.10 only")

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        gen = asdict(self.generator)
        gen["family"] = self.generator.family.value
        for key in ("beta", "contamination", "shape"):
            if gen.get(key) is not None:
                gen[key] = list(gen[key])
        return {
            "name": self.name,
            "generator": gen,
            "methods": list(self.methods),
            "beta_grid": list(self.beta_grid),
            "alpha": self.alpha,
            "reps": self.reps,
            "master_seed": self.master_seed,
            "permutations": self.permutations,
            "trim": {"epsilon": self.trim.epsilon, "min_group": self.trim.min_group},
            "hc": self.hc.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> StudyConfig:
        if not isinstance(d, dict):
            raise ConfigError("study config must be a mapping")
        allowed = {"name", "generator", "methods", "beta_grid", "alpha", "reps", "master_seed", "permutations", "trim", "hc"}
        extra = set(d) - allowed
        if extra:
            raise ConfigError(f"unknown study keys {sorted(extra)}")
        if "generator" not in d or "methods" not in d:
            raise ConfigError("study config needs 'generator' and 'methods'")
        gen = d["generator"]
        if not isinstance(gen, dict) or "family" not in gen:
            raise ConfigError("generator must be a mapping with a 'family'")
        gen_fields = set(GenConfig.__dataclass_fields__)
        if set(gen) - gen_fields:
            raise ConfigError(f"unknown generator keys {sorted(set(gen) - gen_fields)}")
        try:
            gen_cfg = GenConfig(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in gen.items()})
            trim = TrimPolicy(**d.get("trim", {}))
            kwargs = {k: d[k] for k in ("name", "alpha", "reps", "master_seed", "permutations", "hc") if k in d}
            if "beta_grid" in d:
                kwargs["beta_grid"] = tuple(d["beta_grid"])
            return cls(generator=gen_cfg, methods=tuple(d["methods"]), trim=trim, **kwargs)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid study config: {exc}") from exc

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class ExperimentReport:
    """Rejection rates per (method, signal) with Monte Carlo standard errors.

    ``indicators[(method, j)]`` holds the per-replicate rejections at
    ``beta_grid[j]``; ``nonconverged`` counts failed model fits.
    """

    config: StudyConfig
    indicators: dict[tuple[str, int], np.ndarray]
    nonconverged: dict[tuple[str, int], int]

    def rate(self, method: str, beta_index: int = 0) -> float:
        return float(np.mean(self.indicators[(method, beta_index)]))

    def se(self, method: str, beta_index: int = 0) -> float:
        r = self.rate(method, beta_index)
        return math.sqrt(r * (1.0 - r) / self.config.reps)

    def rows(self) -> list[dict]:
        out = []
        for j, beta in enumerate(self.config.beta_grid):
            for m in self.config.methods:
                out.append(
                    {
                        "study": self.config.name,
                        "method": m,
                        "beta": beta,
                        "rate": self.rate(m, j),
                        "se": self.se(m, j),
                        "reps": self.config.reps,
                        "nonconverged": self.nonconverged.get((m, j), 0),
                    }
                )
        return out

    def manifest(self) -> dict:
        import scipy

        return {
            "schema_version": 1,
            "study": self.config.name,
            "config": self.config.to_dict(),
            "config_sha256": self.config.digest(),
            "master_seed": self.config.master_seed,
            "versions": {
                "maxperm": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
        }


def replicate_seeds(master_seed: int, rep: int) -> tuple[int, int]:
    """(data seed, permutation seed) of replicate ``rep``."""
    a, b = np.random.SeedSequence(int(master_seed), spawn_key=(int(rep),)).generate_state(2, dtype=np.uint64)
    return int(a), int(b)


class _Replicate:
    """Lazily computed scans shared by the methods of one dataset."""

    def __init__(self, y, x, cfg: StudyConfig, perm_seed: int):
        self.y, self.x, self.cfg = y, x, cfg
        self.plan = PermPlan(cfg.permutations, perm_seed)
        self.layout = SplitLayout.from_x(x, cfg.trim)
        self._scans = {}

    def scan(self, kind: StatKind):
        if kind not in self._scans:
            self._scans[kind] = max_scan(self.y, None, kind, layout=self.layout)
        return self._scans[kind]

    def p_value(self, method: str) -> tuple[float, bool]:
        """p-value of ``method`` and whether its model fit failed."""
        cfg, eps = self.cfg, self.cfg.trim.epsilon
        if method == "lm":
            return ols_slope_test(self.y, self.x).p_value, False
        if method == "sandwich":
            return sandwich_slope_test(self.y, self.x, cfg.hc).p_value, False
        if method == "logistic":
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", SeparationWarning)
                    fit = logistic_wald_test(self.y, self.x)
            except FitError:
                return 1.0, True
            return fit.p_value, not fit.converged
        prefix, _, stat = method.partition("-")
        if prefix == "unadj":
            return unadjusted_min_p(self.scan(_STAT_OF[stat])).p, False
        if prefix == "perm":
            res = permutation_test(self.y, None, _STAT_OF[stat], plan=self.plan, layout=self.layout)
            return res.p_value, False
        chi = self.scan(StatKind.CHI_SQUARE)
        if method == "miller-siegmund":
            return miller_siegmund(chi.max_stat, eps, 1.0 - eps).p, False
        if method == "altman":
            return altman(unadjusted_min_p(chi).p, eps).p, False
        if method == "modified-bonferroni":
            return modified_bonferroni(chi).p, False
        raise ConfigError(f"unknown method {method}")


def _run_replicate(cfg: StudyConfig, rep: int) -> tuple[np.ndarray, np.ndarray]:
    data_seed, perm_seed = replicate_seeds(cfg.master_seed, rep)
    nb, nm = len(cfg.beta_grid), len(cfg.methods)
    reject = np.zeros((nb, nm), dtype=bool)
    failed = np.zeros((nb, nm), dtype=bool)
    for j, beta in enumerate(cfg.beta_grid):
        data = generate(cfg.generator.with_signal(beta).with_seed(data_seed))
        rep_state = _Replicate(data.y, data.x, cfg, perm_seed)
        for i, m in enumerate(cfg.methods):
            p, bad = rep_state.p_value(m)
            failed[j, i] = bad
            reject[j, i] = (not bad) and p <= cfg.alpha
    return reject, failed


def run_study(cfg: StudyConfig, workers: int = 1) -> ExperimentReport:
    """Rejection rates of every method at every signal strength.

    Non-converged model fits count as non-rejections and are tallied in
    ``nonconverged``.  Output does not depend on ``workers``.
    """
    cfg.validate()
    if workers <= 1:
        results = [_run_replicate(cfg, r) for r in range(cfg.reps)]
    else:
        results = Parallel(n_jobs=workers)(delayed(_run_replicate)(cfg, r) for r in range(cfg.reps))
    reject = np.stack([r[0] for r in results])  # (reps, betas, methods)
    failed = np.stack([r[1] for r in results])
    indicators, nonconv = {}, {}
    for j in range(len(cfg.beta_grid)):
        for i, m in enumerate(cfg.methods):
            indicators[(m, j)] = reject[:, j, i]
            nonconv[(m, j)] = int(failed[:, j, i].sum())
    return ExperimentReport(cfg, indicators, nonconv)


def power_curve(cfg: StudyConfig, workers: int = 1) -> ExperimentReport:
    """Power over ``cfg.beta_grid``; ``rows()`` gives the tidy long format."""
    if len(cfg.beta_grid) < 2:
        logger.info("power curve with a single grid point")
    return run_study(cfg, workers)


def pilot_signal(
    cfg: StudyConfig,
    method: str,
    target: float = 0.9,
    reps: int = 100,
    start: float = 0.1,
    grow: float = 2.0,
    max_steps: int = 12,
    refine: int = 4,
) -> float:
    """Smallest signal (on a coarse scale) at which ``method`` reaches ``target`` power.

    Doubles the signal until the pilot power reaches ``target`` and then
    bisects ``refine`` times.  Used to set the top of a power-curve grid.
    """
    if method not in cfg.methods:
        cfg = replace(cfg, methods=cfg.methods + (method,))

    def power(s):
        pilot = replace(cfg, beta_grid=(s,), reps=reps)
        return run_study(pilot).rate(method, 0)

    lo, hi = 0.0, start
    for _ in range(max_steps):
        if power(hi) >= target:
            break
        lo, hi = hi, hi * grow
    else:
        raise ConfigError(f"{method} did not reach power {target} up to signal {hi}")
    for _ in range(refine):
        mid = 0.5 * (lo + hi)
        if power(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def grid_to(max_signal: float, points: int = 10) -> tuple[float, ...]:
    return tuple(float(v) for v in np.linspace(0.0, max_signal, points))
