"""Maximal permutation tests of association between an outcome and a feature."""

from __future__ import annotations

__version__ = "0.1.0"

from maxperm.errors import (  # noqa: E402
    ConfigError,
    DegenerateSplitError,
    FitError,
    InputError,
    MaxPermError,
    NoAdmissibleThresholdError,
    PlanError,
    SeparationWarning,
)
from maxperm.permutation import PermMode, PermPlan, PermResult, permutation_test  # noqa: E402
from maxperm.scan import ScanResult, TrimPolicy, max_scan  # noqa: E402
from maxperm.stats import StatKind  # noqa: E402

__all__ = [
    "__version__",
    "StatKind",
    "TrimPolicy",
    "ScanResult",
    "max_scan",
    "PermMode",
    "PermPlan",
    "PermResult",
    "permutation_test",
    "MaxPermError",
    "InputError",
    "DegenerateSplitError",
    "NoAdmissibleThresholdError",
    "PlanError",
    "ConfigError",
    "FitError",
    "SeparationWarning",
]
