"""Exception types raised across the package.

All of them subclass :class:`ValueError` so callers that only care about
"bad input" can catch that.
"""

from __future__ import annotations


class MaxPermError(ValueError):
    """Base class for package errors."""


class InputError(MaxPermError):
    """Malformed input values (non-finite entries, length mismatch, ...)."""


class DegenerateSplitError(MaxPermError):
    """A two-group split cannot produce a statistic.

    Raised for groups that are too small, zero pooled variance with a
    nonzero mean difference, or a 2x2 table with an empty margin.
    """


class NoAdmissibleThresholdError(MaxPermError):
    """The trimming policy leaves no candidate threshold."""


class PlanError(MaxPermError):
    """Invalid permutation plan (for example exhaustive mode beyond the cap)."""


class ConfigError(MaxPermError):
    """Invalid generator, study, or screening configuration."""


class FitError(MaxPermError):
    """A regression comparator cannot be fitted (rank deficiency, one class)."""


class SeparationWarning(UserWarning):
    """Logistic fit hit (quasi-)complete separation and did not converge."""
