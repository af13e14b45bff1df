"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, solver failures with 3, and violated state properties with 4.
"""

from __future__ import annotations


class LawdonError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(LawdonError):
    """Invalid input: parameters out of range, inconsistent geometry,
    non-quantized average fields, unreadable config documents."""


class SolverError(LawdonError):
    """An iterative solver failed to converge or hit an internal
    inconsistency (e.g. a negative radicand that should be impossible)."""


class StallError(SolverError):
    """Line search stalled: no acceptable step after the halving budget.

    Carries the partial minimisation report in ``.report`` so callers can
    inspect the trace up to the stall.
    """

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class PropertyError(LawdonError):
    """A state fails a property required by the requested operation
    (modulus too small for winding counts, validation failures)."""
