"""Exception hierarchy for the coupler simulation library.

``ConfigError`` signals bad user input (CLI exit code 2); everything else
derives from ``NumericalError`` and signals a failure of the numerics for
the requested regime (CLI exit code 3).
"""

from __future__ import annotations


class CouplerError(Exception):
    """Base class for all library-specific errors."""


class ConfigError(CouplerError):
    """Invalid configuration input; carries the offending field name."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"config field '{field}': {message}")


class NumericalError(CouplerError):
    """Base class for runtime numerical failures."""


class NonConvergence(NumericalError):
    """An iterative solver ran out of time or iterations."""


class DivergenceDetected(NumericalError):
    """A deterministic trajectory exceeded the overflow guard."""


class SingularJacobian(NumericalError):
    """Newton linear solve failed."""


class SingularSystem(NumericalError):
    """A matrix solve degenerated (should not occur for stable systems)."""


class UnstablePoint(NumericalError):
    """Fluctuation analysis requested around an unstable fixed point."""


class NonHermitianResidual(NumericalError):
    """Quadrature projection produced a non-negligible imaginary part."""


class UnphysicalCovariance(NumericalError):
    """Covariance matrix violates Cauchy-Schwarz (inference impossible)."""


class EmptyGrid(NumericalError):
    """A frequency or angle grid has no points."""


class WindowTooShort(NumericalError):
    """Too few recorded samples in the requested averaging window."""


class TrajectoryDivergence(NumericalError):
    """Essentially the whole stochastic ensemble escaped the guard.

    Individual escaping trajectories are tolerated, counted and reported on
    the result object; this error is raised only when so many diverge that
    the remaining ensemble is meaningless.
    """

    def __init__(self, message: str, events=None, fraction: float = 0.0):
        self.events = list(events or [])
        self.fraction = fraction
        super().__init__(message)
