"""Exception hierarchy and CLI exit codes."""

from __future__ import annotations

EXIT_OK = 0
EXIT_GENERIC = 1
EXIT_INPUT = 2
EXIT_SOLVER = 3
EXIT_BRACKET = 4
EXIT_INSTABILITY = 5
EXIT_ACCEPTANCE = 6


class NLSDError(Exception):
    """Base class for all package errors."""

    exit_code = EXIT_GENERIC


class NonFiniteError(NLSDError, ValueError):
    """An input array holds NaN or inf values."""

    exit_code = EXIT_INPUT

    def __init__(self, index: int, eta: float | None = None, what: str = "field"):
        self.index = int(index)
        self.eta = eta
        where = f"index {self.index}"
        if eta is not None:
            where += f" (eta={eta:.6g})"
        super().__init__(f"non-finite {what} value at {where}")


class DomainError(NLSDError, ValueError):
    """Arguments outside the domain of validity of an operation."""

    exit_code = EXIT_INPUT

    def __init__(self, message: str, index: int | None = None):
        self.index = index
        super().__init__(message)


class ConvergenceError(NLSDError):
    """Newton iteration or continuation failed to converge.

    Attributes
    ----------
    last_residual : float
        Max-norm residual of the last iterate.
    k : float or None
        Propagation constant at which the failure happened.
    partial : object or None
        Partial result (e.g. a truncated Branch) produced before the failure.
    """

    exit_code = EXIT_SOLVER

    def __init__(self, message: str, last_residual: float = float("nan"),
                 k: float | None = None, partial=None):
        self.last_residual = last_residual
        self.k = k
        self.partial = partial
        super().__init__(message)


class DegenerateSolutionError(ConvergenceError):
    """Newton converged to the trivial zero solution."""


class BracketError(NLSDError):
    """A requested quantity is not bracketed by the sampled range."""

    exit_code = EXIT_BRACKET


class MetricError(NLSDError, ValueError):
    """A profile metric cannot be evaluated (e.g. no half-maximum crossings)."""


class NoSolutionError(NLSDError):
    """A closed-form equation has no admissible root."""

    def __init__(self, message: str, discriminant: float | None = None):
        self.discriminant = discriminant
        super().__init__(message)


class SeparationError(NLSDError, ValueError):
    """Soliton copies overlap too strongly for a pair initial condition."""

    exit_code = EXIT_INPUT


class InstabilityError(NLSDError):
    """Numerical blow-up that was not preceded by collapse detection."""

    exit_code = EXIT_INSTABILITY

    def __init__(self, message: str, xi: float = float("nan")):
        self.xi = xi
        super().__init__(message)
