"""Custom exceptions for tridesign.

Two families matter to callers: :class:`DomainError` for inputs that can never
work (bad intervals, invalid kernels, vanishing regressors) and
:class:`NumericalError` for computations that failed on otherwise valid input.
The command line maps the first to exit code 2 and the second to exit code 3.
"""

from __future__ import annotations


class TriDesignError(Exception):
    """Base exception for all tridesign-specific errors."""


class ConfigurationError(TriDesignError):
    """Raised for invalid or inconsistent run configuration."""


class StorageError(TriDesignError):
    """Raised when a study or plan cannot be written or read back."""


class DomainError(TriDesignError, ValueError):
    """Raised when a time, point set or count lies outside its valid range."""


class InvalidKernelError(DomainError):
    """Raised when u, v or q violate positivity or monotonicity."""


class IncompatibleKernelsError(DomainError):
    """Raised when two kernels do not share the same q-range."""


class InvalidModelError(DomainError):
    """Raised for linearly dependent or vanishing regression functions."""


class NumericalError(TriDesignError, ArithmeticError):
    """Base class for failures of otherwise well-posed computations."""


class SingularMatrixError(NumericalError):
    """Raised when an information, normal or covariance matrix is singular."""


class FactorizationError(NumericalError):
    """Raised when a Cholesky factorization fails."""


class DegenerateDesignError(NumericalError):
    """Raised when a design has zero information for the parameter."""


class QuadratureError(NumericalError):
    """Raised when panel refinement does not converge."""
