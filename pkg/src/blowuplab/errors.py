"""Exception hierarchy shared across the package.

CLI exit-code mapping: ConfigError and other BlowupLabError subclasses
exit 1, HypothesisError exits 2, InequalityViolationError exits 3.
"""


class BlowupLabError(Exception):
    """Base class for all package errors."""


class ConfigError(BlowupLabError):
    """Malformed configuration: unknown keys, bad values, missing sections."""


class InvalidResolutionError(BlowupLabError):
    """Grid resolution too coarse for the stencils (fewer than 3 nodes per axis)."""


class DomainError(BlowupLabError):
    """Argument outside the mathematical domain of an operation."""


class InvalidFieldError(BlowupLabError):
    """Field values non-finite or incompatible with the grid."""


class ConvergenceError(BlowupLabError):
    """Iterative computation failed to converge; carries the last residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class PreconditionError(BlowupLabError):
    """Operation called on data that does not satisfy its preconditions."""


class FitError(BlowupLabError):
    """Regression impossible or degenerate (zero variance, bad extrapolation)."""


class InapplicableError(BlowupLabError):
    """Construction requested outside its regime (e.g. inf sigma = 0)."""


class HypothesisError(BlowupLabError):
    """A hard structural hypothesis on the problem failed validation."""


class InequalityViolationError(BlowupLabError):
    """A differential inequality or ordering was violated beyond tolerance."""
