"""Exception types raised across the package."""


class CompnetError(Exception):
    """Base class for all package errors."""


class StructuralError(CompnetError, ValueError):
    """Shapes or block dimensions do not conform."""


class ValidationError(CompnetError, ValueError):
    """A matrix or configuration violates a required property."""


class CapabilityError(CompnetError, TypeError):
    """The game does not provide an operation the caller needs."""


class MonotonicityError(CompnetError, ValueError):
    """The game operator is not strongly monotone (or is singular)."""


class StabilityError(CompnetError, ValueError):
    """A spectral quantity is outside the stable range."""


class NumericalError(CompnetError, ArithmeticError):
    """A numerical routine failed to converge."""


class DivergenceError(CompnetError, ArithmeticError):
    """The iterates left the finite range.

    ``iteration`` is the index of the step that produced the bad state and
    ``trajectory`` holds whatever was recorded before it, if anything.
    """

    def __init__(self, iteration, message=None, trajectory=None):
        self.iteration = iteration
        self.trajectory = trajectory
        super().__init__(message or f"iterates diverged at iteration {iteration}")


class ConfigError(CompnetError, ValueError):
    """An experiment configuration is malformed or references missing files."""
