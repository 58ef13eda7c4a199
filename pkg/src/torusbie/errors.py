"""Exception types raised across the package."""


class TorusBIEError(Exception):
    """Base class for solver errors."""


class SurfaceCatalogError(TorusBIEError, KeyError):
    """Unknown or malformed surface."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class SingularEvaluationError(TorusBIEError, ValueError):
    """Kernel evaluated at (numerically) coincident parameters."""


class AliasingError(TorusBIEError, ValueError):
    """Sampling grid too coarse for the requested bandwidth."""


class ValidationError(TorusBIEError, ValueError):
    """Invalid configuration, surface or boundary data."""


class MemoryBudgetError(TorusBIEError, MemoryError):
    """A dense object would exceed the configured memory cap."""

    def __init__(self, message, required_bytes):
        super().__init__(message)
        self.required_bytes = int(required_bytes)


class SingularSystemError(TorusBIEError, ArithmeticError):
    """Linear system is numerically singular."""


class ConvergenceError(TorusBIEError, RuntimeError):
    """Iterative solver did not reach its tolerance."""

    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = float(residual)
        self.iterations = int(iterations)
