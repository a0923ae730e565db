"""Exception hierarchy shared across the package."""


class LogChoquardError(Exception):
    """Base class for all package-specific errors."""


class DomainError(LogChoquardError, ValueError):
    """An argument is outside the mathematical domain of the operation."""


class GridMismatchError(LogChoquardError):
    """Two objects built on different radial grids were combined."""


class AssumptionError(LogChoquardError):
    """A structural assumption on the weights or the nonlinearity fails.

    Carries the name of the violated condition in ``condition``.
    """

    def __init__(self, condition: str, message: str):
        super().__init__(f"{condition}: {message}")
        self.condition = condition


class AccuracyError(LogChoquardError):
    """A quadrature self-check disagreed beyond its tolerance."""


class CappedEvaluationError(LogChoquardError):
    """The exponential nonlinearity exceeded the overflow cap.

    A solve that reaches this regime is outside the validity of the
    discretization; review the grid and the scaling of the iterate.
    """


class GeometryError(LogChoquardError):
    """No mountain-pass geometry could be established."""


class NonconvergenceError(LogChoquardError):
    """An iterative solve exhausted its budget without meeting tolerance."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class StagnationError(NonconvergenceError):
    """The path-max energy failed to decrease for many consecutive sweeps."""


class UnsupportedDimensionError(LogChoquardError):
    """The requested operation is only implemented for even dimensions."""
