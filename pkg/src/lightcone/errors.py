"""Exception types raised across the package."""


class LightconeError(Exception):
    """Base class for all package errors."""


class InvalidInput(LightconeError, ValueError):
    pass


class ResourceLimit(LightconeError, RuntimeError):
    pass


class NumericalFailure(LightconeError, RuntimeError):
    """Raised when an iterative routine misses its tolerance.

    ``diagnostics`` carries whatever the routine knew at the point of failure
    (iteration counts, residual estimates, step sizes).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class UnsupportedRegime(LightconeError, ValueError):
    pass


class InsufficientData(LightconeError, ValueError):
    pass
