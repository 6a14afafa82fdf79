"""Exception types shared across the package."""


class SuplocError(Exception):
    """Base class for all package errors."""


class ParameterError(SuplocError, ValueError):
    """An argument is outside its allowed range."""


class ConstructionError(SuplocError, ValueError):
    """A waveform construction failed its own validation."""


class RefinementError(SuplocError, RuntimeError):
    """Root refinement could not bracket a maximum."""


class DataError(SuplocError, ValueError):
    """Input data violates a precondition (e.g. sample outside the window)."""
