"""Exception types shared across the package."""


class RareprobError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(RareprobError, ValueError):
    """A numeric argument is outside its admissible set (NaN, inf, bad range)."""


class DimensionError(RareprobError, ValueError):
    """A vector has the wrong length for the model it is passed to."""


class ConfigurationError(RareprobError, ValueError):
    """A run/benchmark configuration is inconsistent or unknown."""


class TuningError(RareprobError, RuntimeError):
    """Pilot tuning failed (e.g. every trajectory candidate diverged)."""


class NumericalError(RareprobError, RuntimeError):
    """A linear-algebra or estimation step failed beyond repair."""


class EstimationError(RareprobError, RuntimeError):
    """A sampling run cannot produce a usable estimate (e.g. no main-phase samples)."""


class SusConvergenceError(RareprobError, RuntimeError):
    """Subset simulation exceeded the level cap. Carries the partial thresholds."""

    def __init__(self, message, thresholds=None):
        super().__init__(message)
        self.thresholds = list(thresholds) if thresholds is not None else []
