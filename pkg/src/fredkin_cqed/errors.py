"""Exception hierarchy shared by every module of the package."""


class FredkinError(Exception):
    """Base class for all package errors."""


class DimensionError(FredkinError, ValueError):
    """A requested dimension is invalid or exceeds a configured limit."""


class LayoutError(FredkinError, ValueError):
    """Operator or state shape does not match the tensor-product layout."""


class LevelError(FredkinError, ValueError):
    """Unknown qutrit level label."""


class TruncationError(FredkinError, ValueError):
    """Fock-space cutoff too small for the requested state or evolution."""

    def __init__(self, message, required_dim=None):
        super().__init__(message)
        self.required_dim = required_dim


class DegenerateStateError(FredkinError, ValueError):
    """A state construction would produce the zero vector."""


class ConditionViolated(FredkinError, ValueError):
    """Parameters do not satisfy a precondition of the requested model."""


class NonInvertibleError(FredkinError, ValueError):
    """The swap-test probability cannot be inverted for the given control."""


class IntegratorDivergence(FredkinError, RuntimeError):
    """Time integration violated a norm, trace, or positivity tolerance."""

    def __init__(self, message, suggested_dt=None):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class ConfigError(FredkinError, ValueError):
    """Invalid configuration key or value."""


class InvalidState(FredkinError, ValueError):
    """A state fails its normalization, Hermiticity, or positivity checks."""
