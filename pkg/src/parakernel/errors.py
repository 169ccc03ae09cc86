"""Exception types raised across the package."""


class ParakernelError(Exception):
    """Base class for all package errors."""


class InputError(ParakernelError, ValueError):
    """Invalid argument: wrong shape, dimension mismatch, bad parameter."""


class StateError(ParakernelError, RuntimeError):
    """An operation was called before its prerequisites were computed."""


class UnsupportedRepresentationError(ParakernelError, TypeError):
    """The coefficient field representation does not support the request."""


class HorizonExceededError(ParakernelError):
    """Requested time lies beyond the certified validity horizon."""

    def __init__(self, t, horizon, hint=""):
        self.t = t
        self.horizon = horizon
        msg = f"t={t:g} exceeds the certified horizon beta={horizon:.6g}"
        if hint:
            msg += f"; {hint}"
        super().__init__(msg)


class DivergenceError(ParakernelError, RuntimeError):
    """Correction iterations of the splitting scheme grew instead of shrinking."""


class ConfigError(ParakernelError, ValueError):
    """Malformed or inconsistent JSON problem configuration."""
