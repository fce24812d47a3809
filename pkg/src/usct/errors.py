"""Exception types shared across the package."""


class UsctError(Exception):
    """Base class for all package errors."""


class ConfigurationError(UsctError):
    """Invalid shapes, hyperparameters, geometry, or file contents."""


class DataError(UsctError):
    """Inconsistent runtime data (mismatched pairs, bad cubes)."""


class StateError(UsctError):
    """Operation called in the wrong order (e.g. backward before forward)."""


class NumericError(UsctError):
    """Non-finite values or numerical breakdown, with location context."""
