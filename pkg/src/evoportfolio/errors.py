"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Array dimensions do not match what an operation requires."""


class NumericError(FloatingPointError):
    """A computation produced or received non-finite values."""


class ConfigError(ValueError):
    """Invalid configuration value; message names the offending key."""


class StateError(RuntimeError):
    """An operation was called in a state that does not permit it."""


class InsufficientDataError(RuntimeError):
    """Not enough stored data to serve the request (e.g. cold replay buffer)."""
