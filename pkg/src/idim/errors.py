"""Exception types shared across the package."""


class IdimError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(IdimError, ValueError):
    """A vector length or dimension violates an operation's contract."""


class CapacityError(IdimError, ValueError):
    """A request would materialize more memory than the configured cap."""


class ConfigError(IdimError, ValueError):
    """A configuration value or document is invalid."""


class DataError(IdimError, ValueError):
    """An input data file is malformed."""


class NumericError(IdimError, ArithmeticError):
    """A computation produced non-finite values."""


class BaselineDegenerateError(IdimError, RuntimeError):
    """The full-parameter baseline failed to beat majority-class accuracy."""


class UndefinedGapError(IdimError, ValueError):
    """The relative generalization gap is undefined (eval accuracy = 1)."""
