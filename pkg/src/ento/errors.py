"""Exception hierarchy shared by the whole package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
ShapeError -> 3, NumericalError -> 4.
"""


class EntoError(Exception):
    """Base class for all package errors."""


class ConfigError(EntoError):
    """Invalid configuration file, key, or value."""


class DataError(EntoError):
    """I/O level failure: missing file, malformed header, bad checksum."""


class ShapeError(EntoError):
    """Tensor shape or dtype mismatch."""


class GraphError(EntoError):
    """Misuse of the gradient tape (e.g. backward without forward)."""


class NumericalError(EntoError):
    """Non-finite values encountered where finiteness is required."""
