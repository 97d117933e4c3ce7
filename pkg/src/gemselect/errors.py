"""Exception hierarchy shared across the package.

CLI exit codes: ConfigError -> 2, DataError -> 3, NumericError and
SolverError -> 4.
"""


class GemselectError(Exception):
    """Base class for all package errors."""


class ConfigError(GemselectError):
    """Invalid or inconsistent run configuration."""


class DataError(GemselectError):
    """Malformed or unreadable input data."""


class ShapeError(GemselectError):
    """Array dimensions do not match the model or each other."""


class NumericError(GemselectError):
    """Non-finite values or a numerically invalid intermediate result."""


class DegenerateGeometryError(GemselectError):
    """Affinity requested on an empty feature set."""


class SolverError(NumericError):
    """Optimal transport solver failed to converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class UnsupportedRegimeError(ConfigError):
    """Operation not available under the active training regime."""
