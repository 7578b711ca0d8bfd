"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4.
"""


class GpsensError(Exception):
    """Base class for all package errors."""


class ConfigError(GpsensError):
    """Invalid configuration: bad flags, unsupported model/policy combos."""


class DataError(GpsensError):
    """Malformed input data; message carries the offending row when known."""


class NumericError(GpsensError):
    """Numerical failure: overflow, infeasible root, unbalanced transport."""
