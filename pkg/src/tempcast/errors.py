"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage errors exit 1, DataError 2,
NumericError 3.
"""


class TempcastError(Exception):
    """Base class for all package errors."""


class ConfigurationError(TempcastError):
    """Invalid configuration value or degenerate derived quantity."""


class DataError(TempcastError):
    """Bad, missing, or inconsistent input data."""


class GridMismatchError(DataError):
    """Two fields that must share a grid do not."""


class StampMismatchError(DataError):
    """Two fields that must share a time stamp do not."""


class StampGapError(DataError):
    """A required (year, month) stamp is absent from a series."""


class UnknownVariableError(DataError):
    """Requested variable is not present in the dataset."""


class NumericError(TempcastError):
    """Numerical failure (non-finite loss, divergent optimization)."""
