"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 2, DataError (and
subclasses) -> 3, NumericError -> 4.
"""


class AudiotagError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(AudiotagError):
    """Invalid configuration value or inconsistent experiment setup."""


class DataError(AudiotagError):
    """Problem with input data (files, shapes, sample rates, ...)."""


class ParseError(DataError):
    """Malformed metadata row; message names the offending line."""


class FormatError(DataError):
    """Audio container violates the required format (rate/channels/width)."""


class NumericError(AudiotagError):
    """Non-finite loss or other numerical failure during training."""
