"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataFormatError -> 2,
anything else raised by the toolkit -> 3.
"""


class AcroexError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(AcroexError):
    """Bad usage: unknown config keys, inconsistent settings, missing flags."""


class DataFormatError(AcroexError):
    """Malformed or inconsistent input data or binary files."""


class TrainingError(AcroexError):
    """Runtime failure inside the training loop."""


class NonFiniteLossError(TrainingError):
    """Loss became NaN or infinite; message carries batch diagnostics."""
