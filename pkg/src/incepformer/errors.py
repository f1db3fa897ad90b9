"""Exception hierarchy shared across the package.

The CLI maps each family onto a process exit code.
"""


class IncepFormerError(Exception):
    """Base class for all package errors."""


class ConfigError(IncepFormerError, ValueError):
    """Invalid configuration or parameter value."""


class DimensionError(IncepFormerError, ValueError):
    """Tensor shapes do not line up."""


class DataError(IncepFormerError):
    """Input data is missing, inconsistent, or out of range."""


class ChannelLookupError(DataError, KeyError):
    def __init__(self, channel: str):
        super().__init__(channel)
        self.channel = channel

    def __str__(self) -> str:
        return f"channel {self.channel!r} not found in recording"


class EpochError(DataError):
    def __init__(self, message: str, trial: int | None = None):
        super().__init__(message)
        self.trial = trial


class ArchiveFormatError(DataError):
    """Malformed manifest or payload on disk."""


class NumericalError(IncepFormerError, ArithmeticError):
    """Divergence, NaN, or an ill-conditioned computation."""
