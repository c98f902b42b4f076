"""Exception types shared across the package."""


class HomsimError(Exception):
    """Base class for all package errors."""


class ValidationError(HomsimError):
    """A parameter or input violates a documented precondition."""


class GridError(ValidationError):
    """A sampling grid is too coarse or too short for the requested object."""


class FilterRejectionError(ValidationError):
    """A spectral filter rejected (essentially) all of the input state."""


class ConfigError(ValidationError):
    """A run configuration file or object is malformed."""


class TagFormatError(HomsimError):
    """A time-tag stream violates the on-disk format contract."""

    def __init__(self, message: str, byte_offset: int | None = None):
        if byte_offset is not None:
            message = f"{message} (byte offset {byte_offset})"
        super().__init__(message)
        self.byte_offset = byte_offset


class FitConvergenceError(HomsimError):
    """A least-squares fit failed to converge or is degenerate."""
