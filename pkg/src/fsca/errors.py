"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, OSError -> 3,
FormatError / ShapeError -> 4.
"""


class FscaError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(FscaError):
    """Invalid, inconsistent, or unknown configuration values."""


class FormatError(FscaError):
    """A file (WAV, checkpoint, ...) does not match its declared format."""


class ShapeError(FscaError):
    """Array arguments have inconsistent shapes or sizes."""
