"""Exception hierarchy shared across the package."""


class McncError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(McncError, ValueError):
    """Tensor extents do not conform for the requested operation."""


class ConfigError(McncError, ValueError):
    """Invalid configuration value (unknown activation, zero width, ...)."""


class DataError(McncError, ValueError):
    """Invalid data fed to an operation (label out of range, unequal sample counts)."""


class StructuralError(McncError, ValueError):
    """Compressed-model pieces are mutually inconsistent."""


class NumericError(McncError, ArithmeticError):
    """Non-finite values where finite ones are required."""


class TapeError(McncError, RuntimeError):
    """Autodiff graph misuse, e.g. running backward twice on the same root."""


class DegenerateInputError(McncError, ValueError):
    """Input that makes the operation meaningless (zero-norm row, all-zero batch)."""


class DivergenceError(McncError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class FormatError(McncError, ValueError):
    """Malformed file on disk."""


class CrcMismatchError(FormatError):
    """Stored checksum does not match the file contents."""


class UnsupportedVersionError(FormatError):
    """File written by a newer format revision."""
