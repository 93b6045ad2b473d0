"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage errors -> 1, data errors -> 2,
numeric failures -> 3.
"""


class HeadFieldError(Exception):
    """Base class for all package errors."""


class DimensionError(HeadFieldError):
    """Operand shapes incompatible with an operation."""


class DomainError(HeadFieldError):
    """Input values outside an operation's mathematical domain."""


class ParameterError(HeadFieldError):
    """Invalid argument value (counts, ranges, mismatched code dims)."""


class MatrixError(HeadFieldError):
    """Singular or otherwise unusable matrix (e.g. non-invertible extrinsics)."""


class ConfigurationError(HeadFieldError):
    """Inconsistent model/run configuration."""


class DataError(HeadFieldError):
    """Dataset or file-level failure (missing file, malformed record)."""


class ManifestError(DataError):
    """Malformed or inconsistent dataset manifest."""


class ChecksumError(DataError):
    """Stored checksum does not match file contents."""


class NumericError(HeadFieldError):
    """Non-finite values where finite ones are required (aborts training)."""
