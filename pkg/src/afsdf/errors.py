"""Exception hierarchy for the afsdf package.

Every anticipated failure raises a subclass of :class:`AfsdfError` with a
one-line message naming the offending input, which the CLI converts into a
clean diagnostic and a non-zero exit code.
"""


class AfsdfError(Exception):
    """Base class for all afsdf errors."""


class DataError(AfsdfError):
    """Malformed or unusable input data (CSV parsing, schema, label issues)."""


class DimensionError(AfsdfError):
    """Shape/width mismatch between fitted state and supplied data."""


class FoldError(AfsdfError):
    """Invalid cross-validation request (bad k, class too small, ...)."""


class MetricError(AfsdfError):
    """Undefined metric (zero denominator, non-binary labels, ...)."""


class ArchiveError(AfsdfError):
    """Model archive cannot be read or verified."""


class ArchiveVersionError(ArchiveError):
    """Archive format version is not supported by this build."""


class ArchiveChecksumError(ArchiveError):
    """Archive content does not match its recorded checksum."""
