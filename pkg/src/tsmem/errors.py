"""Exception types raised across the package.

Every failure mode that callers are expected to handle gets its own class;
plain ``ValueError`` is reserved for programming errors (bad argument types,
out-of-range parameters).
"""


class TsmemError(Exception):
    """Base class for all package-specific errors."""


# --- ingest -------------------------------------------------------------

class MalformedFilenameError(TsmemError):
    """Filename does not end with the three required integer fields."""


class NonNumericValueError(TsmemError):
    """A token in the series body is not a finite real number."""


class RecordInvariantError(TsmemError):
    """Parsed fields violate the train/anomaly layout invariants."""


class EmptyRegionError(TsmemError):
    """The requested region is too short to hold a single window."""


# --- embeddings and the TREP container ----------------------------------

class ProviderUnavailableError(TsmemError):
    """No embedding provider matches the requested source."""


class DimensionMismatchError(TsmemError):
    """Vector or matrix dimensions do not line up."""


class EmbeddingInvariantError(TsmemError):
    """An embedding matrix has non-finite entries or unordered times."""


class TrepError(TsmemError):
    """Base class for TREP container failures."""


class BadMagicError(TrepError):
    """File does not start with the TREP magic bytes."""


class VersionMismatchError(TrepError):
    """File declares an unsupported container version."""


class TruncatedPayloadError(TrepError):
    """File is shorter than its header promises."""


class ChecksumMismatchError(TrepError):
    """Stored CRC32 does not match the file contents."""


# --- memory bank and scoring ---------------------------------------------

class EmptyBankError(TsmemError):
    """Operation requires a non-empty memory bank."""


class CovarianceSingularError(TsmemError):
    """Covariance could not be fitted or factorized."""


class NoDefinedScoresError(TsmemError):
    """Score series has no defined entries in the test region."""


# --- configuration and orchestration --------------------------------------

class ConfigError(TsmemError):
    """Configuration file or override violates the schema."""


class MissingArtifactError(TsmemError):
    """A required input file (embeddings, bank) does not exist."""

    def __init__(self, missing):
        self.missing = list(missing)
        listing = "\n  ".join(str(p) for p in self.missing)
        super().__init__(f"missing required artifact(s):\n  {listing}")
