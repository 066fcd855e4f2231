"""Exception hierarchy.

Grouped by how the CLI maps them to exit codes: validation problems
(bad inputs, bad flags, contract violations), provider failures
(embedding backend), and store failures (corrupt or unreadable files).
"""


class FedsError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(FedsError):
    """Caller-supplied data violates a contract."""


class DimensionMismatch(ValidationError):
    pass


class ZeroNormVector(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class AllZeroWeights(ValidationError):
    pass


class MissingWeight(ValidationError):
    pass


class NoClasses(ValidationError):
    pass


class DuplicateId(ValidationError):
    pass


class InconsistentDim(ValidationError):
    pass


class NotTrained(ValidationError):
    pass


class TooFewVectors(ValidationError):
    pass


class BadNprobe(ValidationError):
    pass


class ClassTooSmall(ValidationError):
    pass


class EmptyMatrix(ValidationError):
    pass


class ManifestError(ValidationError):
    """Manifest file fails schema or invariant checks."""


class ProviderError(FedsError):
    """Embedding provider failed."""


class ProviderUnavailable(ProviderError):
    pass


class ProviderBadResponse(ProviderError):
    pass


class ContentRejected(ProviderError):
    pass


class StoreError(FedsError):
    """A store file could not be read or written safely."""


class BadMagic(StoreError):
    pass


class UnsupportedVersion(StoreError):
    pass


class CrcMismatch(StoreError):
    pass


class TruncatedFile(StoreError):
    pass


class BadLabelRef(StoreError):
    pass
