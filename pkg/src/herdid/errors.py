"""Exception hierarchy. Every error carries a machine-parsable category string."""


class HerdError(Exception):
    """Base class; `category` is the stable machine-readable error kind."""

    category = "error"


class UsageError(HerdError):
    category = "usage"


class ConfigError(HerdError):
    category = "config"


class FormatError(HerdError):
    """Bad magic, unsorted records, or other container-format violations."""

    category = "format"


class LengthError(HerdError):
    """Truncated payload relative to the header-declared size."""

    category = "length"


class DataError(HerdError):
    """Non-finite values, out-of-range labels, or otherwise invalid content."""

    category = "data"


class DuplicateRecordError(HerdError):
    category = "duplicate-record"


class InvariantError(HerdError):
    category = "invariant"


class DimensionError(HerdError):
    category = "dimension"


class ShapeError(HerdError):
    category = "shape"


class InsufficientDataError(HerdError):
    category = "insufficient-data"


class BatchSizeError(HerdError):
    category = "batch-size"


class DegenerateFeatureError(HerdError):
    category = "degenerate-feature"


class EmptyPositiveError(HerdError):
    category = "empty-positive"


class CoverageError(HerdError):
    category = "coverage"
