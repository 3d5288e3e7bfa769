"""Exception types shared across the package."""


class CremboError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(CremboError):
    """Operands have incompatible shapes."""


class NotPositiveDefinite(CremboError):
    """Matrix could not be factorized even after jitter escalation."""


class RankDeficient(CremboError):
    """Matrix columns are not linearly independent within tolerance."""


class InvalidDimensions(CremboError):
    """Requested dimensions violate big_d >= d >= 1."""


class OutOfSearchBox(CremboError):
    """Low-dimensional point lies outside the search box."""


class IndexOutOfRange(CremboError):
    """Embedding index outside {1..K}."""


class OutOfDomain(CremboError):
    """Point lies outside a benchmark function's native domain."""


class StaleState(CremboError):
    """tell() received a pair that is dimensionally invalid for the run."""


class SchemaError(CremboError):
    """Input file does not match the expected schema."""
