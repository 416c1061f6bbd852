"""Exception hierarchy shared across the package.

Every domain failure derives from :class:`GeoguideError` so callers can catch
one base class; most also derive from ``ValueError`` because they signal bad
inputs rather than broken state.
"""


class GeoguideError(Exception):
    """Base class for all geoguide-specific failures."""


class NonConvergenceError(GeoguideError, RuntimeError):
    """Iterative decomposition kernel failed to converge (pathological input)."""


class FullSpaceError(GeoguideError, ValueError):
    """A subspace spans the whole ambient space, so no complement exists."""


class ZeroMatrixError(GeoguideError, ValueError):
    """A feature batch is numerically zero and spans no subspace."""


class DimensionMismatchError(GeoguideError, ValueError):
    """Operands live in incompatible ambient or subspace dimensions."""


class OutOfRangeError(GeoguideError, ValueError):
    """A scalar parameter lies outside its documented interval."""


class DegenerateProjectionError(GeoguideError, ValueError):
    """A vector is numerically annihilated by the guidance metric."""


class ZeroVectorError(GeoguideError, ValueError):
    """A direction has near-zero norm and cannot be normalized."""


class ZeroActivationError(GeoguideError, ValueError):
    """An encoder produced a near-zero pre-normalization activation."""


class BoxOutOfBoundsError(GeoguideError, ValueError):
    """A crop box does not fit inside the image."""


class DegenerateDirectionError(GeoguideError, ValueError):
    """Two prompts encode to indistinguishable features; no direction exists."""


class ShapeMismatchError(GeoguideError, ValueError):
    """Two images or batches disagree in shape."""


class WindowTooSmallError(GeoguideError, ValueError):
    """An image is smaller than the sliding-window size of a metric."""


class EmptyBatchError(GeoguideError, ValueError):
    """An operation received a batch with no rows."""


class BadMagicError(GeoguideError, ValueError):
    """A binary file does not start with the expected magic bytes."""


class TruncatedPayloadError(GeoguideError, ValueError):
    """A binary file ends before its declared payload is complete."""


class RaggedRowsError(GeoguideError, ValueError):
    """A text matrix has rows of unequal length."""


class CsvParseError(GeoguideError, ValueError):
    """A text matrix contains an unparsable entry."""
