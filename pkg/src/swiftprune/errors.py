"""Exception hierarchy. Every error raised by the package derives from
SwiftPruneError so callers can catch at one level; the CLI maps subclasses
to exit codes (config/dimension -> 2, file format -> 3, numerical -> 4).
"""


class SwiftPruneError(Exception):
    """Base class for all swiftprune errors."""


class ConfigError(SwiftPruneError):
    """Invalid run configuration: unknown key, out-of-range value, bad syntax."""


class DimensionError(SwiftPruneError):
    """Shapes of weights / calibration / masks do not line up."""


class DomainError(SwiftPruneError):
    """Mathematical precondition violated (e.g. non-positive calibration energy)."""


class FormatError(SwiftPruneError):
    """A file does not conform to its declared binary or text layout."""


class TruncationError(FormatError):
    """A file ends before its declared payload is complete."""


class DataError(SwiftPruneError):
    """Payload decoded but contents are invalid (non-finite values, duplicates)."""


class StructureError(SwiftPruneError):
    """An N:M constraint is violated by a mask or packed representation."""


class NumericalError(SwiftPruneError):
    """A numerical guard escalated: non-finite score or failed factorization."""
