"""Exception types shared across the package.

Every error raised by this package derives from MosaicError so callers can
catch the whole family with one clause.  The CLI maps these onto exit codes.
"""


class MosaicError(Exception):
    """Base class for all package errors."""


# --- input / set-system errors -------------------------------------------

class MalformedInput(MosaicError):
    """Input file or document does not match the expected shape."""


class DuplicateId(MosaicError):
    """An element id or set name occurs more than once."""


class UnknownElement(MosaicError):
    """An overlay references an element id that was never declared."""


class PartitionViolation(MosaicError):
    """Base sets fail to partition the element universe."""


class CardinalityMismatch(MosaicError):
    """A contracted assignment does not match the recorded multiplicities."""


# --- grid errors -----------------------------------------------------------

class EmptyRestriction(MosaicError):
    """Restricting a grid to an empty cell set."""


# --- model-building errors -------------------------------------------------

class GridTooSmall(MosaicError):
    """The host grid has fewer cells than elements to place."""


class MissingCenter(MosaicError):
    """A cost table or model needs a center that was not supplied."""


# keep the alternate spelling importable; both appear in downstream code
CenterMissing = MissingCenter


# --- solver errors ----------------------------------------------------------

class SolverError(MosaicError):
    """The backend failed in a way that is not a clean status."""


class Infeasible(MosaicError):
    """The model admits no feasible assignment."""


class NoIncumbent(MosaicError):
    """Time limit hit before any feasible solution was found."""


class NonIntegralSolution(MosaicError):
    """Backend returned a value too far from an integer on an integer var."""


class OccupancyViolation(MosaicError):
    """Decoded assignment reuses a cell or misses a multiplicity."""


class TooLarge(MosaicError):
    """Instance exceeds the exhaustive-search guard."""


# --- metrics errors ----------------------------------------------------------

class EmptyRegion(MosaicError):
    """Geometry of an empty cell set was requested."""


# --- rendering errors ---------------------------------------------------------

class PaletteExhausted(MosaicError):
    """More sets to color than palette entries available."""


class UnknownSet(MosaicError):
    """A set name was requested that the system does not contain."""


class MissingFlows(MosaicError):
    """Kelp-style rendering needs flow data the embedding does not carry."""


class IoError(MosaicError):
    """A file write failed during export."""
