"""Exception classes shared across the toolkit.

Each class maps to one CLI exit code (see cli.EXIT_CODES) so scripted callers
can tell error families apart without parsing messages.
"""


class EvtkitError(Exception):
    """Base class for all toolkit errors."""


class OddLengthError(EvtkitError):
    """Raw stream has a trailing odd byte; words are 16-bit."""

    def __init__(self, byte_offset: int):
        self.byte_offset = byte_offset
        super().__init__(f"truncated stream: odd trailing byte at offset {byte_offset}")


class CoordOutOfRangeError(EvtkitError):
    """Event coordinate outside the sensor grid."""


class UnsortedTimestampsError(EvtkitError):
    """Encoder input events are not sorted by timestamp."""


class ZeroDimensionError(EvtkitError):
    """Coordinate map requested with a zero-sized axis."""


class OutOfRangeError(EvtkitError):
    """Input coordinate outside the map's input axis."""


class ShapeMismatchError(EvtkitError):
    """Tensor or layer chain shapes are inconsistent."""


class ChecksumMismatchError(EvtkitError):
    """Weight blob content does not match the manifest checksum."""


class UnsupportedKindError(EvtkitError):
    """Unknown layer or representation kind."""


class SourceError(EvtkitError):
    """Event source failed mid-pipeline; carries the stats gathered so far."""

    def __init__(self, cause: BaseException, stats):
        self.cause = cause
        self.stats = stats
        super().__init__(f"event source failed: {cause}")
