"""evtkit: streaming event-camera processing toolkit.

Decodes raw EVT 3.0 sensor streams, downsamples them through a LUT-based
coordinate map, accumulates shift-based time surfaces (and binary/histogram
frames) in constant-event or constant-time mode with ping-pong buffering,
quantizes frames to 8 bit, and runs int8 CNN inference on the result.
"""

from evtkit.errors import (
    ChecksumMismatchError,
    CoordOutOfRangeError,
    OddLengthError,
    OutOfRangeError,
    ShapeMismatchError,
    SourceError,
    UnsortedTimestampsError,
    UnsupportedKindError,
    ZeroDimensionError,
)

__version__ = "0.1.0"

__all__ = [
    "ChecksumMismatchError",
    "CoordOutOfRangeError",
    "OddLengthError",
    "OutOfRangeError",
    "ShapeMismatchError",
    "SourceError",
    "UnsortedTimestampsError",
    "UnsupportedKindError",
    "ZeroDimensionError",
    "__version__",
]
