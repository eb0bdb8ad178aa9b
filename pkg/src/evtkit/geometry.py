"""LUT-based coordinate downsampling and row-major address generation.

The sensor grid (default 1280x720) is mapped onto the representation grid
(default 128x128) through per-axis lookup tables holding a one-bit slope and
an integer bias per input coordinate.  The realized mapping is floor scaling:
``out = floor(i * out_dim / in_dim)``.  The hardware stores coordinates in a
fixed-point form and recovers them with a shift; here the LUT contract is
pinned by its end-to-end effect instead, and the slope bit survives as the
identity branch (``m=1, b=0``) used when no downsampling is needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from evtkit.errors import OutOfRangeError, ZeroDimensionError


@dataclass(frozen=True)
class MapLut:
    """Per-axis slope/bias lookup realizing the downsample mapping."""

    in_dim: int
    out_dim: int
    m: np.ndarray  # uint8, values in {0, 1}, length in_dim
    b: np.ndarray  # uint16, values < out_dim, length in_dim

    def __post_init__(self):
        assert len(self.m) == self.in_dim and len(self.b) == self.in_dim


def build_map(in_dim: int, out_dim: int) -> MapLut:
    """Build the LUT for one axis.

    Uses the bias-only branch (m=0) with ``b[i] = floor(i * out_dim / in_dim)``
    except for the identity case ``in_dim == out_dim``, which exercises the
    slope branch with m=1, b=0.
    """
    if in_dim <= 0 or out_dim <= 0:
        raise ZeroDimensionError(f"map dimensions must be positive, got {in_dim}->{out_dim}")
    if out_dim > in_dim:
        raise ZeroDimensionError(f"upsampling map not supported, got {in_dim}->{out_dim}")
    i = np.arange(in_dim, dtype=np.int64)
    if in_dim == out_dim:
        m = np.ones(in_dim, dtype=np.uint8)
        b = np.zeros(in_dim, dtype=np.uint16)
    else:
        m = np.zeros(in_dim, dtype=np.uint8)
        b = ((i * out_dim) // in_dim).astype(np.uint16)
    return MapLut(in_dim=in_dim, out_dim=out_dim, m=m, b=b)


def map_coord(lut: MapLut, i: int) -> int:
    """Map one input coordinate through the LUT (mux on the slope bit)."""
    if not 0 <= i < lut.in_dim:
        raise OutOfRangeError(f"coordinate {i} outside [0, {lut.in_dim})")
    if lut.m[i]:
        return i + int(lut.b[i])
    return int(lut.b[i])


def map_coords(lut: MapLut, coords: np.ndarray) -> np.ndarray:
    """Vectorized map_coord for event batches; callers guarantee bounds."""
    b = lut.b[coords].astype(np.int64)
    m = lut.m[coords].astype(np.int64)
    return m * coords + b


def address(x_out: int, y_out: int, out_width: int) -> int:
    """Row-major memory index; a left shift when out_width is a power of two."""
    if out_width & (out_width - 1) == 0:
        return (y_out << out_width.bit_length() - 1) + x_out
    return y_out * out_width + x_out


@dataclass(frozen=True)
class GridGeometry:
    """Sensor-to-representation grid mapping for both axes."""

    in_width: int = 1280
    in_height: int = 720
    out_width: int = 128
    out_height: int = 128
    x_lut: MapLut = field(default=None)  # type: ignore[assignment]
    y_lut: MapLut = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.x_lut is None:
            object.__setattr__(self, "x_lut", build_map(self.in_width, self.out_width))
        if self.y_lut is None:
            object.__setattr__(self, "y_lut", build_map(self.in_height, self.out_height))

    @property
    def depth(self) -> int:
        return self.out_width * self.out_height

    def event_address(self, x_in: int, y_in: int) -> int:
        return address(map_coord(self.x_lut, x_in), map_coord(self.y_lut, y_in), self.out_width)

    def event_addresses(self, x_in: np.ndarray, y_in: np.ndarray) -> np.ndarray:
        """Vectorized address computation for event batches."""
        x_out = map_coords(self.x_lut, x_in)
        y_out = map_coords(self.y_lut, y_in)
        return y_out * self.out_width + x_out
