"""Per-event representation updates on 16-bit grids.

Four kinds: binary (override to 255), histogram (saturating count),
SETS (shift-based exponential time surface) and SLTS (shift-based linear
time surface).  SETS/SLTS derive their decay from the gap between the event
timestamp and a per-pixel last-timestamp grid, right-shifted by the decay
parameter tau; with tau=16 the shift equals the upper-byte difference of the
two 24-bit timestamps.

Scalar updates are the reference semantics; apply_events() runs the same
rules through a compiled batch kernel and is tested bit-exact against a
per-pixel replay oracle.  Floating-point ETS/LTS references live here too,
used only for ratio/ordering comparisons, never bit equality.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from evtkit.events import EVENT_DTYPE, Event
from evtkit.geometry import GridGeometry
from evtkit._kernels import apply_batch_kernel

MEM_MAX = 65535
SETS_SHIFT_GUARD = 16  # bounds meaningful shifts of a 16-bit cell


class ReprKind(enum.IntEnum):
    """Representation kinds; values double as the EVF1 header byte."""

    BINARY = 0
    HISTOGRAM = 1
    SETS = 2
    SLTS = 3


REPR_NAMES = {"binary": ReprKind.BINARY, "hist": ReprKind.HISTOGRAM, "sets": ReprKind.SETS, "slts": ReprKind.SLTS}


@dataclass(frozen=True)
class SurfaceConfig:
    """Representation kind plus decay and output-quantizer parameters."""

    kind: ReprKind = ReprKind.SETS
    tau_shift: int = 16
    scale: int = 1
    shift: int = 0
    per_polarity_t_last: bool = False  # split the shared timestamp grid

    def __post_init__(self):
        if self.tau_shift < 1:
            raise ValueError("tau_shift must be >= 1")


@dataclass
class SurfaceState:
    """Per-polarity 16-bit grids plus the 24-bit last-timestamp grid.

    The timestamp grid is shared between polarities by default (a single
    grid serves both planes); per-polarity mode allocates a second one.
    """

    depth: int
    kind: ReprKind
    mem_pos: np.ndarray = field(default=None)  # type: ignore[assignment]
    mem_neg: np.ndarray = field(default=None)  # type: ignore[assignment]
    t_last: np.ndarray = field(default=None)  # type: ignore[assignment]
    t_last_neg: np.ndarray = field(default=None)  # type: ignore[assignment]

    @classmethod
    def create(cls, depth: int, kind: ReprKind, per_polarity_t_last: bool = False) -> "SurfaceState":
        st = cls(depth=depth, kind=kind)
        st.mem_pos = np.zeros(depth, dtype=np.uint16)
        st.mem_neg = np.zeros(depth, dtype=np.uint16)
        st.t_last = np.zeros(depth, dtype=np.uint32)
        st.t_last_neg = np.zeros(depth, dtype=np.uint32) if per_polarity_t_last else st.t_last
        return st

    def mem(self, p: int) -> np.ndarray:
        return self.mem_pos if p else self.mem_neg

    def t_grid(self, p: int) -> np.ndarray:
        return self.t_last if p else self.t_last_neg

    def reset(self) -> None:
        """Zero every cell (the explicit full reset; frame swaps zero mem only)."""
        self.mem_pos[:] = 0
        self.mem_neg[:] = 0
        self.t_last[:] = 0
        self.t_last_neg[:] = 0

    def zero_mem(self) -> None:
        self.mem_pos[:] = 0
        self.mem_neg[:] = 0


def update_binary(state: SurfaceState, addr: int, p: int) -> None:
    state.mem(p)[addr] = 255


def update_histogram(state: SurfaceState, addr: int, p: int) -> None:
    mem = state.mem(p)
    v = int(mem[addr])
    if v < MEM_MAX:
        mem[addr] = v + 1


def compute_shift(t_present: int, t_past: int, tau_shift: int) -> int:
    """Decay shift between two 24-bit timestamps.

    Difference of the tau-shifted values when ordered; when the past value
    is larger the counter has reset, and the present shifted value is used
    alone.  At tau=16 this is exactly the upper-byte difference.
    """
    a = t_present >> tau_shift
    b = t_past >> tau_shift
    return a - b if b <= a else a


def update_sets(state: SurfaceState, addr: int, p: int, shift: int) -> None:
    mem = state.mem(p)
    if shift < SETS_SHIFT_GUARD:
        mem[addr] = min(1 + (int(mem[addr]) >> shift), MEM_MAX)
    else:
        mem[addr] = 1


def update_slts(state: SurfaceState, addr: int, p: int, shift: int) -> None:
    mem = state.mem(p)
    cur = int(mem[addr])
    mem[addr] = min(1 + cur - shift, MEM_MAX) if shift < cur else 1


def apply_event(state: SurfaceState, config: SurfaceConfig, event: Event, geometry: GridGeometry) -> None:
    """Route one event through address generation and the kind-specific update."""
    addr = geometry.event_address(event.x, event.y)
    if config.kind == ReprKind.BINARY:
        update_binary(state, addr, event.p)
    elif config.kind == ReprKind.HISTOGRAM:
        update_histogram(state, addr, event.p)
    else:
        grid = state.t_grid(event.p)
        shift = compute_shift(event.t, int(grid[addr]), config.tau_shift)
        if config.kind == ReprKind.SETS:
            update_sets(state, addr, event.p, shift)
        else:
            update_slts(state, addr, event.p, shift)
        grid[addr] = event.t


def apply_events(state: SurfaceState, config: SurfaceConfig, events: np.ndarray, geometry: GridGeometry) -> None:
    """Batch apply_event through the compiled kernel; bit-equal to the scalar path."""
    if len(events) == 0:
        return
    ev = events.astype(EVENT_DTYPE, copy=False)
    addrs = geometry.event_addresses(ev["x"].astype(np.int64), ev["y"].astype(np.int64))
    apply_batch_kernel(
        int(config.kind),
        config.tau_shift,
        state.mem_pos,
        state.mem_neg,
        state.t_last,
        state.t_last_neg,
        addrs,
        ev["p"].astype(np.uint8),
        ev["t"].astype(np.int64),
    )


def scale_shift_u8(v: int, scale: int, shift: int) -> int:
    """Scale-shift quantizer for one 16-bit value: clamp((v*scale) >> shift, 0, 255)."""
    return max(0, min((v * scale) >> shift, 255))


def quantize_plane(mem: np.ndarray, scale: int, shift: int) -> np.ndarray:
    """Vectorized scale_shift_u8 over a 16-bit plane."""
    return np.clip((mem.astype(np.int64) * scale) >> shift, 0, 255).astype(np.uint8)


def default_histogram_shift(n_events: int, depth: int) -> int:
    """Right shift mapping the expected histogram occupancy below 255.

    shift = max(0, ceil(log2(n_events / depth))); integer-exact search.
    """
    s = 0
    while n_events > depth << s:
        s += 1
    return s


def reference_ets(events, tau_float: float, geometry: GridGeometry, per_polarity_t_last: bool = False) -> np.ndarray:
    """Float exponential time surface oracle, decay e^(-dt/tau_float).

    Returns a (2, depth) float64 array; mirrors the event-driven integer
    semantics (value decays at update time using the pixel's shared last
    timestamp, then gains one).
    """
    grid = np.zeros((2, geometry.depth), dtype=np.float64)
    t_last = [np.zeros(geometry.depth), np.zeros(geometry.depth)]
    if not per_polarity_t_last:
        t_last[1] = t_last[0]
    for e in _iter_events(events):
        addr = geometry.event_address(e.x, e.y)
        dt = e.t - t_last[e.p][addr]
        if dt < 0:
            dt = float(e.t)
        grid[e.p, addr] = grid[e.p, addr] * math.exp(-dt / tau_float) + 1.0
        t_last[e.p][addr] = e.t
    return grid


def reference_lts(events, tau_shift: int, geometry: GridGeometry, per_polarity_t_last: bool = False) -> np.ndarray:
    """Float linear time surface oracle: decrement dt / 2^tau, floor 0, +1 per event."""
    grid = np.zeros((2, geometry.depth), dtype=np.float64)
    t_last = [np.zeros(geometry.depth), np.zeros(geometry.depth)]
    if not per_polarity_t_last:
        t_last[1] = t_last[0]
    scale = float(1 << tau_shift)
    for e in _iter_events(events):
        addr = geometry.event_address(e.x, e.y)
        dt = e.t - t_last[e.p][addr]
        if dt < 0:
            dt = float(e.t)
        grid[e.p, addr] = max(0.0, grid[e.p, addr] - dt / scale) + 1.0
        t_last[e.p][addr] = e.t
    return grid


def default_tau_float(tau_shift: int) -> float:
    """Decay constant of the exponential surface a given shift approximates."""
    return (1 << tau_shift) / math.log(2.0)


def _iter_events(events):
    if isinstance(events, np.ndarray):
        return (Event(int(r["x"]), int(r["y"]), int(r["p"]), int(r["t"])) for r in events)
    return iter(events)
