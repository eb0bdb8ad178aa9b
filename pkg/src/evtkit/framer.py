"""Accumulation controllers with ping-pong double buffering.

Constant-event mode seals a frame after a fixed event count; constant-time
mode seals on window boundaries aligned to the sensor timestamp axis
(half-open [k*w, (k+1)*w) windows; a boundary-crossing event belongs to the
next frame, and elapsed empty windows emit empty frames so windows partition
the time axis).  Two surface buffers alternate: the retiring buffer is
quantized into the sealed frame, zeroed, and acquisition switches to its
twin.  The 24-bit timestamp counter is unwrapped to 64 bit internally; the
surfaces always see raw 24-bit values.

Multi-channel frames (channels = 2k) slice each frame into k consecutive
event/time bins, stacking k (pos, neg) plane pairs; the timestamp grid runs
continuously across slices.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from evtkit.events import EVENT_DTYPE, Event
from evtkit.geometry import GridGeometry
from evtkit.surfaces import ReprKind, SurfaceConfig, SurfaceState, apply_event, apply_events, quantize_plane

TIME_SPAN = 1 << 24
MAX_ACQUISITION_FPS = 12200


class FramerMode(enum.IntEnum):
    CONSTANT_EVENT = 0
    CONSTANT_TIME = 1


class DropPolicy(enum.Enum):
    BLOCK = "block"
    DROP_FRAME = "drop-frame"


@dataclass(frozen=True)
class FramerConfig:
    mode: FramerMode = FramerMode.CONSTANT_EVENT
    n_events: int = 20000
    window: int = 0  # constant-time window, timestamp ticks
    representation: SurfaceConfig = field(default_factory=SurfaceConfig)
    channels: int = 2
    reset_t_last: bool = False  # zero the timestamp grid at frame swap too
    queue_capacity: int = 8
    drop_policy: DropPolicy = DropPolicy.BLOCK

    def __post_init__(self):
        if self.channels != 1 and self.channels % 2:
            raise ValueError("channels must be 1 or even")
        if self.mode == FramerMode.CONSTANT_EVENT and self.n_events < self.slices:
            raise ValueError("n_events must be >= the slice count")
        if self.mode == FramerMode.CONSTANT_TIME and self.window < self.slices:
            raise ValueError("window must be >= the slice count")

    @property
    def slices(self) -> int:
        return max(1, self.channels // 2)


@dataclass
class Frame:
    """One sealed representation frame; contents never change after sealing."""

    index: int
    channels: np.ndarray  # (C, H, W) uint8
    t_start: int
    t_end: int
    event_count: int
    dropped: bool = False
    partial: bool = False


@dataclass
class FramerStats:
    frames_emitted: int = 0
    frames_dropped: int = 0
    events_integrated: int = 0
    events_while_blocked: int = 0
    holds_input_empty: int = 0
    holds_output_full: int = 0
    partial_frames: int = 0


class Framer:
    """Streaming accumulation controller; single-threaded per instance."""

    def __init__(self, config: FramerConfig, geometry: GridGeometry | None = None):
        self.config = config
        self.geometry = geometry or GridGeometry()
        self.stats = FramerStats()
        self._warn_limits()

        rep = config.representation
        self._buffers = [
            SurfaceState.create(self.geometry.depth, rep.kind, rep.per_polarity_t_last),
            SurfaceState.create(self.geometry.depth, rep.kind, rep.per_polarity_t_last),
        ]
        # Ping-pong twins share the timestamp grid: a single grid persists
        # across frame swaps unless reset_t_last asks otherwise.
        self._buffers[1].t_last = self._buffers[0].t_last
        self._buffers[1].t_last_neg = self._buffers[0].t_last_neg
        self._active = 0

        self._frame_index = 0
        self._count = 0  # events in the current frame
        self._slice_planes: list[np.ndarray] = []
        self._slice_idx = 0
        self._last_raw_t = 0
        self._wraps = 0
        self._window_start = -1  # abs ticks; -1 = no window open yet
        self._frame_t_first = 0
        self._frame_t_last = 0

    def _warn_limits(self):
        cfg = self.config
        depth = (self.geometry.out_width if self.geometry else 128) * (self.geometry.out_height if self.geometry else 128)
        if cfg.mode == FramerMode.CONSTANT_EVENT and cfg.n_events < depth:
            warnings.warn(
                f"n_events={cfg.n_events} below the representation depth {depth}; frames will be sparse",
                stacklevel=3,
            )
        if cfg.mode == FramerMode.CONSTANT_TIME and cfg.window > 0:
            fps = 1_000_000 / cfg.window
            if fps > MAX_ACQUISITION_FPS:
                warnings.warn(
                    f"window={cfg.window} ticks implies {fps:.0f} fps, above the {MAX_ACQUISITION_FPS} fps transfer ceiling",
                    stacklevel=3,
                )

    # -- time handling -----------------------------------------------------

    def _abs_time(self, raw_t: int) -> int:
        if raw_t < self._last_raw_t:
            self._wraps += 1
        self._last_raw_t = raw_t
        return raw_t + (self._wraps << 24)

    # -- sealing -----------------------------------------------------------

    def _snapshot_slice(self) -> None:
        buf = self._buffers[self._active]
        rep = self.config.representation
        self._slice_planes.append(quantize_plane(buf.mem_pos, rep.scale, rep.shift).copy())
        if self.config.channels != 1:
            self._slice_planes.append(quantize_plane(buf.mem_neg, rep.scale, rep.shift).copy())
        buf.zero_mem()
        self._slice_idx += 1

    def _seal(self, t_start: int, t_end: int, partial: bool = False) -> Frame:
        # Snapshot any slices not yet cut (all of them in the 1/2-channel case).
        while self._slice_idx < self.config.slices:
            self._snapshot_slice()
        h, w = self.geometry.out_height, self.geometry.out_width
        planes = np.stack(self._slice_planes).reshape(self.config.channels, h, w)
        frame = Frame(
            index=self._frame_index,
            channels=planes,
            t_start=t_start,
            t_end=t_end,
            event_count=self._count,
            partial=partial,
        )
        if partial:
            self.stats.partial_frames += 1
        # Swap acquisition to the twin; the retired buffer was zeroed by the
        # slice snapshots, so the incoming buffer is always clean.
        if self.config.reset_t_last:
            self._buffers[self._active].t_last[:] = 0
            self._buffers[self._active].t_last_neg[:] = 0
        self._active ^= 1
        self._frame_index += 1
        self._count = 0
        self._slice_idx = 0
        self._slice_planes = []
        return frame

    # -- constant-event mode -------------------------------------------------

    def _event_slice_boundary(self) -> int:
        """Event count at which the next slice ends."""
        n, k = self.config.n_events, self.config.slices
        return (n * (self._slice_idx + 1)) // k

    def _push_const_event(self, ev: np.ndarray, out: list[Frame]) -> None:
        buf_cfg = self.config.representation
        i = 0
        n = len(ev)
        while i < n:
            boundary = self._event_slice_boundary()
            take = min(n - i, boundary - self._count)
            chunk = ev[i : i + take]
            if self._count == 0 and self._slice_idx == 0 and take:
                self._frame_t_first = self._abs_time(int(chunk["t"][0]))
            apply_events(self._buffers[self._active], buf_cfg, chunk, self.geometry)
            self._count += take
            i += take
            if take:
                self._frame_t_last = self._abs_time(int(chunk["t"][-1]))
            if self._count == boundary:
                if self._slice_idx + 1 == self.config.slices and self._count == self.config.n_events:
                    out.append(self._seal(self._frame_t_first, self._frame_t_last))
                else:
                    self._snapshot_slice()

    # -- constant-time mode --------------------------------------------------

    def _slice_edge(self) -> int:
        """Absolute tick at which the current slice ends."""
        w, k = self.config.window, self.config.slices
        return self._window_start + (w * (self._slice_idx + 1)) // k

    def _push_const_time(self, ev: np.ndarray, out: list[Frame]) -> None:
        rep = self.config.representation
        raw_t = ev["t"].astype(np.int64)
        wraps = np.zeros(len(ev), dtype=np.int64)
        if len(ev) > 1:
            np.cumsum(raw_t[1:] < raw_t[:-1], out=wraps[1:])
        first_wrap = 1 if raw_t[0] < self._last_raw_t else 0
        abs_t = raw_t + ((self._wraps + first_wrap + wraps) << 24)
        self._wraps += first_wrap + int(wraps[-1])
        self._last_raw_t = int(raw_t[-1])

        w = self.config.window
        i = 0
        n = len(ev)
        while i < n:
            if self._window_start < 0:
                self._window_start = (int(abs_t[i]) // w) * w
            edge = self._slice_edge()
            cut = int(np.searchsorted(abs_t[i:], edge, side="left")) + i
            chunk = ev[i:cut]
            if len(chunk):
                apply_events(self._buffers[self._active], rep, chunk, self.geometry)
                self._count += len(chunk)
            i = cut
            if i < n:  # an event crossed the slice edge
                if self._slice_idx + 1 == self.config.slices:
                    out.append(self._seal(self._window_start, self._window_start + w))
                    self._window_start += w
                else:
                    self._snapshot_slice()

    def _flush_const_time(self) -> Frame | None:
        if self._count == 0 and self._slice_idx == 0:
            return None
        frame = self._seal(self._window_start, self._window_start + self.config.window, partial=True)
        self._window_start = -1
        return frame

    # -- public API ----------------------------------------------------------

    @property
    def frames_sealed(self) -> int:
        """Total frames sealed so far (emitted plus dropped downstream)."""
        return self._frame_index

    def push_event(self, event: Event) -> list[Frame]:
        """Scalar push; equivalent to a one-event batch."""
        arr = np.empty(1, dtype=EVENT_DTYPE)
        arr[0] = (event.x, event.y, event.p, event.t)
        return self.push_batch(arr)

    def push_batch(self, events: np.ndarray) -> list[Frame]:
        """Integrate a time-ordered batch; returns frames sealed along the way."""
        out: list[Frame] = []
        if len(events) == 0:
            return out
        ev = events.astype(EVENT_DTYPE, copy=False)
        self.stats.events_integrated += len(ev)
        if self.config.mode == FramerMode.CONSTANT_EVENT:
            self._push_const_event(ev, out)
        else:
            self._push_const_time(ev, out)
        return out

    def flush(self) -> Frame | None:
        """Seal a partial frame if any events are pending."""
        if self.config.mode == FramerMode.CONSTANT_TIME:
            return self._flush_const_time()
        if self._count == 0 and self._slice_idx == 0:
            return None
        return self._seal(self._frame_t_first, self._frame_t_last, partial=True)

    def reset(self) -> None:
        """Explicit full reset: zero every grid including timestamps."""
        for buf in self._buffers:
            buf.reset()
        self._count = 0
        self._slice_idx = 0
        self._slice_planes = []
        self._window_start = -1
        self._wraps = 0
        self._last_raw_t = 0
