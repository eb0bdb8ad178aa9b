"""Event records and batch containers.

Batches are numpy structured arrays (dtype EVENT_DTYPE, packed little-endian);
the Event dataclass is the scalar view used by unit tests and small APIs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Packed wire-friendly record: 9 bytes per event.
EVENT_DTYPE = np.dtype([("x", "<u2"), ("y", "<u2"), ("p", "u1"), ("t", "<u4")])


@dataclass(frozen=True)
class Event:
    """One decoded sensor event: column, row, polarity, 24-bit microsecond timestamp."""

    x: int
    y: int
    p: int
    t: int


def empty_events() -> np.ndarray:
    return np.empty(0, dtype=EVENT_DTYPE)


def make_events(x, y, p, t) -> np.ndarray:
    """Assemble a batch from per-field sequences."""
    out = np.empty(len(x), dtype=EVENT_DTYPE)
    out["x"] = x
    out["y"] = y
    out["p"] = p
    out["t"] = t
    return out


def events_to_array(events) -> np.ndarray:
    """Accept a list of Event or an already-built batch."""
    if isinstance(events, np.ndarray):
        return events.astype(EVENT_DTYPE, copy=False)
    out = np.empty(len(events), dtype=EVENT_DTYPE)
    for i, e in enumerate(events):
        out[i] = (e.x, e.y, e.p, e.t)
    return out


def array_to_events(arr: np.ndarray) -> list[Event]:
    return [Event(int(r["x"]), int(r["y"]), int(r["p"]), int(r["t"])) for r in arr]


def write_csv(path, arr: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write("x,y,p,t\n")
        np.savetxt(fh, np.column_stack([arr["x"], arr["y"], arr["p"], arr["t"]]), fmt="%d", delimiter=",")


def read_csv(path) -> np.ndarray:
    raw = np.loadtxt(path, dtype=np.int64, delimiter=",", skiprows=1, ndmin=2)
    if raw.size == 0:
        return empty_events()
    return make_events(raw[:, 0], raw[:, 1], raw[:, 2], raw[:, 3])


def write_bin(path, arr: np.ndarray) -> None:
    """Compact binary dump: raw little-endian EVENT_DTYPE records."""
    arr.astype(EVENT_DTYPE, copy=False).tofile(path)


def read_bin(path) -> np.ndarray:
    return np.fromfile(path, dtype=EVENT_DTYPE)
