"""EVF1 frame container: little-endian header + channel-planar payload.

One file holds any number of concatenated frames.  Layout per frame (all
little-endian, no padding):

    magic "EVF1" | u8 version=1 | u16 width | u16 height | u8 channels |
    u8 dtype (0=u8) | u8 representation kind | u8 mode | u32 frame_index |
    u32 t_start | u32 t_end | u32 event_count | payload C*H*W bytes
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterator

import numpy as np

from evtkit.framer import Frame, FramerMode
from evtkit.surfaces import ReprKind

MAGIC = b"EVF1"
VERSION = 1
_HEADER = struct.Struct("<4sBHHBBBBIIII")


@dataclass(frozen=True)
class FrameHeader:
    width: int
    height: int
    channels: int
    dtype: int
    kind: ReprKind
    mode: FramerMode
    frame_index: int
    t_start: int
    t_end: int
    event_count: int


def write_frame(fh: BinaryIO, frame: Frame, kind: ReprKind, mode: FramerMode) -> None:
    c, h, w = frame.channels.shape
    fh.write(
        _HEADER.pack(
            MAGIC,
            VERSION,
            w,
            h,
            c,
            0,
            int(kind),
            int(mode),
            frame.index,
            frame.t_start & 0xFFFFFFFF,
            frame.t_end & 0xFFFFFFFF,
            frame.event_count,
        )
    )
    fh.write(frame.channels.astype(np.uint8, copy=False).tobytes())


def read_frames(fh: BinaryIO) -> Iterator[tuple[FrameHeader, np.ndarray]]:
    """Yield (header, (C,H,W) uint8 array) for each concatenated frame."""
    while True:
        head = fh.read(_HEADER.size)
        if not head:
            return
        if len(head) < _HEADER.size:
            raise ValueError("truncated EVF1 header")
        magic, version, w, h, c, dtype, kind, mode, idx, t0, t1, n = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"bad EVF1 magic {magic!r}")
        if version != VERSION:
            raise ValueError(f"unsupported EVF1 version {version}")
        if dtype != 0:
            raise ValueError(f"unsupported EVF1 dtype {dtype}")
        payload = fh.read(c * h * w)
        if len(payload) < c * h * w:
            raise ValueError("truncated EVF1 payload")
        planes = np.frombuffer(payload, dtype=np.uint8).reshape(c, h, w)
        yield (
            FrameHeader(w, h, c, dtype, ReprKind(kind), FramerMode(mode), idx, t0, t1, n),
            planes,
        )


def read_frames_file(path) -> list[tuple[FrameHeader, np.ndarray]]:
    with open(path, "rb") as fh:
        return list(read_frames(fh))
