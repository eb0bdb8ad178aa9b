"""EVT 3.0 16-bit word stream codec.

Decodes raw little-endian word streams into event batches and re-encodes
event batches with vector compaction (the encoder doubles as the round-trip
oracle and fixture generator).  Word layouts are documented bit-exactly in
docs/FORMAT.md; type codes follow the publicly documented EVT 3.0 encoding.

``decode_word`` is the scalar reference fold; ``decode_stream`` is the
vectorized equivalent and is property-tested against the fold.  Malformed or
unknown words are counted and skipped, never fatal: streaming decoders must
survive noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from evtkit.errors import CoordOutOfRangeError, OddLengthError, UnsortedTimestampsError
from evtkit.events import EVENT_DTYPE, Event, empty_events

SENSOR_WIDTH = 1280
SENSOR_HEIGHT = 720
BANK_WIDTH = 32
TIME_MASK = (1 << 24) - 1

# 4-bit event type codes (raw word bits [15:12]).
EVT_ADDR_Y = 0x0
EVT_ADDR_X = 0x2
VECT_BASE_X = 0x3
VECT_12 = 0x4
VECT_8 = 0x5
EVT_TIME_LOW = 0x6
CONTINUED_4 = 0x7
EVT_TIME_HIGH = 0x8
EXT_TRIGGER = 0xA
OTHERS = 0xE
CONTINUED_12 = 0xF

# Recognized codes that carry no CD event payload.
_PASSTHROUGH_CODES = frozenset({CONTINUED_4, OTHERS, CONTINUED_12})


def word_type_code(raw: int) -> int:
    return (raw >> 12) & 0xF


def word_payload(raw: int) -> int:
    return raw & 0xFFF


@dataclass
class DecodeStats:
    """Counters accumulated over one decoded stream."""

    words_consumed: int = 0
    events_emitted: int = 0
    vectorized_events: int = 0
    single_events: int = 0
    trigger_count: int = 0
    unknown_word_count: int = 0
    wrap_count: int = 0


@dataclass
class DecoderState:
    """Mutable latches of the streaming decoder; one per stream."""

    current_y: int = 0
    time_high: int = 0  # upper 12 timestamp bits
    time_low: int = 0  # lower 12 timestamp bits
    vect_base_x: int = 0
    vect_polarity: int = 0
    stats: DecodeStats = field(default_factory=DecodeStats)

    @property
    def current_time(self) -> int:
        return ((self.time_high << 12) | self.time_low) & TIME_MASK


def decode_word(state: DecoderState, raw: int) -> list[Event]:
    """Fold one 16-bit word into the decoder state; returns emitted events.

    Reference scalar path: decode_stream must agree with folding this over
    the word sequence.  Any 16-bit value is accepted.
    """
    code = word_type_code(raw)
    payload = word_payload(raw)
    st = state.stats
    st.words_consumed += 1
    events: list[Event] = []

    if code == EVT_TIME_HIGH:
        if payload < state.time_high:
            st.wrap_count += 1
        state.time_high = payload
    elif code == EVT_TIME_LOW:
        state.time_low = payload
    elif code == EVT_ADDR_Y:
        y = payload & 0x7FF  # bit 11 is the camera-origin flag, ignored
        if y < SENSOR_HEIGHT:
            state.current_y = y
        else:
            st.unknown_word_count += 1
    elif code == EVT_ADDR_X:
        x = payload & 0x7FF
        if x < SENSOR_WIDTH:
            events.append(Event(x, state.current_y, (payload >> 11) & 1, state.current_time))
            st.events_emitted += 1
            st.single_events += 1
        else:
            st.unknown_word_count += 1
    elif code == VECT_BASE_X:
        state.vect_base_x = payload & 0x7FF
        state.vect_polarity = (payload >> 11) & 1
    elif code == VECT_12 or code == VECT_8:
        nbits = 12 if code == VECT_12 else 8
        bits = payload & ((1 << nbits) - 1)
        base = state.vect_base_x
        t = state.current_time
        clipped = False
        for off in range(nbits):
            if bits >> off & 1:
                x = base + off
                if x < SENSOR_WIDTH:
                    events.append(Event(x, state.current_y, state.vect_polarity, t))
                    st.events_emitted += 1
                    st.vectorized_events += 1
                else:
                    clipped = True
        state.vect_base_x = base + nbits
        if clipped:
            st.unknown_word_count += 1
    elif code == EXT_TRIGGER:
        st.trigger_count += 1
    elif code in _PASSTHROUGH_CODES:
        pass
    else:
        st.unknown_word_count += 1
    return events


def decode_stream(data: bytes, state: DecoderState | None = None) -> tuple[np.ndarray, DecodeStats]:
    """Decode a raw word stream; equals folding decode_word over the words.

    Passing a DecoderState decodes a chunk with latch carry-over: the state
    is updated in place (stats accumulate there) and the returned stats
    cover this chunk alone.  Raises OddLengthError when the byte count is
    odd (words are 16-bit).
    """
    from evtkit._kernels import decode_words_kernel

    if len(data) % 2:
        raise OddLengthError(len(data) - 1)
    if len(data) == 0:
        return empty_events(), DecodeStats()

    carry = state if state is not None else DecoderState()
    words = np.frombuffer(data, dtype="<u2")
    code = words >> 12

    # Exact capacity: one event per in-bounds single, one per set vector bit.
    capacity = int((code == EVT_ADDR_X).sum()) + 12 * int((code == VECT_12).sum()) + 8 * int((code == VECT_8).sum())
    out_x = np.empty(capacity, dtype=np.uint16)
    out_y = np.empty(capacity, dtype=np.uint16)
    out_p = np.empty(capacity, dtype=np.uint8)
    out_t = np.empty(capacity, dtype=np.uint32)

    latches = np.array(
        [carry.current_y, carry.time_high, carry.time_low, carry.vect_base_x, carry.vect_polarity],
        dtype=np.int64,
    )
    counters = np.zeros(7, dtype=np.int64)
    n = decode_words_kernel(words, latches, counters, out_x, out_y, out_p, out_t, SENSOR_WIDTH, SENSOR_HEIGHT)

    events = np.empty(n, dtype=EVENT_DTYPE)
    events["x"] = out_x[:n]
    events["y"] = out_y[:n]
    events["p"] = out_p[:n]
    events["t"] = out_t[:n]

    stats = DecodeStats(
        words_consumed=int(counters[0]),
        events_emitted=int(counters[1]),
        vectorized_events=int(counters[2]),
        single_events=int(counters[3]),
        trigger_count=int(counters[4]),
        unknown_word_count=int(counters[5]),
        wrap_count=int(counters[6]),
    )
    if state is not None:
        state.current_y = int(latches[0])
        state.time_high = int(latches[1])
        state.time_low = int(latches[2])
        state.vect_base_x = int(latches[3])
        state.vect_polarity = int(latches[4])
        st = state.stats
        st.words_consumed += stats.words_consumed
        st.events_emitted += stats.events_emitted
        st.vectorized_events += stats.vectorized_events
        st.single_events += stats.single_events
        st.trigger_count += stats.trigger_count
        st.unknown_word_count += stats.unknown_word_count
        st.wrap_count += stats.wrap_count
    return events, stats


def decode_stream_scalar(data: bytes) -> tuple[np.ndarray, DecodeStats]:
    """Plain decode_word fold over a byte stream; oracle for decode_stream."""
    if len(data) % 2:
        raise OddLengthError(len(data) - 1)
    state = DecoderState()
    out: list[Event] = []
    for i in range(0, len(data), 2):
        raw = data[i] | (data[i + 1] << 8)
        out.extend(decode_word(state, raw))
    arr = np.empty(len(out), dtype=EVENT_DTYPE)
    for i, e in enumerate(out):
        arr[i] = (e.x, e.y, e.p, e.t)
    return arr, state.stats


def _validate_encoder_input(ev: np.ndarray) -> None:
    if len(ev) == 0:
        return
    t = ev["t"].astype(np.int64)
    if np.any(t[1:] < t[:-1]):
        bad = int(np.flatnonzero(t[1:] < t[:-1])[0]) + 1
        raise UnsortedTimestampsError(f"timestamp decreases at event {bad}")
    if int(t.max()) > TIME_MASK:
        raise CoordOutOfRangeError("timestamp exceeds 24 bits")
    if int(ev["x"].max()) >= SENSOR_WIDTH or int(ev["y"].max()) >= SENSOR_HEIGHT:
        raise CoordOutOfRangeError("event coordinate outside the sensor grid")
    if int(ev["p"].max()) > 1:
        raise CoordOutOfRangeError("polarity must be 0 or 1")


def encode_events(events) -> bytes:
    """Encode sorted in-bounds events into an EVT 3.0 word stream.

    Time and row words are emitted lazily (only on change).  Runs of two or
    more events sharing (t, y, p) with strictly ascending x inside one
    32-pixel bank become vector-base + vect-12 + vect-12 + vect-8 words;
    isolated events become single-X words.  decode_stream inverts this
    exactly.
    """
    if not isinstance(events, np.ndarray):
        from evtkit.events import events_to_array

        events = events_to_array(events)
    ev = events.astype(EVENT_DTYPE, copy=False)
    if len(ev) == 0:
        return b""
    _validate_encoder_input(ev)

    x = ev["x"].astype(np.int64)
    y = ev["y"].astype(np.int64)
    p = ev["p"].astype(np.int64)
    t = ev["t"].astype(np.int64)
    n = len(ev)
    bank = x >> 5

    new_run = np.ones(n, dtype=bool)
    same = (t[1:] == t[:-1]) & (y[1:] == y[:-1]) & (p[1:] == p[:-1])
    new_run[1:] = ~(same & (bank[1:] == bank[:-1]) & (x[1:] > x[:-1]))
    run_start = np.flatnonzero(new_run)
    run_len = np.diff(np.append(run_start, n))
    nruns = len(run_start)

    ht = t[run_start] >> 12
    lt = t[run_start] & 0xFFF
    hy = y[run_start]
    hp = p[run_start]

    need_high = np.ones(nruns, dtype=bool)
    need_low = np.ones(nruns, dtype=bool)
    need_y = np.ones(nruns, dtype=bool)
    need_high[1:] = ht[1:] != ht[:-1]
    need_low[1:] = lt[1:] != lt[:-1]
    need_y[1:] = hy[1:] != hy[:-1]

    is_vec = run_len >= 2
    addr_words = np.where(is_vec, 4, 1)
    words_per_run = need_high.astype(np.int64) + need_low + need_y + addr_words
    offsets = np.concatenate([[0], np.cumsum(words_per_run)[:-1]])
    out = np.zeros(int(words_per_run.sum()), dtype=np.uint16)

    pos = offsets
    out[pos[need_high]] = (EVT_TIME_HIGH << 12) | ht[need_high]
    pos = pos + need_high
    out[pos[need_low]] = (EVT_TIME_LOW << 12) | lt[need_low]
    pos = pos + need_low
    out[pos[need_y]] = (EVT_ADDR_Y << 12) | hy[need_y]
    pos = pos + need_y

    single = ~is_vec
    out[pos[single]] = (EVT_ADDR_X << 12) | (hp[single] << 11) | x[run_start[single]]

    if is_vec.any():
        # Per-run OR of the 32-bit in-bank occupancy mask.
        mask = np.bitwise_or.reduceat(np.int64(1) << (x & 31), run_start)
        vpos = pos[is_vec]
        vmask = mask[is_vec]
        vbank = bank[run_start[is_vec]]
        vpol = hp[is_vec]
        out[vpos] = (VECT_BASE_X << 12) | (vpol << 11) | (vbank << 5)
        out[vpos + 1] = (VECT_12 << 12) | (vmask & 0xFFF)
        out[vpos + 2] = (VECT_12 << 12) | ((vmask >> 12) & 0xFFF)
        out[vpos + 3] = (VECT_8 << 12) | ((vmask >> 24) & 0xFF)

    return out.astype("<u2").tobytes()
