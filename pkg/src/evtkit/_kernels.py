"""Compiled per-event and per-word kernels.

The surface batch kernel reproduces the scalar update rules from
surfaces.py exactly; the decode kernel reproduces the decode_word fold from
codec.py exactly.  Both are pinned bit-exact against their scalar oracles
in the test suite.  nogil lets pipeline stages overlap.
"""

from __future__ import annotations

import numba
import numpy as np

_KIND_BINARY = 0
_KIND_HISTOGRAM = 1
_KIND_SETS = 2
_KIND_SLTS = 3

# decode state slots
_ST_Y = 0
_ST_HI = 1
_ST_LO = 2
_ST_BASE = 3
_ST_POL = 4

# decode stats slots
_CNT_WORDS = 0
_CNT_EVENTS = 1
_CNT_VECT = 2
_CNT_SINGLE = 3
_CNT_TRIGGER = 4
_CNT_UNKNOWN = 5
_CNT_WRAP = 6


@numba.njit(cache=True, nogil=True)
def decode_words_kernel(words, state, stats, out_x, out_y, out_p, out_t, width, height):
    """One pass over 16-bit words; fills event arrays, returns the count."""
    n = 0
    y = state[_ST_Y]
    hi = state[_ST_HI]
    lo = state[_ST_LO]
    base = state[_ST_BASE]
    pol = state[_ST_POL]
    for i in range(words.shape[0]):
        w = np.int64(words[i])
        code = w >> 12
        payload = w & 0xFFF
        if code == 0x2:  # single X
            x = payload & 0x7FF
            if x < width:
                out_x[n] = x
                out_y[n] = y
                out_p[n] = (payload >> 11) & 1
                out_t[n] = (hi << 12) | lo
                n += 1
                stats[_CNT_SINGLE] += 1
            else:
                stats[_CNT_UNKNOWN] += 1
        elif code == 0x4 or code == 0x5:  # 12- / 8-wide vectors
            nbits = 12 if code == 0x4 else 8
            bits = payload & ((np.int64(1) << nbits) - 1)
            t = (hi << 12) | lo
            clipped = False
            for off in range(nbits):
                if (bits >> off) & 1:
                    x = base + off
                    if x < width:
                        out_x[n] = x
                        out_y[n] = y
                        out_p[n] = pol
                        out_t[n] = t
                        n += 1
                        stats[_CNT_VECT] += 1
                    else:
                        clipped = True
            base += nbits
            if clipped:
                stats[_CNT_UNKNOWN] += 1
        elif code == 0x6:  # time low
            lo = payload
        elif code == 0x8:  # time high
            if payload < hi:
                stats[_CNT_WRAP] += 1
            hi = payload
        elif code == 0x0:  # row address
            yy = payload & 0x7FF
            if yy < height:
                y = yy
            else:
                stats[_CNT_UNKNOWN] += 1
        elif code == 0x3:  # vector base
            base = payload & 0x7FF
            pol = (payload >> 11) & 1
        elif code == 0xA:  # external trigger
            stats[_CNT_TRIGGER] += 1
        elif code == 0x7 or code == 0xE or code == 0xF:  # continued/others
            pass
        else:
            stats[_CNT_UNKNOWN] += 1
    stats[_CNT_WORDS] += words.shape[0]
    stats[_CNT_EVENTS] += n
    state[_ST_Y] = y
    state[_ST_HI] = hi
    state[_ST_LO] = lo
    state[_ST_BASE] = base
    state[_ST_POL] = pol
    return n


@numba.njit(cache=True, nogil=True)
def apply_batch_kernel(kind, tau, mem_pos, mem_neg, t_last_pos, t_last_neg, addrs, ps, ts):
    for i in range(addrs.shape[0]):
        a = addrs[i]
        positive = ps[i] == 1
        if kind == _KIND_BINARY:
            if positive:
                mem_pos[a] = 255
            else:
                mem_neg[a] = 255
        elif kind == _KIND_HISTOGRAM:
            if positive:
                v = mem_pos[a]
                if v < 65535:
                    mem_pos[a] = v + 1
            else:
                v = mem_neg[a]
                if v < 65535:
                    mem_neg[a] = v + 1
        else:
            t = ts[i]
            grid = t_last_pos if positive else t_last_neg
            hi = t >> tau
            lo = np.int64(grid[a]) >> tau
            shift = hi - lo if lo <= hi else hi
            mem = mem_pos if positive else mem_neg
            if kind == _KIND_SETS:
                if shift < 16:
                    v = 1 + (np.int64(mem[a]) >> shift)
                    if v > 65535:
                        v = 65535
                else:
                    v = np.int64(1)
                mem[a] = v
            else:
                cur = np.int64(mem[a])
                if shift < cur:
                    v = 1 + cur - shift
                    if v > 65535:
                        v = 65535
                else:
                    v = np.int64(1)
                mem[a] = v
            grid[a] = t
