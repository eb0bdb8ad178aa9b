"""Synthetic stream generators: determinism, counts, round trips."""

import numpy as np
import pytest

from evtkit.codec import decode_stream
from evtkit.synth import PATTERNS, SynthSpec, synthesize, synthesize_stream


class TestDeterminism:
    @pytest.mark.parametrize("pattern", PATTERNS)
    def test_same_seed_same_bytes(self, pattern):
        spec = SynthSpec(pattern=pattern, rate=200_000, duration=0.05, seed=11)
        raw1, side1 = synthesize_stream(spec)
        raw2, side2 = synthesize_stream(spec)
        assert raw1 == raw2
        assert side1 == side2

    def test_different_seed_differs(self):
        a, _ = synthesize_stream(SynthSpec(pattern="uniform-noise", rate=100_000, duration=0.05, seed=1))
        b, _ = synthesize_stream(SynthSpec(pattern="uniform-noise", rate=100_000, duration=0.05, seed=2))
        assert a != b


class TestGroundTruth:
    def test_exact_event_count(self):
        _, sidecar = synthesize_stream(SynthSpec(pattern="moving-bar", rate=1_000_000, duration=0.1, seed=0))
        assert sidecar["event_count"] == 100_000

    @pytest.mark.parametrize("pattern", PATTERNS)
    def test_decode_matches_sidecar(self, pattern):
        raw, sidecar = synthesize_stream(SynthSpec(pattern=pattern, rate=300_000, duration=0.05, seed=3))
        events, stats = decode_stream(raw)
        assert len(events) == sidecar["event_count"]
        assert stats.unknown_word_count == 0
        counts = np.histogram(
            events["t"],
            bins=np.arange(0, 50_000 + sidecar["window_ticks"], sidecar["window_ticks"]),
        )[0]
        assert counts.tolist() == sidecar["window_counts"]

    def test_events_sorted_and_in_bounds(self):
        for pattern in PATTERNS:
            ev, _ = synthesize(SynthSpec(pattern=pattern, rate=100_000, duration=0.02, seed=5))
            assert np.all(np.diff(ev["t"].astype(np.int64)) >= 0)
            assert ev["x"].max() < 1280 and ev["y"].max() < 720

    def test_moving_bar_compacts(self):
        raw, sidecar = synthesize_stream(SynthSpec(pattern="moving-bar", rate=1_000_000, duration=0.05, seed=0))
        # full banks: far below the naive 8 bytes per event
        assert sidecar["byte_length"] < sidecar["event_count"]

    def test_unknown_pattern_rejected(self):
        with pytest.raises(ValueError):
            synthesize(SynthSpec(pattern="sparkles", rate=1000, duration=0.01, seed=0))

    def test_duration_over_timestamp_range_rejected(self):
        with pytest.raises(ValueError):
            synthesize(SynthSpec(pattern="uniform-noise", rate=1000, duration=20.0, seed=0))
