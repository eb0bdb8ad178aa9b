"""Bounded-queue pipeline: backpressure, drop accounting, stage equivalence."""

import queue
import threading

import numpy as np
import pytest

from conftest import random_events

from evtkit.codec import encode_events
from evtkit.errors import SourceError
from evtkit.framer import DropPolicy, Framer, FramerConfig, FramerMode
from evtkit.models import fixture_model
from evtkit.pipeline import run_inference_pipeline, run_pipeline
from evtkit.surfaces import ReprKind, SurfaceConfig


def make_framer(geometry, n=500, policy=DropPolicy.BLOCK):
    config = FramerConfig(
        mode=FramerMode.CONSTANT_EVENT,
        n_events=n,
        representation=SurfaceConfig(kind=ReprKind.SETS),
        drop_policy=policy,
    )
    return Framer(config, geometry)


class TestRunPipeline:
    def test_large_capacity_drops_nothing(self, rng, geometry):
        framer = make_framer(geometry)
        sink = queue.Queue(maxsize=1000)
        stats = run_pipeline([random_events(rng, 2600)], framer, sink)
        assert stats.frames_dropped == 0
        assert stats.frames_emitted == 6  # 5 full + flushed partial
        assert sink.qsize() == 6

    def test_capacity_one_dropframe_accounting(self, rng, geometry):
        # no consumer: the first frame occupies the queue, the rest drop
        framer = make_framer(geometry, policy=DropPolicy.DROP_FRAME)
        sink = queue.Queue(maxsize=1)
        stats = run_pipeline([random_events(rng, 5000)], framer, sink)
        sealed = stats.frames_emitted + stats.frames_dropped
        assert sealed == 10
        assert stats.frames_emitted == 1 and stats.frames_dropped == 9

    def test_conservation_under_drops(self, rng, geometry):
        framer = make_framer(geometry, policy=DropPolicy.DROP_FRAME)
        sink = queue.Queue(maxsize=1)
        collected = []

        def consumer():
            while True:
                f = sink.get()
                if f is None:
                    return
                collected.append(f)

        t = threading.Thread(target=consumer)
        t.start()
        batches = [random_events(rng, 1000) for _ in range(8)]
        stats = run_pipeline(batches, framer, sink)
        sink.put(None)
        t.join()
        total_events = stats.events_integrated
        assert total_events == 8000
        # dropped frames carry their event_count; emitted ones were consumed
        dropped_events = 16 * 500 - sum(f.event_count for f in collected)
        assert stats.frames_dropped * 500 == dropped_events

    def test_block_policy_waits_for_consumer(self, rng, geometry):
        framer = make_framer(geometry, policy=DropPolicy.BLOCK)
        sink = queue.Queue(maxsize=1)
        collected = []
        done = threading.Event()

        def consumer():
            while not done.is_set() or not sink.empty():
                try:
                    collected.append(sink.get(timeout=0.05))
                except queue.Empty:
                    pass

        t = threading.Thread(target=consumer)
        t.start()
        stats = run_pipeline([random_events(rng, 4000)], framer, sink)
        done.set()
        t.join()
        assert stats.frames_dropped == 0
        assert stats.frames_emitted == 8
        assert len(collected) == 8

    def test_empty_batches_count_input_holds(self, rng, geometry):
        framer = make_framer(geometry)
        sink = queue.Queue(maxsize=10)
        stats = run_pipeline([random_events(rng, 100), np.empty(0, framer_dtype()), random_events(rng, 100)], framer, sink)
        assert stats.holds_input_empty == 1
        assert stats.events_integrated == 200

    def test_empty_source_all_zero_stats(self, geometry):
        framer = make_framer(geometry)
        sink = queue.Queue(maxsize=4)
        stats = run_pipeline([], framer, sink)
        assert stats.frames_emitted == 0 and stats.frames_dropped == 0
        assert stats.events_integrated == 0
        assert stats.holds_input_empty >= 0
        assert sink.empty()

    def test_source_error_carries_partial_stats(self, rng, geometry):
        framer = make_framer(geometry)
        sink = queue.Queue(maxsize=10)

        def bad_source():
            yield random_events(rng, 600)
            raise OSError("sensor unplugged")

        with pytest.raises(SourceError) as exc:
            run_pipeline(bad_source(), framer, sink)
        assert exc.value.stats.events_integrated == 600
        assert isinstance(exc.value.cause, OSError)


def framer_dtype():
    from evtkit.events import EVENT_DTYPE

    return EVENT_DTYPE


class TestInferencePipeline:
    def test_threaded_equals_sequential(self, rng, geometry):
        ev = random_events(rng, 30000, t_max=200_000)
        raw = encode_events(ev)
        model = fixture_model()

        f1 = make_framer(geometry, n=10000)
        seq = run_inference_pipeline(raw, f1, model, single_thread=True)
        f2 = make_framer(geometry, n=10000)
        par = run_inference_pipeline(raw, f2, model, single_thread=False)

        assert seq.predictions == par.predictions
        assert all(np.array_equal(a, b) for a, b in zip(seq.logits, par.logits))
        assert seq.frames == par.frames == 3
        assert seq.events == par.events == 30000

    def test_frames_only_pipeline(self, rng, geometry):
        ev = random_events(rng, 5000)
        raw = encode_events(ev)
        framer = make_framer(geometry, n=1000)
        res = run_inference_pipeline(raw, framer, model=None)
        assert res.frames == 5
        assert res.predictions == []
        assert res.decode_stats.events_emitted == 5000
