"""Staged streaming: source -> framer -> bounded sink, with backpressure.

Block policy holds the producer until the sink drains (mirroring the
hardware hold state on a full FIFO); drop-frame policy discards whole
sealed frames, never individual events, so conservation stays checkable:
events_integrated == sum of event_count over emitted+dropped frames.

run_inference_pipeline chains decode -> frame -> infer either sequentially
or as three threads over bounded queues; with the block policy both paths
produce identical predictions.
"""

from __future__ import annotations

import queue
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from evtkit.codec import DecoderState, decode_stream
from evtkit.errors import SourceError
from evtkit.framer import DropPolicy, Framer, FramerStats
from evtkit.inference import QuantizedModel, infer

DECODE_CHUNK_WORDS = 1 << 16


def run_pipeline(source, framer: Framer, sink, drop_policy: DropPolicy | None = None, dropped_out: list | None = None) -> FramerStats:
    """Drive event batches from source through the framer into a bounded sink.

    source yields event batches (empty batches count as input-empty holds);
    sink is queue.Queue-like.  Dropped frames land in dropped_out when a
    list is supplied, keeping event conservation checkable.  Returns the
    framer's stats after exhausting the source and flushing the partial
    frame.
    """
    policy = drop_policy or framer.config.drop_policy
    stats = framer.stats
    iterator = iter(source)
    while True:
        try:
            batch = next(iterator)
        except StopIteration:
            break
        except Exception as exc:  # noqa: BLE001 - wrapped with partial stats
            raise SourceError(exc, stats) from exc
        if batch is None or len(batch) == 0:
            stats.holds_input_empty += 1
            continue
        if sink.full():
            stats.events_while_blocked += len(batch)
        for frame in framer.push_batch(batch):
            _emit(frame, sink, policy, stats, dropped_out)
    tail = framer.flush()
    if tail is not None:
        _emit(tail, sink, policy, stats, dropped_out)
    return stats


def _emit(frame, sink, policy: DropPolicy, stats: FramerStats, dropped_out: list | None = None) -> None:
    if policy == DropPolicy.DROP_FRAME:
        try:
            sink.put_nowait(frame)
            stats.frames_emitted += 1
        except queue.Full:
            frame.dropped = True
            stats.frames_dropped += 1
            if dropped_out is not None:
                dropped_out.append(frame)
    else:
        if sink.full():
            stats.holds_output_full += 1
        sink.put(frame)
        stats.frames_emitted += 1


@dataclass
class PipelineResult:
    predictions: list[tuple[int, int]] = field(default_factory=list)  # (frame_index, class_id)
    logits: list[np.ndarray] = field(default_factory=list)
    frames: int = 0
    events: int = 0
    stage_seconds: dict = field(default_factory=dict)
    stage_ms: dict = field(default_factory=dict)  # per-batch/frame wall samples
    wall_seconds: float = 0.0
    framer_stats: FramerStats | None = None
    decode_stats: dict | None = None
    kept_frames: list | None = None  # populated when keep_frames is requested


def _chunks(data: bytes, words_per_chunk: int):
    step = 2 * words_per_chunk
    for off in range(0, len(data), step):
        yield data[off : off + step]


def run_inference_pipeline(
    raw: bytes,
    framer: Framer,
    model: QuantizedModel | None,
    queue_capacity: int = 8,
    drop_policy: DropPolicy = DropPolicy.BLOCK,
    single_thread: bool = False,
    skip_zero: bool = True,
    keep_frames: bool = False,
) -> PipelineResult:
    """Decode raw words, frame them, optionally classify every frame."""
    if single_thread or keep_frames:
        res = _run_sequential(raw, framer, model, skip_zero, keep_frames)
        return res
    return _run_threaded(raw, framer, model, queue_capacity, drop_policy, skip_zero)


def _run_sequential(raw, framer, model, skip_zero, keep_frames=False) -> PipelineResult:
    res = PipelineResult()
    t0 = time.perf_counter()
    state = DecoderState()
    frames = []
    t_dec = t_frame = t_inf = 0.0
    dec_samples, frame_samples, inf_samples = [], [], []
    for chunk in _chunks(raw, DECODE_CHUNK_WORDS):
        s = time.perf_counter()
        events, _ = decode_stream(chunk, state)
        d = time.perf_counter() - s
        t_dec += d
        dec_samples.append(d * 1e3)
        s = time.perf_counter()
        sealed = framer.push_batch(events)
        d = time.perf_counter() - s
        t_frame += d
        frame_samples.append(d * 1e3)
        frames.extend(sealed)
    tail = framer.flush()
    if tail is not None:
        frames.append(tail)
    framer.stats.frames_emitted += len(frames)
    if model is not None:
        for frame in frames:
            s = time.perf_counter()
            cls, logits = infer(model, frame.channels, skip_zero)
            d = time.perf_counter() - s
            t_inf += d
            inf_samples.append(d * 1e3)
            res.predictions.append((frame.index, cls))
            res.logits.append(logits)
    res.frames = len(frames)
    res.events = state.stats.events_emitted
    res.wall_seconds = time.perf_counter() - t0
    res.stage_seconds = {"decode": t_dec, "frame": t_frame, "infer": t_inf}
    res.stage_ms = {"decode": dec_samples, "frame": frame_samples, "infer": inf_samples}
    res.framer_stats = framer.stats
    res.decode_stats = state.stats
    if keep_frames:
        res.kept_frames = frames
    return res


def _run_threaded(raw, framer, model, queue_capacity, drop_policy, skip_zero) -> PipelineResult:
    res = PipelineResult()
    q_events: queue.Queue = queue.Queue(maxsize=queue_capacity)
    q_frames: queue.Queue = queue.Queue(maxsize=queue_capacity)
    times = {"decode": 0.0, "frame": 0.0, "infer": 0.0}
    samples = {"decode": [], "frame": [], "infer": []}
    state = DecoderState()
    errors: list[BaseException] = []

    def decode_worker():
        try:
            for chunk in _chunks(raw, DECODE_CHUNK_WORDS):
                s = time.perf_counter()
                events, _ = decode_stream(chunk, state)
                d = time.perf_counter() - s
                times["decode"] += d
                samples["decode"].append(d * 1e3)
                q_events.put(events)
        except BaseException as exc:  # noqa: BLE001
            errors.append(exc)
        finally:
            q_events.put(None)

    def frame_worker():
        try:
            while True:
                batch = q_events.get()
                if batch is None:
                    break
                if len(batch) == 0:
                    framer.stats.holds_input_empty += 1
                    continue
                s = time.perf_counter()
                sealed = framer.push_batch(batch)
                d = time.perf_counter() - s
                times["frame"] += d
                samples["frame"].append(d * 1e3)
                if q_frames.full():
                    framer.stats.events_while_blocked += len(batch)
                for frame in sealed:
                    _emit(frame, q_frames, drop_policy, framer.stats)
            tail = framer.flush()
            if tail is not None:
                _emit(tail, q_frames, drop_policy, framer.stats)
        except BaseException as exc:  # noqa: BLE001
            errors.append(exc)
        finally:
            q_frames.put(None)

    t0 = time.perf_counter()
    threads = [threading.Thread(target=decode_worker), threading.Thread(target=frame_worker)]
    for t in threads:
        t.start()
    while True:
        frame = q_frames.get()
        if frame is None:
            break
        res.frames += 1
        if model is not None:
            s = time.perf_counter()
            cls, logits = infer(model, frame.channels, skip_zero)
            d = time.perf_counter() - s
            times["infer"] += d
            samples["infer"].append(d * 1e3)
            res.predictions.append((frame.index, cls))
            res.logits.append(logits)
    for t in threads:
        t.join()
    if errors:
        raise errors[0]
    res.events = state.stats.events_emitted
    res.wall_seconds = time.perf_counter() - t0
    res.stage_seconds = times
    res.stage_ms = samples
    res.framer_stats = framer.stats
    res.decode_stats = state.stats
    return res
