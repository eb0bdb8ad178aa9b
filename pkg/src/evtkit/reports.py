"""Run reports: one pydantic record per pipeline run, JSONL on disk.

The schema mirrors the latency decomposition of the hardware pipeline
(decode / frame / quantize grouped under frame / infer) so CI can trend the
software numbers against the published figures without asserting them.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field


class StagePercentiles(BaseModel):
    p50_ms: float = 0.0
    p95_ms: float = 0.0
    p99_ms: float = 0.0


class RunReport(BaseModel):
    command: str
    event_count: int = 0
    frame_count: int = 0
    wall_seconds: float = 0.0
    events_per_sec: float = 0.0
    frames_per_sec: float = 0.0
    stage_seconds: dict[str, float] = Field(default_factory=dict)
    stage_percentiles: dict[str, StagePercentiles] = Field(default_factory=dict)
    decode_stats: dict[str, int] | None = None
    framer_stats: dict[str, int] | None = None
    predictions_histogram: dict[int, int] | None = None


def percentiles(samples_ms: list[float]) -> StagePercentiles:
    if not samples_ms:
        return StagePercentiles()
    arr = np.asarray(samples_ms)
    p50, p95, p99 = np.percentile(arr, [50, 95, 99])
    return StagePercentiles(p50_ms=float(p50), p95_ms=float(p95), p99_ms=float(p99))


def report_from_pipeline(command: str, result) -> RunReport:
    wall = max(result.wall_seconds, 1e-12)
    histogram: dict[int, int] | None = None
    if result.predictions:
        histogram = {}
        for _, cls in result.predictions:
            histogram[cls] = histogram.get(cls, 0) + 1
    return RunReport(
        command=command,
        event_count=result.events,
        frame_count=result.frames,
        wall_seconds=result.wall_seconds,
        events_per_sec=result.events / wall,
        frames_per_sec=result.frames / wall,
        stage_seconds=result.stage_seconds,
        stage_percentiles={name: percentiles(ms) for name, ms in result.stage_ms.items()},
        decode_stats=asdict(result.decode_stats) if result.decode_stats else None,
        framer_stats=asdict(result.framer_stats) if result.framer_stats else None,
        predictions_histogram=histogram,
    )


def write_jsonl(path, records) -> None:
    """Append one JSON object per line; dicts and pydantic models accepted."""
    path = Path(path)
    with path.open("a") as fh:
        for rec in records:
            if isinstance(rec, BaseModel):
                fh.write(rec.model_dump_json() + "\n")
            else:
                fh.write(json.dumps(rec) + "\n")
