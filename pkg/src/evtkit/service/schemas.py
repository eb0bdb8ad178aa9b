"""Request/response models: the one contract shared by HTTP and CLI callers.

Inputs arrive either as server-local paths or inline base64 payloads;
outputs are written server-side when a path is given, otherwise returned
inline where that is practical.
"""

from __future__ import annotations

from pydantic import BaseModel, Field, model_validator

from evtkit.reports import RunReport


class StreamInput(BaseModel):
    """A raw EVT 3.0 word stream, by path or inline."""

    input_path: str | None = None
    input_b64: str | None = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.input_path is None) == (self.input_b64 is None):
            raise ValueError("exactly one of input_path / input_b64 required")
        return self


class FramerParams(BaseModel):
    """Accumulation and representation settings shared by frame/infer/bench."""

    mode: str = "const-event"  # const-event | const-time
    n_events: int = 20000
    window: int = 0  # ticks; required for const-time
    repr: str = "sets"  # binary | hist | sets | slts
    tau: int = 16
    scale: int = 1
    shift: int | None = None  # None: 0, or the derived histogram default
    channels: int = 2
    reset_t_last: bool = False
    per_polarity_t_last: bool = False
    in_res: str = "1280x720"
    out_res: str = "128x128"
    queue_cap: int = 8
    drop_policy: str = "block"  # block | drop-frame


class EventRecord(BaseModel):
    x: int
    y: int
    p: int
    t: int


class DecodeRequest(StreamInput):
    output_path: str | None = None
    output_format: str = "csv"  # csv | bin
    preview_limit: int = 0  # return up to this many decoded events inline


class DecodeResponse(BaseModel):
    event_count: int
    stats: dict[str, int]
    output_path: str | None = None
    preview: list[EventRecord] = Field(default_factory=list)


class FrameRequest(StreamInput):
    output_path: str | None = None
    framer: FramerParams = Field(default_factory=FramerParams)


class FrameResponse(BaseModel):
    frame_count: int
    output_path: str | None = None
    report: RunReport


class Prediction(BaseModel):
    frame_index: int
    class_id: int
    logits: list[int]


class InferRequest(BaseModel):
    model_dir: str
    frames_path: str | None = None  # EVF1 input
    input_path: str | None = None  # or raw stream (end-to-end)
    input_b64: str | None = None
    framer: FramerParams = Field(default_factory=FramerParams)
    single_thread: bool = False
    skip_zero: bool = True

    @model_validator(mode="after")
    def _one_source(self):
        given = sum(v is not None for v in (self.frames_path, self.input_path, self.input_b64))
        if given != 1:
            raise ValueError("exactly one of frames_path / input_path / input_b64 required")
        return self


class InferResponse(BaseModel):
    predictions: list[Prediction]
    report: RunReport


class SynthRequest(BaseModel):
    pattern: str = "moving-bar"  # moving-bar | blob-orbit | uniform-noise
    rate: float = 1_000_000.0
    duration: float = 0.1
    seed: int = 0
    output_path: str | None = None  # raw stream; sidecar lands beside it
    include_stream_b64: bool = False


class SynthResponse(BaseModel):
    event_count: int
    byte_length: int
    sidecar: dict
    output_path: str | None = None
    sidecar_path: str | None = None
    stream_b64: str | None = None


class BenchRequest(BaseModel):
    workload: str = "full"  # decode | frame | full
    pattern: str = "moving-bar"
    rate: float = 5_000_000.0
    duration: float = 1.0
    seed: int = 7
    framer: FramerParams = Field(default_factory=FramerParams)
    model_dir: str | None = None  # full workload only; bundled fixture when unset
    repeats: int = 1
    single_thread: bool = False


class BenchResponse(BaseModel):
    reports: list[RunReport]


class HealthResponse(BaseModel):
    status: str
    version: str


class ErrorBody(BaseModel):
    error_class: str
    message: str
