"""FastAPI application exposing the pipeline operations.

Run with: evtkit serve (or uvicorn evtkit.service.app:app).  File paths in
requests resolve on the server; small payloads travel inline as base64.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from evtkit.errors import (
    ChecksumMismatchError,
    EvtkitError,
    OddLengthError,
    ShapeMismatchError,
    UnsupportedKindError,
)
from evtkit.service import handlers, schemas

app = FastAPI(
    title="evtkit",
    description="Event-camera stream decoding, time-surface framing, and int8 inference",
)

_STATUS = {
    OddLengthError: 422,
    ShapeMismatchError: 422,
    ChecksumMismatchError: 422,
    UnsupportedKindError: 422,
    FileNotFoundError: 404,
}


@app.exception_handler(EvtkitError)
@app.exception_handler(FileNotFoundError)
async def _domain_error(request: Request, exc: Exception) -> JSONResponse:
    status = next((code for klass, code in _STATUS.items() if isinstance(exc, klass)), 400)
    body = schemas.ErrorBody(error_class=type(exc).__name__, message=str(exc))
    return JSONResponse(status_code=status, content=body.model_dump())


@app.get("/v1/health", response_model=schemas.HealthResponse)
def get_health() -> schemas.HealthResponse:
    return handlers.health()


@app.post("/v1/decode", response_model=schemas.DecodeResponse)
def post_decode(req: schemas.DecodeRequest) -> schemas.DecodeResponse:
    return handlers.handle_decode(req)


@app.post("/v1/frame", response_model=schemas.FrameResponse)
def post_frame(req: schemas.FrameRequest) -> schemas.FrameResponse:
    return handlers.handle_frame(req)


@app.post("/v1/infer", response_model=schemas.InferResponse)
def post_infer(req: schemas.InferRequest) -> schemas.InferResponse:
    return handlers.handle_infer(req)


@app.post("/v1/synth", response_model=schemas.SynthResponse)
def post_synth(req: schemas.SynthRequest) -> schemas.SynthResponse:
    return handlers.handle_synth(req)


@app.post("/v1/bench", response_model=schemas.BenchResponse)
def post_bench(req: schemas.BenchRequest) -> schemas.BenchResponse:
    return handlers.handle_bench(req)
