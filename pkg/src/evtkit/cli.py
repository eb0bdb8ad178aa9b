"""Command-line client for the pipeline operations.

Each subcommand builds the same pydantic request the HTTP service accepts
and runs it in-process; pass --server http://host:port to route through a
running service instead.  Exit codes are stable per error family (see
EXIT_CODES) so scripts can branch without parsing messages.
"""

from __future__ import annotations

import sys

import click

import evtkit
from evtkit.errors import (
    ChecksumMismatchError,
    CoordOutOfRangeError,
    EvtkitError,
    OddLengthError,
    ShapeMismatchError,
    SourceError,
    UnsortedTimestampsError,
    UnsupportedKindError,
)
from evtkit.reports import write_jsonl
from evtkit.service import handlers, schemas

EXIT_CODES: list[tuple[type, int]] = [
    (OddLengthError, 3),
    (ShapeMismatchError, 4),
    (ChecksumMismatchError, 5),
    (UnsortedTimestampsError, 6),
    (CoordOutOfRangeError, 6),
    (UnsupportedKindError, 7),
    (FileNotFoundError, 8),
    (SourceError, 9),
    (EvtkitError, 10),
]

_OPS = {
    "decode": (handlers.handle_decode, schemas.DecodeResponse),
    "frame": (handlers.handle_frame, schemas.FrameResponse),
    "infer": (handlers.handle_infer, schemas.InferResponse),
    "synth": (handlers.handle_synth, schemas.SynthResponse),
    "bench": (handlers.handle_bench, schemas.BenchResponse),
}


class ServiceCallError(EvtkitError):
    """The remote service answered with an error envelope."""


def _call(op: str, request, server: str | None):
    handler, resp_model = _OPS[op]
    if not server:
        return handler(request)
    import httpx

    reply = httpx.post(f"{server.rstrip('/')}/v1/{op}", json=request.model_dump(), timeout=600.0)
    if reply.status_code != 200:
        raise ServiceCallError(f"{op} failed on {server}: {reply.status_code} {reply.text}")
    return resp_model.model_validate(reply.json())


def _exit_code(exc: BaseException) -> int:
    for klass, code in EXIT_CODES:
        if isinstance(exc, klass):
            return code
    return 1


def run_guarded(fn):
    try:
        fn()
    except (EvtkitError, FileNotFoundError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_exit_code(exc))


def framer_options(fn):
    opts = [
        click.option("--mode", type=click.Choice(["const-event", "const-time"]), default="const-event", show_default=True),
        click.option("--n-events", type=int, default=20000, show_default=True, help="events per frame (const-event)"),
        click.option("--window", type=int, default=0, help="window in timestamp ticks (const-time)"),
        click.option("--repr", "representation", type=click.Choice(["binary", "hist", "sets", "slts"]), default="sets", show_default=True),
        click.option("--tau", type=int, default=16, show_default=True, help="decay shift parameter"),
        click.option("--scale", type=int, default=1, show_default=True, help="output quantizer multiplier"),
        click.option("--shift", type=int, default=None, help="output quantizer right shift (default 0; histograms derive one)"),
        click.option("--channels", type=int, default=2, show_default=True, help="frame channels: 1, 2, or 2k temporal slices"),
        click.option("--reset-t-last", is_flag=True, help="zero the timestamp grid at every frame swap"),
        click.option("--in-res", default="1280x720", show_default=True),
        click.option("--out-res", default="128x128", show_default=True),
        click.option("--queue-cap", type=int, default=8, show_default=True),
        click.option("--drop-policy", type=click.Choice(["block", "drop-frame"]), default="block", show_default=True),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def build_framer_params(mode, n_events, window, representation, tau, scale, shift, channels, reset_t_last, in_res, out_res, queue_cap, drop_policy):
    return schemas.FramerParams(
        mode=mode,
        n_events=n_events,
        window=window,
        repr=representation,
        tau=tau,
        scale=scale,
        shift=shift,
        channels=channels,
        reset_t_last=reset_t_last,
        in_res=in_res,
        out_res=out_res,
        queue_cap=queue_cap,
        drop_policy=drop_policy,
    )


@click.group()
@click.version_option(evtkit.__version__)
@click.option("--server", default=None, envvar="EVTKIT_SERVER", help="route through a running service instead of in-process")
@click.pass_context
def main(ctx, server):
    """Event-camera stream toolkit: decode, frame, infer, synth, bench."""
    ctx.ensure_object(dict)
    ctx.obj["server"] = server


@main.command()
@click.argument("input_path", type=click.Path())
@click.option("--output", "-o", default=None, help="write decoded events here")
@click.option("--format", "output_format", type=click.Choice(["csv", "bin"]), default="csv", show_default=True)
@click.option("--report", default=None, help="append a JSONL report record here")
@click.pass_context
def decode(ctx, input_path, output, output_format, report):
    """Decode a raw EVT 3.0 stream into events."""

    def run():
        req = schemas.DecodeRequest(input_path=input_path, output_path=output, output_format=output_format)
        resp = _call("decode", req, ctx.obj["server"])
        for key, value in resp.stats.items():
            click.echo(f"{key}: {value}")
        if resp.output_path:
            click.echo(f"events written to {resp.output_path}")
        if report:
            write_jsonl(report, [{"command": "decode", **resp.stats}])

    run_guarded(run)


@main.command()
@click.argument("input_path", type=click.Path())
@click.option("--output", "-o", required=True, help="EVF1 frame file to write")
@click.option("--report", default=None, help="append a JSONL report record here")
@framer_options
@click.pass_context
def frame(ctx, input_path, output, report, **framer_kwargs):
    """Accumulate a raw stream into representation frames (EVF1)."""

    def run():
        req = schemas.FrameRequest(
            input_path=input_path,
            output_path=output,
            framer=build_framer_params(**framer_kwargs),
        )
        resp = _call("frame", req, ctx.obj["server"])
        click.echo(f"frames: {resp.frame_count}")
        click.echo(f"events/sec: {resp.report.events_per_sec:.0f}")
        click.echo(f"frames written to {resp.output_path}")
        if report:
            write_jsonl(report, [resp.report])

    run_guarded(run)


@main.command()
@click.argument("source", type=click.Path())
@click.option("--model", "model_dir", required=True, help="model bundle directory (manifest.yaml + blobs)")
@click.option("--frames/--raw", "is_frames", default=True, help="treat SOURCE as an EVF1 file or a raw stream")
@click.option("--single-thread", is_flag=True, help="run the raw pipeline sequentially (debugging)")
@click.option("--no-skip-zero", is_flag=True, help="disable the zero-activation fast path")
@click.option("--report", default=None, help="append a JSONL report record here")
@framer_options
@click.pass_context
def infer(ctx, source, model_dir, is_frames, single_thread, no_skip_zero, report, **framer_kwargs):
    """Classify frames (EVF1) or run the raw stream end to end."""

    def run():
        req = schemas.InferRequest(
            model_dir=model_dir,
            frames_path=source if is_frames else None,
            input_path=None if is_frames else source,
            framer=build_framer_params(**framer_kwargs),
            single_thread=single_thread,
            skip_zero=not no_skip_zero,
        )
        resp = _call("infer", req, ctx.obj["server"])
        for pred in resp.predictions:
            click.echo(pred.model_dump_json())
        click.echo(f"frames/sec: {resp.report.frames_per_sec:.1f}", err=True)
        if report:
            write_jsonl(report, [resp.report])

    run_guarded(run)


@main.command()
@click.option("--pattern", type=click.Choice(["moving-bar", "blob-orbit", "uniform-noise"]), default="moving-bar", show_default=True)
@click.option("--rate", type=float, default=1_000_000.0, show_default=True, help="events per second")
@click.option("--duration", type=float, default=0.1, show_default=True, help="seconds")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output", "-o", required=True, help="raw stream path; sidecar written beside it")
@click.pass_context
def synth(ctx, pattern, rate, duration, seed, output):
    """Generate a deterministic synthetic stream plus ground-truth sidecar."""

    def run():
        req = schemas.SynthRequest(pattern=pattern, rate=rate, duration=duration, seed=seed, output_path=output)
        resp = _call("synth", req, ctx.obj["server"])
        click.echo(f"events: {resp.event_count}")
        click.echo(f"bytes: {resp.byte_length}")
        click.echo(f"stream written to {resp.output_path}")
        click.echo(f"sidecar written to {resp.sidecar_path}")

    run_guarded(run)


@main.command()
@click.option("--workload", type=click.Choice(["decode", "frame", "full"]), default="full", show_default=True)
@click.option("--pattern", type=click.Choice(["moving-bar", "blob-orbit", "uniform-noise"]), default="moving-bar", show_default=True)
@click.option("--rate", type=float, default=5_000_000.0, show_default=True)
@click.option("--duration", type=float, default=1.0, show_default=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--model", "model_dir", default=None, help="model bundle for the full workload (default: bundled fixture)")
@click.option("--repeats", type=int, default=1, show_default=True)
@click.option("--single-thread", is_flag=True)
@click.option("--report", default=None, help="append JSONL report records here")
@framer_options
@click.pass_context
def bench(ctx, workload, pattern, rate, duration, seed, model_dir, repeats, single_thread, report, **framer_kwargs):
    """Benchmark pinned workloads; reports events/sec and per-stage latency."""

    def run():
        req = schemas.BenchRequest(
            workload=workload,
            pattern=pattern,
            rate=rate,
            duration=duration,
            seed=seed,
            framer=build_framer_params(**framer_kwargs),
            model_dir=model_dir,
            repeats=repeats,
            single_thread=single_thread,
        )
        resp = _call("bench", req, ctx.obj["server"])
        for rep in resp.reports:
            click.echo(
                f"{rep.command}: {rep.events_per_sec / 1e6:.2f} M events/s, "
                f"{rep.frames_per_sec:.1f} frames/s, wall {rep.wall_seconds:.3f} s"
            )
            for stage, secs in rep.stage_seconds.items():
                pct = rep.stage_percentiles.get(stage)
                detail = f" (p50 {pct.p50_ms:.3f} ms, p99 {pct.p99_ms:.3f} ms)" if pct else ""
                click.echo(f"  {stage}: {secs:.3f} s{detail}")
        if report:
            write_jsonl(report, resp.reports)

    run_guarded(run)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service (requires uvicorn)."""
    import uvicorn

    from evtkit.service.app import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
