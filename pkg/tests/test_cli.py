"""CLI contract: determinism, exit codes, composability of staged vs end-to-end."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from evtkit.cli import main
from evtkit.evf import read_frames_file


@pytest.fixture
def runner():
    return CliRunner()


def synth_stream(runner, tmp_path, name="s.raw", pattern="blob-orbit", rate=400_000, duration=0.05, seed=3):
    path = tmp_path / name
    result = runner.invoke(
        main,
        ["synth", "--pattern", pattern, "--rate", str(rate), "--duration", str(duration), "--seed", str(seed), "-o", str(path)],
    )
    assert result.exit_code == 0, result.output
    return path


class TestSynth:
    def test_deterministic_bytes(self, runner, tmp_path):
        a = synth_stream(runner, tmp_path, "a.raw")
        b = synth_stream(runner, tmp_path, "b.raw")
        assert a.read_bytes() == b.read_bytes()

    def test_exact_rate_duration_product(self, runner, tmp_path):
        path = synth_stream(runner, tmp_path, "c.raw", rate=1_000_000, duration=0.1)
        sidecar = json.loads(path.with_suffix(".json").read_text())
        assert sidecar["event_count"] == 100_000


class TestDecode:
    def test_empty_file_exit_zero(self, runner, tmp_path):
        empty = tmp_path / "empty.raw"
        empty.write_bytes(b"")
        result = runner.invoke(main, ["decode", str(empty)])
        assert result.exit_code == 0
        assert "events_emitted: 0" in result.output

    def test_count_matches_sidecar(self, runner, tmp_path):
        path = synth_stream(runner, tmp_path)
        sidecar = json.loads(path.with_suffix(".json").read_text())
        out_csv = tmp_path / "ev.csv"
        result = runner.invoke(main, ["decode", str(path), "-o", str(out_csv)])
        assert result.exit_code == 0
        assert f"events_emitted: {sidecar['event_count']}" in result.output
        assert out_csv.read_text().count("\n") == sidecar["event_count"] + 1  # header

    def test_odd_length_exit_code_names_offset(self, runner, tmp_path):
        bad = tmp_path / "bad.raw"
        bad.write_bytes(b"\x00\x01\x02")
        result = runner.invoke(main, ["decode", str(bad)])
        assert result.exit_code == 3
        assert "offset 2" in result.output

    def test_missing_file_exit_code(self, runner, tmp_path):
        result = runner.invoke(main, ["decode", str(tmp_path / "nope.raw")])
        assert result.exit_code == 8


class TestFrame:
    def test_frame_count_and_determinism(self, runner, tmp_path):
        path = synth_stream(runner, tmp_path, rate=1_200_000, duration=0.05)  # 60K events
        out1, out2 = tmp_path / "f1.evf", tmp_path / "f2.evf"
        for out in (out1, out2):
            result = runner.invoke(main, ["frame", str(path), "-o", str(out), "--n-events", "20000"])
            assert result.exit_code == 0, result.output
            assert "frames: 3" in result.output
        assert out1.read_bytes() == out2.read_bytes()

    def test_repr_flag_changes_payload_not_header(self, runner, tmp_path):
        # tau=8 keeps the decay shift nonzero so the SETS payload cannot
        # degenerate into the histogram counts
        path = synth_stream(runner, tmp_path)
        sets_out, hist_out = tmp_path / "sets.evf", tmp_path / "hist.evf"
        runner.invoke(main, ["frame", str(path), "-o", str(sets_out), "--n-events", "5000", "--repr", "sets", "--tau", "8"])
        runner.invoke(main, ["frame", str(path), "-o", str(hist_out), "--n-events", "5000", "--repr", "hist"])
        sets_frames = read_frames_file(sets_out)
        hist_frames = read_frames_file(hist_out)
        assert len(sets_frames) == len(hist_frames)
        for (sh, sp), (hh, hp) in zip(sets_frames, hist_frames):
            assert sh.kind != hh.kind
            assert (sh.width, sh.height, sh.channels, sh.frame_index, sh.t_start, sh.t_end, sh.event_count) == (
                hh.width,
                hh.height,
                hh.channels,
                hh.frame_index,
                hh.t_start,
                hh.t_end,
                hh.event_count,
            )
            assert not np.array_equal(sp, hp)

    def test_bad_flag_combination_rejected(self, runner, tmp_path):
        path = synth_stream(runner, tmp_path)
        result = runner.invoke(main, ["frame", str(path), "-o", str(tmp_path / "x.evf"), "--mode", "const-time"])
        assert result.exit_code != 0
        assert "window" in result.output


class TestInfer:
    def test_end_to_end_equals_staged(self, runner, tmp_path, fixture_model_dir):
        path = synth_stream(runner, tmp_path, rate=1_200_000, duration=0.05)
        evf = tmp_path / "f.evf"
        runner.invoke(main, ["frame", str(path), "-o", str(evf), "--n-events", "20000"])
        staged = runner.invoke(main, ["infer", str(evf), "--model", fixture_model_dir])
        assert staged.exit_code == 0, staged.output
        direct = runner.invoke(main, ["infer", str(path), "--raw", "--model", fixture_model_dir, "--n-events", "20000"])
        assert direct.exit_code == 0, direct.output

        def preds(output):
            return [json.loads(line) for line in output.splitlines() if line.startswith("{")]

        a, b = preds(staged.output), preds(direct.output)
        assert len(a) == len(b) == 3
        assert a == b

    def test_channel_mismatch_exit_code(self, runner, tmp_path, fixture_model_dir):
        path = synth_stream(runner, tmp_path)
        evf = tmp_path / "one.evf"
        runner.invoke(main, ["frame", str(path), "-o", str(evf), "--n-events", "5000", "--channels", "1"])
        result = runner.invoke(main, ["infer", str(evf), "--model", fixture_model_dir])
        assert result.exit_code == 10
        assert "channels" in result.output

    def test_two_channel_frames_into_eight_channel_model(self, runner, tmp_path):
        from evtkit.model_io import save_model
        from evtkit.models import build_random_model

        save_model(build_random_model("evnet16", 8, seed=0), tmp_path / "n8")
        path = synth_stream(runner, tmp_path)
        evf = tmp_path / "two.evf"
        runner.invoke(main, ["frame", str(path), "-o", str(evf), "--n-events", "5000", "--channels", "2"])
        result = runner.invoke(main, ["infer", str(evf), "--model", str(tmp_path / "n8")])
        assert result.exit_code != 0
        assert "channels" in result.output

    def test_predictions_count_equals_frames(self, runner, tmp_path, fixture_model_dir):
        path = synth_stream(runner, tmp_path)
        evf = tmp_path / "f.evf"
        frame_result = runner.invoke(main, ["frame", str(path), "-o", str(evf), "--n-events", "5000"])
        assert "frames: 4" in frame_result.output
        result = runner.invoke(main, ["infer", str(evf), "--model", fixture_model_dir])
        preds = [line for line in result.output.splitlines() if line.startswith("{")]
        assert len(preds) == 4


class TestBench:
    def test_decode_workload_reports(self, runner, tmp_path):
        report = tmp_path / "r.jsonl"
        result = runner.invoke(
            main,
            ["bench", "--workload", "decode", "--rate", "200000", "--duration", "0.05", "--report", str(report)],
        )
        assert result.exit_code == 0, result.output
        rec = json.loads(report.read_text().splitlines()[0])
        assert rec["events_per_sec"] > 0
        assert rec["command"] == "bench:decode"

    def test_full_workload_reports_all_stages(self, runner, tmp_path, fixture_model_dir):
        report = tmp_path / "r.jsonl"
        result = runner.invoke(
            main,
            [
                "bench",
                "--workload",
                "full",
                "--rate",
                "400000",
                "--duration",
                "0.05",
                "--n-events",
                "5000",
                "--model",
                fixture_model_dir,
                "--report",
                str(report),
            ],
        )
        assert result.exit_code == 0, result.output
        rec = json.loads(report.read_text().splitlines()[0])
        assert set(rec["stage_seconds"]) == {"decode", "frame", "infer"}
        assert rec["frames_per_sec"] > 0
        # frames/sec never exceeds events/sec / N in constant-event mode
        assert rec["frames_per_sec"] <= rec["events_per_sec"] / 5000 * (1 + 1e-9)
