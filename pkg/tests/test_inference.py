"""Int8 executor: per-op oracles, whole-network equivalence, bundle I/O."""

import numpy as np
import pytest

from reference_executor import ref_conv2d, ref_dwsep, ref_gap, ref_infer, ref_linear, scalar_conv2d

from evtkit.errors import ChecksumMismatchError, ShapeMismatchError, UnsupportedKindError
from evtkit.inference import (
    KIND_CONV2D,
    KIND_DWSEP,
    KIND_GAP,
    KIND_LINEAR,
    LayerDesc,
    QuantizedModel,
    conv2d_q8,
    dwsep_conv_q8,
    global_avg_pool,
    infer,
    linear_q8,
)
from evtkit.model_io import load_model, save_model
from evtkit.models import build_random_model, topology_layers


def random_conv_layer(rng, in_ch, out_ch, stride=1, relu=True, shift=None):
    return LayerDesc(
        kind=KIND_CONV2D,
        in_ch=in_ch,
        out_ch=out_ch,
        stride=stride,
        relu=relu,
        rescale_shift=int(rng.integers(0, 10)) if shift is None else shift,
        weights=rng.integers(-127, 128, (out_ch, in_ch, 3, 3), dtype=np.int8),
        bias=rng.integers(-4096, 4096, out_ch, dtype=np.int32),
    )


def random_dwsep_layer(rng, in_ch, out_ch, stride=1):
    return LayerDesc(
        kind=KIND_DWSEP,
        in_ch=in_ch,
        out_ch=out_ch,
        stride=stride,
        rescale_shift=int(rng.integers(0, 10)),
        dw_rescale_shift=int(rng.integers(0, 10)),
        weights=rng.integers(-127, 128, (in_ch, 3, 3), dtype=np.int8),
        bias=rng.integers(-4096, 4096, in_ch, dtype=np.int32),
        pw_weights=rng.integers(-127, 128, (out_ch, in_ch), dtype=np.int8),
        pw_bias=rng.integers(-4096, 4096, out_ch, dtype=np.int32),
    )


def random_linear_layer(rng, in_ch, out_ch=11):
    return LayerDesc(
        kind=KIND_LINEAR,
        in_ch=in_ch,
        out_ch=out_ch,
        kernel=0,
        padding=0,
        relu=False,
        weights=rng.integers(-127, 128, (out_ch, in_ch), dtype=np.int8),
        bias=rng.integers(-100000, 100000, out_ch, dtype=np.int32),
    )


def random_input(rng, c, h, w, density=1.0):
    x = rng.integers(0, 256, (c, h, w)).astype(np.uint8)
    if density < 1.0:
        x[rng.random((c, h, w)) >= density] = 0
    return x


class TestConv2d:
    def test_identity_kernel(self, rng):
        w = np.zeros((3, 3, 3, 3), dtype=np.int8)
        for ch in range(3):
            w[ch, ch, 1, 1] = 1
        layer = LayerDesc(kind=KIND_CONV2D, in_ch=3, out_ch=3, stride=1, rescale_shift=0, weights=w, bias=np.zeros(3, np.int32))
        x = random_input(rng, 3, 16, 16)
        assert np.array_equal(conv2d_q8(x, layer), x)

    def test_table_shape_first_layer(self, rng):
        layer = random_conv_layer(rng, 2, 16, stride=2)
        assert conv2d_q8(random_input(rng, 2, 128, 128), layer).shape == (16, 64, 64)

    def test_matches_scalar_quadruple_loop(self, rng):
        for _ in range(10):
            layer = random_conv_layer(rng, int(rng.integers(1, 4)), int(rng.integers(1, 5)), stride=int(rng.integers(1, 3)))
            x = random_input(rng, layer.in_ch, 7, 5)
            assert np.array_equal(conv2d_q8(x, layer), scalar_conv2d(x, layer))

    def test_matches_reference_random(self, rng):
        for _ in range(25):
            layer = random_conv_layer(rng, int(rng.integers(1, 8)), int(rng.integers(1, 12)), stride=int(rng.integers(1, 3)))
            x = random_input(rng, layer.in_ch, int(rng.integers(4, 24)), int(rng.integers(4, 24)), density=float(rng.random()))
            assert np.array_equal(conv2d_q8(x, layer), ref_conv2d(x, layer))

    def test_wrong_channels_rejected(self, rng):
        layer = random_conv_layer(rng, 4, 8)
        with pytest.raises(ShapeMismatchError):
            conv2d_q8(random_input(rng, 3, 8, 8), layer)


class TestDwsep:
    def test_zero_pointwise_zero_output(self, rng):
        layer = random_dwsep_layer(rng, 4, 6)
        layer.pw_weights = np.zeros_like(layer.pw_weights)
        layer.pw_bias = np.zeros_like(layer.pw_bias)
        out = dwsep_conv_q8(random_input(rng, 4, 10, 10), layer)
        assert not out.any()

    def test_table_shape(self, rng):
        layer = random_dwsep_layer(rng, 16, 32, stride=2)
        assert dwsep_conv_q8(random_input(rng, 16, 64, 64), layer).shape == (32, 32, 32)

    def test_matches_reference_random(self, rng):
        for _ in range(25):
            layer = random_dwsep_layer(rng, int(rng.integers(1, 10)), int(rng.integers(1, 12)), stride=int(rng.integers(1, 3)))
            x = random_input(rng, layer.in_ch, int(rng.integers(4, 20)), int(rng.integers(4, 20)), density=float(rng.random()))
            assert np.array_equal(dwsep_conv_q8(x, layer), ref_dwsep(x, layer))


class TestPoolAndLinear:
    def test_gap_constant_plane(self):
        x = np.full((3, 8, 8), 77, dtype=np.uint8)
        assert global_avg_pool(x).tolist() == [77, 77, 77]

    def test_gap_round_half_up(self):
        x = np.zeros((1, 2, 1), dtype=np.uint8)
        x[0, 0, 0] = 255  # mean 127.5 -> 128
        assert global_avg_pool(x)[0] == 128

    def test_gap_matches_float_mean_within_one(self, rng):
        x = random_input(rng, 8, 16, 16)
        got = global_avg_pool(x).astype(np.float64)
        want = x.reshape(8, -1).mean(axis=1)
        assert np.all(np.abs(got - want) <= 0.5 + 1e-12)

    def test_linear_zero_input_gives_bias(self, rng):
        layer = random_linear_layer(rng, 16)
        assert np.array_equal(linear_q8(np.zeros(16, np.uint8), layer), layer.bias)

    def test_linear_one_hot_selects_column(self, rng):
        layer = random_linear_layer(rng, 16)
        x = np.zeros(16, np.uint8)
        x[5] = 1
        assert np.array_equal(linear_q8(x, layer), layer.weights[:, 5].astype(np.int64) + layer.bias)

    def test_linear_matches_reference(self, rng):
        for _ in range(20):
            layer = random_linear_layer(rng, int(rng.integers(1, 300)))
            x = rng.integers(0, 256, layer.in_ch).astype(np.uint8)
            assert np.array_equal(linear_q8(x, layer), ref_linear(x, layer))


class TestInfer:
    def test_zero_frame_runs_bias_chain(self, rng):
        model = build_random_model("evnet16", 2, seed=7)
        frame = np.zeros((2, 128, 128), dtype=np.uint8)
        got_cls, got_logits = infer(model, frame)
        ref_cls, ref_logits = ref_infer(model, frame)
        assert got_cls == ref_cls
        assert np.array_equal(got_logits, ref_logits)

    def test_logits_length(self, rng):
        model = build_random_model("evnet16", 2, seed=1)
        _, logits = infer(model, random_input(rng, 2, 128, 128))
        assert logits.shape == (11,)

    @pytest.mark.parametrize("name,n", [("evnet16", 2), ("evnet70", 2), ("evnet16", 8)])
    def test_whole_network_matches_reference(self, rng, name, n):
        model = build_random_model(name, n, seed=int(rng.integers(0, 1 << 31)))
        frame = random_input(rng, n, 128, 128, density=0.4)
        got_cls, got_logits = infer(model, frame)
        ref_cls, ref_logits = ref_infer(model, frame)
        assert got_cls == ref_cls
        assert np.array_equal(got_logits, ref_logits)

    def test_zero_skip_bit_identical(self, rng):
        model = build_random_model("evnet16", 2, seed=3)
        for density in (0.0, 0.05, 0.5):
            frame = random_input(rng, 2, 128, 128, density=density)
            _, with_skip = infer(model, frame, skip_zero=True)
            _, without = infer(model, frame, skip_zero=False)
            assert np.array_equal(with_skip, without)

    def test_determinism(self, rng):
        model = build_random_model("evnet16", 2, seed=9)
        frame = random_input(rng, 2, 128, 128)
        a = infer(model, frame)
        b = infer(model, frame)
        assert a[0] == b[0] and np.array_equal(a[1], b[1])

    def test_argmax_tie_breaks_low(self):
        layers = [LayerDesc(kind=KIND_GAP), random_linear_layer(np.random.default_rng(0), 4)]
        layers[1].weights = np.zeros((11, 4), dtype=np.int8)
        layers[1].bias = np.zeros(11, dtype=np.int32)
        model = QuantizedModel(name="tie", input_channels=4, input_height=2, input_width=2, layers=layers)
        cls, _ = infer(model, np.zeros((4, 2, 2), np.uint8))
        assert cls == 0

    def test_shape_mismatch(self, rng):
        model = build_random_model("evnet16", 8, seed=0)
        with pytest.raises(ShapeMismatchError):
            infer(model, random_input(rng, 2, 128, 128))


class TestShapeChains:
    def test_net16_ends_at_128_pre_pool(self):
        layers = topology_layers("evnet16", 2)
        convs = [l for l in layers if l.kind in (KIND_CONV2D, KIND_DWSEP)]
        assert convs[-1].out_ch == 128
        assert len(convs) == 6

    def test_net70_ends_at_256_pre_pool(self):
        layers = topology_layers("evnet70", 2)
        convs = [l for l in layers if l.kind in (KIND_CONV2D, KIND_DWSEP)]
        assert convs[-1].out_ch == 256
        assert len(convs) == 8

    def test_spatial_chain_reaches_4x4(self, rng):
        model = build_random_model("evnet16", 2, seed=0)
        x = random_input(rng, 2, 128, 128)
        for layer in model.layers:
            if layer.kind == KIND_CONV2D:
                x = conv2d_q8(x, layer)
            elif layer.kind == KIND_DWSEP:
                x = dwsep_conv_q8(x, layer)
        assert x.shape == (128, 4, 4)


class TestModelIO:
    def test_round_trip(self, tmp_path, rng):
        model = build_random_model("evnet16", 2, seed=11)
        save_model(model, tmp_path / "m")
        back = load_model(tmp_path / "m")
        assert back.param_count == model.param_count == 15627
        frame = random_input(rng, 2, 128, 128)
        a = infer(model, frame)
        b = infer(back, frame)
        assert a[0] == b[0] and np.array_equal(a[1], b[1])

    def test_broken_chain_rejected(self, tmp_path):
        model = build_random_model("evnet16", 2, seed=0)
        model.layers[2].in_ch = 24  # 16 -> 32 stage now expects 24
        model.layers[2].weights = np.zeros((24, 3, 3), dtype=np.int8)
        model.layers[2].bias = np.zeros(24, dtype=np.int32)
        model.layers[2].pw_weights = np.zeros((32, 24), dtype=np.int8)
        save_model(model, tmp_path / "m")
        with pytest.raises(ShapeMismatchError):
            load_model(tmp_path / "m")

    def test_truncated_blob_rejected(self, tmp_path):
        model = build_random_model("evnet16", 2, seed=0)
        path = save_model(model, tmp_path / "m")
        blob = path.parent / "layer00_conv2d.bin"
        blob.write_bytes(blob.read_bytes()[:-4])
        with pytest.raises(ChecksumMismatchError):
            load_model(tmp_path / "m")

    def test_unknown_kind_rejected(self, tmp_path):
        model = build_random_model("evnet16", 2, seed=0)
        path = save_model(model, tmp_path / "m")
        text = path.read_text().replace("kind: gap", "kind: maxpool")
        path.write_text(text)
        with pytest.raises(UnsupportedKindError):
            load_model(tmp_path / "m")


class TestParamCounts:
    # Deployed parameter totals (int8 weights + folded int32 biases) derived
    # from the layer tables; frozen as regression constants.
    @pytest.mark.parametrize(
        "name,n,expected",
        [("evnet16", 2, 15627), ("evnet70", 2, 69131), ("evnet16", 8, 16491)],
    )
    def test_frozen_deployed_counts(self, name, n, expected):
        model = build_random_model(name, n, seed=0)
        assert model.param_count == expected

    def test_count_matches_manual_sum(self):
        model = build_random_model("evnet16", 2, seed=0)
        total = 0
        for layer in model.layers:
            for arr in (layer.weights, layer.bias, layer.pw_weights, layer.pw_bias):
                if arr is not None:
                    total += arr.size
        assert total == model.param_count
