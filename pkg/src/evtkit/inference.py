"""Functional int8 executor for the bundled CNN topologies.

Quantization scheme: symmetric per-tensor int8 weights, unsigned 8-bit
activations, int32 accumulators, power-of-two requantization (arithmetic
right shift with round-half-up, then clamp).  Batch norm is folded into
weights and bias at export time, so layers carry only int8 weights and
int32 biases.

The heavy paths run patch-matrix products through float64 BLAS, which is
exact for these integer magnitudes (|acc| < 2^31 << 2^53); a zero-activation
skip drops all-zero patches from the product and must never change results.
Results are pinned bit-exact against a naive reference executor in the test
suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from evtkit.errors import ShapeMismatchError, UnsupportedKindError

KIND_CONV2D = "conv2d"
KIND_DWSEP = "dwsep"
KIND_GAP = "gap"
KIND_LINEAR = "linear"

LAYER_KINDS = (KIND_CONV2D, KIND_DWSEP, KIND_GAP, KIND_LINEAR)

ACT_MAX = 255
MAX_RESCALE_SHIFT = 31


@dataclass
class LayerDesc:
    """One executable layer; dwsep carries both stages (dw_* then pointwise)."""

    kind: str
    in_ch: int = 0
    out_ch: int = 0
    kernel: int = 3
    stride: int = 1
    padding: int = 1
    relu: bool = True
    rescale_shift: int = 0  # pointwise stage for dwsep
    dw_rescale_shift: int = 0
    weights: np.ndarray | None = None  # conv2d (out,in,k,k) | dwsep dw (in,k,k) | linear (out,in)
    bias: np.ndarray | None = None  # int32; dwsep: depthwise-stage bias (in,)
    pw_weights: np.ndarray | None = None  # dwsep pointwise (out,in)
    pw_bias: np.ndarray | None = None

    def param_count(self) -> int:
        total = 0
        for arr in (self.weights, self.bias, self.pw_weights, self.pw_bias):
            if arr is not None:
                total += arr.size
        return total

    def validate(self, index: int) -> None:
        if self.kind not in LAYER_KINDS:
            raise UnsupportedKindError(f"layer {index}: unknown kind {self.kind!r}")
        if not 0 <= self.rescale_shift <= MAX_RESCALE_SHIFT or not 0 <= self.dw_rescale_shift <= MAX_RESCALE_SHIFT:
            raise ShapeMismatchError(f"layer {index}: rescale shift outside [0, {MAX_RESCALE_SHIFT}]")
        k = self.kernel
        if self.kind == KIND_CONV2D:
            _expect(index, "weights", self.weights, (self.out_ch, self.in_ch, k, k))
            _expect(index, "bias", self.bias, (self.out_ch,))
        elif self.kind == KIND_DWSEP:
            _expect(index, "weights", self.weights, (self.in_ch, k, k))
            _expect(index, "bias", self.bias, (self.in_ch,))
            _expect(index, "pw_weights", self.pw_weights, (self.out_ch, self.in_ch))
            _expect(index, "pw_bias", self.pw_bias, (self.out_ch,))
        elif self.kind == KIND_LINEAR:
            _expect(index, "weights", self.weights, (self.out_ch, self.in_ch))
            _expect(index, "bias", self.bias, (self.out_ch,))


def _expect(index: int, name: str, arr: np.ndarray | None, shape: tuple) -> None:
    if arr is None or arr.shape != shape:
        got = None if arr is None else arr.shape
        raise ShapeMismatchError(f"layer {index}: {name} shape {got} != {shape}")


@dataclass
class QuantizedModel:
    """Ordered layer chain from N x H x W activations to class logits."""

    name: str
    input_channels: int
    input_height: int = 128
    input_width: int = 128
    class_count: int = 11
    layers: list[LayerDesc] = field(default_factory=list)

    @property
    def param_count(self) -> int:
        return sum(layer.param_count() for layer in self.layers)

    def validate(self) -> None:
        """Shape-check every layer transition through to the logits."""
        c, h, w = self.input_channels, self.input_height, self.input_width
        pooled = False
        for i, layer in enumerate(self.layers):
            layer.validate(i)
            if layer.kind in (KIND_CONV2D, KIND_DWSEP):
                if pooled:
                    raise ShapeMismatchError(f"layer {i}: conv after pooling")
                if layer.in_ch != c:
                    raise ShapeMismatchError(f"layer {i}: expects {layer.in_ch} channels, chain carries {c}")
                h = (h + 2 * layer.padding - layer.kernel) // layer.stride + 1
                w = (w + 2 * layer.padding - layer.kernel) // layer.stride + 1
                if h < 1 or w < 1:
                    raise ShapeMismatchError(f"layer {i}: spatial dims collapsed to {h}x{w}")
                c = layer.out_ch
            elif layer.kind == KIND_GAP:
                pooled = True
                h = w = 1
            elif layer.kind == KIND_LINEAR:
                if not pooled:
                    raise ShapeMismatchError(f"layer {i}: linear before pooling")
                if layer.in_ch != c:
                    raise ShapeMismatchError(f"layer {i}: expects {layer.in_ch} inputs, chain carries {c}")
                c = layer.out_ch
        if c != self.class_count:
            raise ShapeMismatchError(f"chain ends at {c} outputs, expected {self.class_count}")


def _requantize(acc: np.ndarray, relu: bool, shift: int) -> np.ndarray:
    """int32 accumulator -> u8 activation: ReLU, round-half-up shift, clamp."""
    if relu:
        acc = np.maximum(acc, 0)
    if shift > 0:
        acc = (acc + (1 << (shift - 1))) >> shift
    return np.clip(acc, 0, ACT_MAX).astype(np.uint8)


def _requantize_f64(acc: np.ndarray, bias: np.ndarray, relu: bool, shift: int) -> np.ndarray:
    """In-place float64 variant of bias + _requantize, bit-identical.

    Exact because the accumulators are integers far below 2^53 and both the
    power-of-two division and floor are exact in IEEE double.
    """
    acc += bias
    if relu:
        np.maximum(acc, 0.0, out=acc)
    if shift > 0:
        acc += float(1 << (shift - 1))
        acc *= 1.0 / (1 << shift)
        np.floor(acc, out=acc)
    np.minimum(acc, float(ACT_MAX), out=acc)
    np.maximum(acc, 0.0, out=acc)
    return acc.astype(np.uint8)


def _patches(x: np.ndarray, kernel: int, stride: int, padding: int) -> tuple[np.ndarray, int, int]:
    """(C,H,W) u8 -> ((oh*ow, C*k*k) uint8 patch matrix, oh, ow), zero padded."""
    c, h, w = x.shape
    padded = np.zeros((c, h + 2 * padding, w + 2 * padding), dtype=x.dtype)
    padded[:, padding : padding + h, padding : padding + w] = x
    win = np.lib.stride_tricks.sliding_window_view(padded, (kernel, kernel), axis=(1, 2))
    win = win[:, ::stride, ::stride]  # (C, oh, ow, k, k)
    oh, ow = win.shape[1], win.shape[2]
    return win.transpose(1, 2, 0, 3, 4).reshape(oh * ow, c * kernel * kernel), oh, ow


def _matmul_skip_zero(patches_u8: np.ndarray, weights_t: np.ndarray, skip_zero: bool) -> np.ndarray:
    """patches @ weights_t with all-zero patch rows skipped (bit-identical)."""
    if skip_zero:
        nz = patches_u8.any(axis=1)
        if not nz.all():
            out = np.zeros((patches_u8.shape[0], weights_t.shape[1]), dtype=np.float64)
            out[nz] = patches_u8[nz].astype(np.float64) @ weights_t
            return out
    return patches_u8.astype(np.float64) @ weights_t


def conv2d_q8(x: np.ndarray, layer: LayerDesc, skip_zero: bool = True) -> np.ndarray:
    """Standard 3x3 conv: int8 weights over u8 input, requantized to u8."""
    if x.shape[0] != layer.in_ch:
        raise ShapeMismatchError(f"conv2d expects {layer.in_ch} channels, got {x.shape[0]}")
    patches, oh, ow = _patches(x, layer.kernel, layer.stride, layer.padding)
    wt = layer.weights.reshape(layer.out_ch, -1).astype(np.float64).T
    acc = _matmul_skip_zero(patches, wt, skip_zero)
    out = _requantize_f64(acc, layer.bias.astype(np.float64)[None, :], layer.relu, layer.rescale_shift)
    return out.T.reshape(layer.out_ch, oh, ow)


def dwsep_conv_q8(x: np.ndarray, layer: LayerDesc, skip_zero: bool = True) -> np.ndarray:
    """Depthwise 3x3 then pointwise 1x1, each stage bias+ReLU+requantize."""
    if x.shape[0] != layer.in_ch:
        raise ShapeMismatchError(f"dwsep expects {layer.in_ch} channels, got {x.shape[0]}")
    c, h, w = x.shape
    k, s, p = layer.kernel, layer.stride, layer.padding
    padded = np.zeros((c, h + 2 * p, w + 2 * p), dtype=x.dtype)
    padded[:, p : p + h, p : p + w] = x
    win = np.lib.stride_tricks.sliding_window_view(padded, (k, k), axis=(1, 2))[:, ::s, ::s]
    oh, ow = win.shape[1], win.shape[2]
    # batched per-channel matmul: (C, oh*ow, k*k) @ (C, k*k, 1)
    wincols = win.reshape(c, oh * ow, k * k).astype(np.float64)
    acc = np.matmul(wincols, layer.weights.reshape(c, k * k, 1).astype(np.float64))[:, :, 0]
    mid = _requantize_f64(acc, layer.bias.astype(np.float64)[:, None], layer.relu, layer.dw_rescale_shift)

    flat = mid.reshape(c, oh * ow).T  # (pixels, C) uint8
    acc2 = _matmul_skip_zero(flat, layer.pw_weights.astype(np.float64).T, skip_zero)
    out = _requantize_f64(acc2, layer.pw_bias.astype(np.float64)[None, :], layer.relu, layer.rescale_shift)
    return out.T.reshape(layer.out_ch, oh, ow)


def global_avg_pool(x: np.ndarray) -> np.ndarray:
    """Per-channel integer mean with round-half-up."""
    c, h, w = x.shape
    n = h * w
    sums = x.reshape(c, n).astype(np.int64).sum(axis=1)
    return ((2 * sums + n) // (2 * n)).astype(np.uint8)


def linear_q8(x: np.ndarray, layer: LayerDesc) -> np.ndarray:
    """Wide int32 logits; no requantization before argmax."""
    if x.shape[0] != layer.in_ch:
        raise ShapeMismatchError(f"linear expects {layer.in_ch} inputs, got {x.shape[0]}")
    acc = layer.weights.astype(np.int64) @ x.astype(np.int64) + layer.bias.astype(np.int64)
    return acc.astype(np.int32)


def infer(model: QuantizedModel, frame: np.ndarray, skip_zero: bool = True) -> tuple[int, np.ndarray]:
    """Run the layer chain; returns (argmax class, int32 logits).

    Ties break to the lowest class index (np.argmax convention).
    """
    if frame.shape != (model.input_channels, model.input_height, model.input_width):
        raise ShapeMismatchError(
            f"frame shape {frame.shape} != model input "
            f"({model.input_channels}, {model.input_height}, {model.input_width})"
        )
    x = frame.astype(np.uint8, copy=False)
    logits = None
    for layer in model.layers:
        if layer.kind == KIND_CONV2D:
            x = conv2d_q8(x, layer, skip_zero)
        elif layer.kind == KIND_DWSEP:
            x = dwsep_conv_q8(x, layer, skip_zero)
        elif layer.kind == KIND_GAP:
            x = global_avg_pool(x)
        elif layer.kind == KIND_LINEAR:
            logits = linear_q8(x, layer)
        else:
            raise UnsupportedKindError(layer.kind)
    if logits is None:
        raise ShapeMismatchError("model has no linear head")
    return int(np.argmax(logits)), logits
