"""Bundled CNN topologies and random-weight model construction.

Two families: evnet16 (six conv stages, 128 channels pre-pool) and evnet70
(eight conv stages, 256 channels pre-pool), both ending in global average
pooling and an 11-way linear head.  Parameter counts are the deployed totals
(int8 weights plus folded int32 biases) and are frozen as regression
constants in the test suite.
"""

from __future__ import annotations

import numpy as np

from evtkit.inference import KIND_CONV2D, KIND_DWSEP, KIND_GAP, KIND_LINEAR, LayerDesc, QuantizedModel

CLASS_COUNT = 11

# (in_ch, out_ch, stride) per conv stage; first stage is a standard conv,
# the rest are depthwise separable.
_NET16_STAGES = [(16, 16, 2), (16, 32, 2), (32, 32, 2), (32, 64, 1), (64, 128, 2)]
_NET70_STAGES = [(16, 16, 1), (16, 32, 2), (32, 32, 1), (32, 64, 2), (64, 128, 1), (128, 128, 1), (128, 256, 2)]

TOPOLOGIES = {
    "evnet16": (16, 2, _NET16_STAGES, 128),
    "evnet70": (16, 2, _NET70_STAGES, 256),
}


def topology_layers(name: str, input_channels: int = 2) -> list[LayerDesc]:
    """Layer skeletons (no weights) for a named topology."""
    first_out, first_stride, stages, head_ch = TOPOLOGIES[name]
    layers = [LayerDesc(kind=KIND_CONV2D, in_ch=input_channels, out_ch=first_out, stride=first_stride)]
    for in_ch, out_ch, stride in stages:
        layers.append(LayerDesc(kind=KIND_DWSEP, in_ch=in_ch, out_ch=out_ch, stride=stride))
    layers.append(LayerDesc(kind=KIND_GAP))
    layers.append(LayerDesc(kind=KIND_LINEAR, in_ch=head_ch, out_ch=CLASS_COUNT, kernel=0, stride=0, padding=0, relu=False))
    return layers


def fill_random_weights(layers: list[LayerDesc], rng: np.random.Generator, bias_span: int = 2048) -> None:
    """Populate skeleton layers with random-but-valid int8/int32 parameters."""
    for layer in layers:
        k = layer.kernel
        if layer.kind == KIND_CONV2D:
            layer.weights = rng.integers(-127, 128, (layer.out_ch, layer.in_ch, k, k), dtype=np.int8)
            layer.bias = rng.integers(-bias_span, bias_span, layer.out_ch, dtype=np.int32)
            layer.rescale_shift = 7
        elif layer.kind == KIND_DWSEP:
            layer.weights = rng.integers(-127, 128, (layer.in_ch, k, k), dtype=np.int8)
            layer.bias = rng.integers(-bias_span, bias_span, layer.in_ch, dtype=np.int32)
            layer.pw_weights = rng.integers(-127, 128, (layer.out_ch, layer.in_ch), dtype=np.int8)
            layer.pw_bias = rng.integers(-bias_span, bias_span, layer.out_ch, dtype=np.int32)
            layer.dw_rescale_shift = 7
            layer.rescale_shift = 7
        elif layer.kind == KIND_LINEAR:
            layer.weights = rng.integers(-127, 128, (layer.out_ch, layer.in_ch), dtype=np.int8)
            layer.bias = rng.integers(-bias_span, bias_span, layer.out_ch, dtype=np.int32)


def build_random_model(name: str, input_channels: int = 2, seed: int = 0) -> QuantizedModel:
    """Named topology with seeded random weights; validates before returning."""
    layers = topology_layers(name, input_channels)
    fill_random_weights(layers, np.random.default_rng(seed))
    model = QuantizedModel(name=name, input_channels=input_channels, layers=layers, class_count=CLASS_COUNT)
    model.validate()
    return model


# The checked-in fixture bundle (models/evnet16-n2) is this model; keeping
# the seed here lets callers fall back to an in-memory copy when the repo
# checkout is not around.
FIXTURE_SEED = 2024


def fixture_model() -> QuantizedModel:
    return build_random_model("evnet16", 2, seed=FIXTURE_SEED)
