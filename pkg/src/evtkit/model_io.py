"""Model bundle I/O: YAML manifest plus one little-endian blob per layer.

The schema is frozen in docs/MODEL_FORMAT.md.  Blobs carry int8 weights and
int32 biases back to back in C order; the manifest references each blob by
filename with a sha256 checksum.  load_model shape-checks every layer
transition and re-verifies checksums, so a bundle that loads is runnable.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
import yaml

from evtkit.errors import ChecksumMismatchError, ShapeMismatchError, UnsupportedKindError
from evtkit.inference import KIND_CONV2D, KIND_DWSEP, KIND_GAP, KIND_LINEAR, LayerDesc, QuantizedModel

MANIFEST_NAME = "manifest.yaml"
FORMAT_TAG = "evtkit-model/1"


def _blob_bytes(layer: LayerDesc) -> bytes:
    parts = []
    if layer.kind == KIND_DWSEP:
        arrays = [layer.weights, layer.bias, layer.pw_weights, layer.pw_bias]
    elif layer.kind in (KIND_CONV2D, KIND_LINEAR):
        arrays = [layer.weights, layer.bias]
    else:
        return b""
    for arr in arrays:
        dtype = "<i4" if arr.dtype == np.int32 else "int8"
        parts.append(np.ascontiguousarray(arr).astype(dtype, copy=False).tobytes())
    return b"".join(parts)


def _split_blob(layer: LayerDesc, index: int, blob: bytes) -> None:
    k = layer.kernel

    def take(count: int, dtype: str, shape: tuple) -> np.ndarray:
        nonlocal offset
        width = 1 if dtype == "int8" else 4
        end = offset + count * width
        if end > len(blob):
            raise ShapeMismatchError(f"layer {index}: blob shorter than declared shapes")
        arr = np.frombuffer(blob[offset:end], dtype=dtype).reshape(shape)
        offset = end
        return arr.copy()

    offset = 0
    if layer.kind == KIND_CONV2D:
        layer.weights = take(layer.out_ch * layer.in_ch * k * k, "int8", (layer.out_ch, layer.in_ch, k, k))
        layer.bias = take(layer.out_ch, "<i4", (layer.out_ch,))
    elif layer.kind == KIND_DWSEP:
        layer.weights = take(layer.in_ch * k * k, "int8", (layer.in_ch, k, k))
        layer.bias = take(layer.in_ch, "<i4", (layer.in_ch,))
        layer.pw_weights = take(layer.out_ch * layer.in_ch, "int8", (layer.out_ch, layer.in_ch))
        layer.pw_bias = take(layer.out_ch, "<i4", (layer.out_ch,))
    elif layer.kind == KIND_LINEAR:
        layer.weights = take(layer.out_ch * layer.in_ch, "int8", (layer.out_ch, layer.in_ch))
        layer.bias = take(layer.out_ch, "<i4", (layer.out_ch,))
    if offset != len(blob):
        raise ShapeMismatchError(f"layer {index}: blob has {len(blob) - offset} trailing bytes")


def save_model(model: QuantizedModel, directory) -> Path:
    """Write manifest + blobs; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest: dict = {
        "format": FORMAT_TAG,
        "name": model.name,
        "input_channels": model.input_channels,
        "input_height": model.input_height,
        "input_width": model.input_width,
        "class_count": model.class_count,
        "param_count": model.param_count,
        "layers": [],
    }
    for i, layer in enumerate(model.layers):
        entry: dict = {"kind": layer.kind}
        if layer.kind in (KIND_CONV2D, KIND_DWSEP):
            entry.update(
                in_ch=layer.in_ch,
                out_ch=layer.out_ch,
                kernel=layer.kernel,
                stride=layer.stride,
                padding=layer.padding,
                relu=layer.relu,
                rescale_shift=layer.rescale_shift,
            )
            if layer.kind == KIND_DWSEP:
                entry["dw_rescale_shift"] = layer.dw_rescale_shift
        elif layer.kind == KIND_LINEAR:
            entry.update(in_ch=layer.in_ch, out_ch=layer.out_ch, relu=layer.relu)
        blob = _blob_bytes(layer)
        if blob:
            blob_name = f"layer{i:02d}_{layer.kind}.bin"
            (directory / blob_name).write_bytes(blob)
            entry["blob"] = blob_name
            entry["sha256"] = hashlib.sha256(blob).hexdigest()
        manifest["layers"].append(entry)
    path = directory / MANIFEST_NAME
    path.write_text(yaml.safe_dump(manifest, sort_keys=False))
    return path


def load_model(path) -> QuantizedModel:
    """Load and validate a bundle from a manifest path or its directory."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    manifest = yaml.safe_load(path.read_text())
    if manifest.get("format") != FORMAT_TAG:
        raise UnsupportedKindError(f"unknown manifest format {manifest.get('format')!r}")
    layers = []
    for i, entry in enumerate(manifest["layers"]):
        kind = entry["kind"]
        if kind not in (KIND_CONV2D, KIND_DWSEP, KIND_GAP, KIND_LINEAR):
            raise UnsupportedKindError(f"layer {i}: unknown kind {kind!r}")
        layer = LayerDesc(
            kind=kind,
            in_ch=entry.get("in_ch", 0),
            out_ch=entry.get("out_ch", 0),
            kernel=entry.get("kernel", 3 if kind in (KIND_CONV2D, KIND_DWSEP) else 0),
            stride=entry.get("stride", 1),
            padding=entry.get("padding", 1 if kind in (KIND_CONV2D, KIND_DWSEP) else 0),
            relu=entry.get("relu", kind != KIND_LINEAR),
            rescale_shift=entry.get("rescale_shift", 0),
            dw_rescale_shift=entry.get("dw_rescale_shift", 0),
        )
        if kind != KIND_GAP:
            blob_path = path.parent / entry["blob"]
            blob = blob_path.read_bytes()
            digest = hashlib.sha256(blob).hexdigest()
            if digest != entry["sha256"]:
                raise ChecksumMismatchError(f"layer {i}: blob {entry['blob']} checksum mismatch")
            _split_blob(layer, i, blob)
        layers.append(layer)
    model = QuantizedModel(
        name=manifest["name"],
        input_channels=manifest["input_channels"],
        input_height=manifest.get("input_height", 128),
        input_width=manifest.get("input_width", 128),
        class_count=manifest.get("class_count", 11),
        layers=layers,
    )
    model.validate()
    declared = manifest.get("param_count")
    if declared is not None and declared != model.param_count:
        raise ShapeMismatchError(f"manifest declares {declared} params, blobs carry {model.param_count}")
    return model
