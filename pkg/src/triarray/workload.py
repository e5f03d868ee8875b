"""CNN layer geometry, operation counts, memory footprints and the built-in
VGG-16 convolutional-layer table.

All counts are exact Python integers (no floating point, no overflow).
Layer objects are immutable after construction and safe to share.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import ConfigError, GeometryError

__all__ = [
    "LayerShape",
    "CnnModel",
    "infer_output_dims",
    "ops_count",
    "layer_footprint",
    "network_footprint",
    "builtin_vgg16",
    "scale_layer",
    "scale_model",
    "model_to_dict",
    "model_from_dict",
    "load_model_file",
    "save_model_file",
]


def infer_output_dims(h_i: int, w_i: int, k: int, stride: int, padding: int) -> tuple[int, int]:
    """Exact convolution output dims: (H_I + 2*pad - K) / stride + 1 per axis.

    The division must be exact; a remainder means the stride does not tile the
    padded input and the shape is rejected.
    """
    if min(h_i, w_i, k) < 1 or stride < 1 or padding < 0:
        raise GeometryError(
            f"invalid layer fields: h_i={h_i} w_i={w_i} k={k} stride={stride} padding={padding}"
        )
    h_span = h_i + 2 * padding - k
    w_span = w_i + 2 * padding - k
    if h_span < 0 or w_span < 0:
        raise GeometryError(
            f"kernel k={k} larger than padded input {h_i + 2 * padding}x{w_i + 2 * padding}"
        )
    if h_span % stride or w_span % stride:
        raise GeometryError(
            f"non-exact output size: ({h_i}+2*{padding}-{k}) not divisible by stride {stride}"
        )
    return h_span // stride + 1, w_span // stride + 1


@dataclass(frozen=True)
class LayerShape:
    """One convolutional layer: ifmap H_I x W_I x M, N filters of K x K x M
    weights, with stride and zero padding.  Output dims are always derived."""

    index: int
    h_i: int
    w_i: int
    m: int
    n: int
    k: int
    stride: int = 1
    padding: int = 0
    h_o: int = field(init=False)
    w_o: int = field(init=False)

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise GeometryError(f"layer {self.index}: m={self.m} n={self.n} must be >= 1")
        h_o, w_o = infer_output_dims(self.h_i, self.w_i, self.k, self.stride, self.padding)
        object.__setattr__(self, "h_o", h_o)
        object.__setattr__(self, "w_o", w_o)


@dataclass(frozen=True)
class CnnModel:
    """Ordered list of self-describing conv layers.  Chainability between
    layers is not required (pooling between them is outside the model)."""

    name: str
    layers: tuple[LayerShape, ...]

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("model has no layers")
        for pos, layer in enumerate(self.layers, start=1):
            if layer.index != pos:
                raise ConfigError(
                    f"layer indices must be consecutive from 1, got {layer.index} at position {pos}"
                )


def ops_count(shape: LayerShape) -> int:
    """Operations for one layer, MACs counted as 2 ops:
    2 * K * K * H_O * W_O * M * N."""
    return 2 * shape.k * shape.k * shape.h_o * shape.w_o * shape.m * shape.n


def layer_footprint(shape: LayerShape, bits: int) -> tuple[int, int]:
    """(ifmap_bytes, weight_bytes) at the given element width."""
    if bits <= 0 or bits % 8:
        raise ConfigError(f"bits={bits} must be a positive multiple of 8 for byte accounting")
    ifmap_bytes = shape.h_i * shape.w_i * shape.m * bits // 8
    weight_bytes = shape.k * shape.k * shape.m * shape.n * bits // 8
    return ifmap_bytes, weight_bytes


def network_footprint(model: CnnModel, bits: int) -> dict:
    """Aggregate memory/ops breakdown for a model.

    Two readings of "total memory" are reported: every layer's ifmaps and
    weights summed (all tensors resident at once) and the peak single-layer
    working set (ifmap + weights of the largest layer).
    """
    per_layer = []
    total_ifmap = total_weight = total_ops = 0
    peak = 0
    for layer in model.layers:
        i_b, w_b = layer_footprint(layer, bits)
        ops = ops_count(layer)
        per_layer.append({"index": layer.index, "ifmap_bytes": i_b, "weight_bytes": w_b, "ops": ops})
        total_ifmap += i_b
        total_weight += w_b
        total_ops += ops
        peak = max(peak, i_b + w_b)
    return {
        "per_layer": per_layer,
        "total_ifmap_bytes": total_ifmap,
        "total_weight_bytes": total_weight,
        "total_bytes": total_ifmap + total_weight,
        "peak_layer_bytes": peak,
        "total_ops": total_ops,
    }


# VGG-16 convolutional layers: equal ifmap/ofmap sizes with K=3 imply
# stride 1 and padding 1.  (H_O == H_I for every row.)
_VGG16_ROWS = (
    (224, 3, 64),
    (224, 64, 64),
    (112, 64, 128),
    (112, 128, 128),
    (56, 128, 256),
    (56, 256, 256),
    (56, 256, 256),
    (28, 256, 512),
    (28, 512, 512),
    (28, 512, 512),
    (14, 512, 512),
    (14, 512, 512),
    (14, 512, 512),
)


def builtin_vgg16() -> CnnModel:
    """The 13 VGG-16 convolutional layers (fully-connected layers excluded)."""
    layers = tuple(
        LayerShape(index=i, h_i=s, w_i=s, m=m, n=n, k=3, stride=1, padding=1)
        for i, (s, m, n) in enumerate(_VGG16_ROWS, start=1)
    )
    return CnnModel(name="vgg16", layers=layers)


def scale_layer(layer: LayerShape, scale: int) -> LayerShape:
    """Shrink spatial dims by an integer divisor (ceil, floor of 1) for
    desk-scale simulation.  Channel/filter counts are unchanged."""
    if scale < 1:
        raise ConfigError(f"scale={scale} must be >= 1")
    return LayerShape(
        index=layer.index,
        h_i=max(1, math.ceil(layer.h_i / scale)),
        w_i=max(1, math.ceil(layer.w_i / scale)),
        m=layer.m,
        n=layer.n,
        k=layer.k,
        stride=layer.stride,
        padding=layer.padding,
    )


def scale_model(model: CnnModel, scale: int) -> CnnModel:
    if scale == 1:
        return model
    return CnnModel(
        name=f"{model.name}_scale{scale}",
        layers=tuple(scale_layer(l, scale) for l in model.layers),
    )


# --- JSON model file ------------------------------------------------------
# { "name": str, "layers": [ {"h_i","w_i","m","n","k","stride","padding"} ] }
# Output dims are always derived, never read from the file.

def model_to_dict(model: CnnModel) -> dict:
    return {
        "name": model.name,
        "layers": [
            {
                "h_i": l.h_i,
                "w_i": l.w_i,
                "m": l.m,
                "n": l.n,
                "k": l.k,
                "stride": l.stride,
                "padding": l.padding,
            }
            for l in model.layers
        ],
    }


def model_from_dict(data: dict) -> CnnModel:
    try:
        name = data["name"]
        rows = data["layers"]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"model file missing required key: {exc}") from exc
    if not isinstance(rows, list) or not rows:
        raise ConfigError("model file has an empty or malformed layer list")
    layers = []
    for i, row in enumerate(rows, start=1):
        try:
            layers.append(
                LayerShape(
                    index=i,
                    h_i=int(row["h_i"]),
                    w_i=int(row["w_i"]),
                    m=int(row["m"]),
                    n=int(row["n"]),
                    k=int(row["k"]),
                    stride=int(row.get("stride", 1)),
                    padding=int(row.get("padding", 0)),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"model file layer {i} is malformed: {exc}") from exc
    return CnnModel(name=str(name), layers=tuple(layers))


def load_model_file(path) -> CnnModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def save_model_file(model: CnnModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")
