"""Golden-model integer convolution.

This is the functional reference every simulator output is checked against:
2-D padded cross-correlation (no kernel flip), channel-accumulated 3-D
convolution, and output quantization.  All arithmetic is int64, which is
provably wide enough for B <= 16, K <= 7, M <= 4096 operand ranges, so
results are exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import GeometryError

__all__ = [
    "FeatureMap",
    "FilterSet",
    "QuantSpec",
    "conv2d",
    "conv3d_layer",
    "quantize_ofmap",
    "apply_quant",
]


@dataclass(frozen=True)
class FeatureMap:
    """Unsigned B-bit activations, one (height, width) plane per channel."""

    height: int
    width: int
    channels: int
    bits: int
    values: np.ndarray  # (channels, height, width) int64, read-only

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.int64)
        if v.shape != (self.channels, self.height, self.width):
            raise GeometryError(
                f"feature map values shape {v.shape} != "
                f"({self.channels}, {self.height}, {self.width})"
            )
        if v.size and (v.min() < 0 or v.max() >= 1 << self.bits):
            raise GeometryError(f"activation out of unsigned {self.bits}-bit range")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class FilterSet:
    """Signed B-bit weights: N filters of M channels of K x K kernels."""

    n: int
    m: int
    k: int
    bits: int
    values: np.ndarray  # (n, m, k, k) int64, read-only

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.int64)
        if v.shape != (self.n, self.m, self.k, self.k):
            raise GeometryError(
                f"filter values shape {v.shape} != ({self.n}, {self.m}, {self.k}, {self.k})"
            )
        lo, hi = -(1 << (self.bits - 1)), (1 << (self.bits - 1)) - 1
        if v.size and (v.min() < lo or v.max() > hi):
            raise GeometryError(f"weight out of signed {self.bits}-bit range")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class QuantSpec:
    """Output quantization: optional ReLU, arithmetic right shift, saturate
    to unsigned `bits`."""

    bits: int
    shift: int
    relu: bool = True

    def __post_init__(self):
        if self.shift < 0:
            raise GeometryError(f"quantization shift {self.shift} must be >= 0")


def _pad(plane: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return plane
    return np.pad(plane, ((padding, padding),) * 2 if plane.ndim == 2 else
                  ((0, 0), (padding, padding), (padding, padding)))


def conv2d(plane, kernel, padding: int = 0) -> np.ndarray:
    """Padded stride-1 cross-correlation of one plane with one K x K kernel.

    out[r, c] = sum_ij in[r+i-p, c+j-p] * w[i, j], out-of-range input is 0.
    Returns the wide (int64) psum plane.
    """
    plane = np.asarray(plane, dtype=np.int64)
    kernel = np.asarray(kernel, dtype=np.int64)
    if plane.ndim != 2 or kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1]:
        raise GeometryError(f"conv2d needs a 2-D plane and square kernel, got {plane.shape}, {kernel.shape}")
    if padding < 0:
        raise GeometryError("padding must be >= 0")
    k = kernel.shape[0]
    padded = _pad(plane, padding)
    if k > padded.shape[0] or k > padded.shape[1]:
        raise GeometryError(f"kernel {k}x{k} larger than padded plane {padded.shape}")
    windows = sliding_window_view(padded, (k, k))
    return np.einsum("rcij,ij->rc", windows, kernel)


def conv3d_layer(ifmaps: FeatureMap, filters: FilterSet, padding: int = 0) -> np.ndarray:
    """Channel-accumulated convolution: out[n] = sum_m conv2d(ifmap m, kernel (n, m)).

    Returns (N, H_O, W_O) int64 wide psums.
    """
    if ifmaps.channels != filters.m:
        raise GeometryError(f"channel mismatch: ifmaps M={ifmaps.channels}, filters M={filters.m}")
    k = filters.k
    padded = _pad(ifmaps.values, padding)
    if k > padded.shape[1] or k > padded.shape[2]:
        raise GeometryError(f"kernel {k}x{k} larger than padded plane {padded.shape[1:]}")
    windows = sliding_window_view(padded, (k, k), axis=(1, 2))  # (M, H_O, W_O, k, k)
    return np.einsum("mrcij,nmij->nrc", windows, filters.values)


def quantize_ofmap(psums: np.ndarray, bits: int, shift: int, relu: bool = True) -> np.ndarray:
    """ReLU (optional), arithmetic right shift, saturate to [0, 2^bits - 1]."""
    if shift < 0:
        raise GeometryError(f"quantization shift {shift} must be >= 0")
    v = np.asarray(psums, dtype=np.int64)
    if relu:
        v = np.maximum(v, 0)
    v = v >> shift  # arithmetic shift: floors toward -inf for negatives
    return np.clip(v, 0, (1 << bits) - 1)


def apply_quant(psums: np.ndarray, quant: QuantSpec) -> np.ndarray:
    return quantize_ofmap(psums, quant.bits, quant.shift, quant.relu)
