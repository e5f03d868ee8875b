"""Deterministic random stimulus for verification runs.

A (seed, layer index) pair fully determines the tensors, so two runs with the
same run configuration are bit-identical.
"""

from __future__ import annotations

import numpy as np

from .oracle import FeatureMap, FilterSet, QuantSpec
from .workload import LayerShape

__all__ = ["default_quant_shift", "layer_stimulus", "random_feature_map", "random_filter_set"]


def default_quant_shift(m: int, k: int, b: int) -> int:
    """Shift that lands typical random psum magnitudes across the output
    range, so both the saturation and the zero branches of the quantizer are
    exercised by random tensors."""
    return max(0, 2 * b - 10 + ((m * k * k).bit_length() >> 1))


def random_feature_map(rng: np.random.Generator, m: int, h: int, w: int, b: int) -> FeatureMap:
    vals = rng.integers(0, 1 << b, size=(m, h, w), dtype=np.int64)
    return FeatureMap(height=h, width=w, channels=m, bits=b, values=vals)


def random_filter_set(rng: np.random.Generator, n: int, m: int, k: int, b: int) -> FilterSet:
    half = 1 << (b - 1)
    vals = rng.integers(-half, half, size=(n, m, k, k), dtype=np.int64)
    return FilterSet(n=n, m=m, k=k, bits=b, values=vals)


def layer_stimulus(seed: int, layer: LayerShape, b: int) -> tuple[FeatureMap, FilterSet, QuantSpec]:
    rng = np.random.default_rng([seed, layer.index])
    fmap = random_feature_map(rng, layer.m, layer.h_i, layer.w_i, b)
    filt = random_filter_set(rng, layer.n, layer.m, layer.k, b)
    quant = QuantSpec(bits=b, shift=default_quant_shift(layer.m, layer.k, b), relu=True)
    return fmap, filt, quant
