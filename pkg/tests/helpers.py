"""Shared builders for the test suite."""

import numpy as np

from triarray.engine_config import EngineParams, layout_for_widths
from triarray.engine_sim import pipeline_latency
from triarray.slice_sim import PeSlice
from triarray.workload import LayerShape


def slice_for(k: int, b: int, w_i: int, padding: int) -> PeSlice:
    """Slice whose buffer layout serves exactly this plane width."""
    w_im = max(w_i + 2 * padding, k)
    return PeSlice(k, b, w_im, layout_for_widths(w_im, k, [(w_i, padding)]))


def engine_for(layer: LayerShape, p_n: int, p_m: int, b: int = 8,
               f_clk_hz: float = 150e6, l_i: int | None = None) -> EngineParams:
    """Minimal engine instance sized for one layer, with l_i matching the
    simulator's pipeline depth unless given."""
    w_im = max(layer.w_i + 2 * layer.padding, layer.k)
    params = EngineParams(
        k=layer.k, p_m=p_m, p_n=p_n, b=b, w_im=w_im,
        h_om=layer.h_o, w_om=layer.w_o, f_clk_hz=f_clk_hz,
        sb_layout=layout_for_widths(w_im, layer.k, [(layer.w_i, layer.padding)]),
    )
    if l_i is None:
        l_i = pipeline_latency(params)
    return EngineParams(**{**params.__dict__, "l_i": l_i})


def random_plane(rng: np.random.Generator, h: int, w: int, b: int = 8) -> np.ndarray:
    return rng.integers(0, 1 << b, size=(h, w), dtype=np.int64)


def random_kernel(rng: np.random.Generator, k: int, b: int = 8) -> np.ndarray:
    half = 1 << (b - 1)
    return rng.integers(-half, half, size=(k, k), dtype=np.int64)
