"""Closed-form performance and cost model: clock cycles, throughput, PE
utilization, memory-access accounting, design-space sweeps and comparisons
against reference accelerator data.

Cycle model (per layer):

    NC = L_I + ceil(N/P_N) * ceil(M/P_M) * (P_N * K + H_O * W_O)

Access model (per layer, our reconstruction; the hardware's exact external
counting convention is not published, so the ifmap overhead fraction and the
psum transaction convention are explicit knobs):

    ifmap  = ceil(N/P_N) * M * H_I * W_I * (1 + overhead)
    weight = N * M * K^2
    psum   = (G - 1) * H_O * W_O * N          single convention (read-modify-
             2*(G - 1) * H_O * W_O * N        write as one / two transactions,
                                              G = ceil(M/P_M))
    ofmap  = H_O * W_O * N

Totals and the accelerator-vs-reference ratio use the single psum convention
by default; both conventions are always emitted.

All counts are exact integers until the final float division.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources

from .engine_config import (
    EngineParams,
    io_bandwidth_bits,
    io_bandwidth_is_extrapolated,
    psum_buffer_bits,
    with_parallelism,
)
from .errors import ConfigError
from .workload import CnnModel, LayerShape, ops_count

__all__ = [
    "LayerCycleReport",
    "CycleModelReport",
    "AccessReport",
    "DesignPoint",
    "clock_cycles",
    "compute_cycles",
    "cycle_model_report",
    "layer_throughput",
    "network_throughput",
    "peak_throughput",
    "pe_utilization",
    "mac_utilization",
    "network_utilization",
    "access_model",
    "network_access_report",
    "dse_sweep",
    "compare_reports",
    "load_eyeriss_reference",
    "round_to_pow2",
    "DEFAULT_OVERHEAD",
    "PSUM_CONVENTIONS",
]

DEFAULT_OVERHEAD = 0.058
PSUM_CONVENTIONS = ("single", "double")


def _steps(layer: LayerShape, params: EngineParams) -> int:
    return math.ceil(layer.n / params.p_n) * math.ceil(layer.m / params.p_m)


def clock_cycles(layer: LayerShape, params: EngineParams) -> int:
    """NC = L_I + steps * (P_N*K + H_O*W_O)."""
    return params.l_i + _steps(layer, params) * (
        params.p_n * params.k + layer.h_o * layer.w_o
    )


def compute_cycles(layer: LayerShape, params: EngineParams) -> int:
    """The weight-phase-free part of NC (steps * H_O * W_O); equal for any
    two instances with the same P_N * P_M when the ceilings align."""
    return _steps(layer, params) * layer.h_o * layer.w_o


def layer_throughput(layer: LayerShape, params: EngineParams) -> float:
    """Operations per second: ops / (NC / f_clk)."""
    return ops_count(layer) * params.f_clk_hz / clock_cycles(layer, params)


def network_throughput(model: CnnModel, params: EngineParams) -> float:
    total_ops = sum(ops_count(l) for l in model.layers)
    total_nc = sum(clock_cycles(l, params) for l in model.layers)
    return total_ops * params.f_clk_hz / total_nc


def peak_throughput(params: EngineParams) -> float:
    """2 * P_N * P_M * K^2 * f_clk (every PE doing one MAC per cycle)."""
    return 2 * params.p_n * params.p_m * params.k * params.k * params.f_clk_hz


def pe_utilization(layer: LayerShape, params: EngineParams) -> float:
    """Slice-occupancy model: min(M, P_M) / P_M.  A layer with fewer input
    channels than slices leaves slices idle for its whole duration."""
    return min(layer.m, params.p_m) / params.p_m


def mac_utilization(layer: LayerShape, params: EngineParams) -> float:
    """Cycle-weighted alternative: useful MAC-cycles over PE-cycles.  Emitted
    alongside the occupancy model, not used for acceptance."""
    useful = ops_count(layer) // 2
    pe_cycles = params.p_n * params.p_m * params.k * params.k * clock_cycles(layer, params)
    return useful / pe_cycles


def network_utilization(model: CnnModel, params: EngineParams) -> float:
    """Unweighted mean of per-layer occupancy utilization."""
    return sum(pe_utilization(l, params) for l in model.layers) / len(model.layers)


@dataclass(frozen=True)
class LayerCycleReport:
    index: int
    ops: int
    nc: int
    exec_time_s: float
    gops: float
    utilization: float
    mac_utilization: float


@dataclass(frozen=True)
class CycleModelReport:
    layers: tuple[LayerCycleReport, ...]
    total_ops: int
    total_nc: int
    total_time_s: float
    network_gops: float
    mean_utilization: float
    peak_gops: float
    peak_gap: float  # (peak - network) / peak


def cycle_model_report(model: CnnModel, params: EngineParams) -> CycleModelReport:
    rows = []
    total_ops = total_nc = 0
    for layer in model.layers:
        ops = ops_count(layer)
        nc = clock_cycles(layer, params)
        rows.append(
            LayerCycleReport(
                index=layer.index,
                ops=ops,
                nc=nc,
                exec_time_s=nc / params.f_clk_hz,
                gops=ops * params.f_clk_hz / nc / 1e9,
                utilization=pe_utilization(layer, params),
                mac_utilization=mac_utilization(layer, params),
            )
        )
        total_ops += ops
        total_nc += nc
    peak = peak_throughput(params)
    net = total_ops * params.f_clk_hz / total_nc
    return CycleModelReport(
        layers=tuple(rows),
        total_ops=total_ops,
        total_nc=total_nc,
        total_time_s=total_nc / params.f_clk_hz,
        network_gops=net / 1e9,
        mean_utilization=network_utilization(model, params),
        peak_gops=peak / 1e9,
        peak_gap=(peak - net) / peak,
    )


@dataclass(frozen=True)
class AccessReport:
    """External/buffer access counts for one layer or a whole network.
    Both psum conventions are carried; total() applies the selected one."""

    ifmap: int
    weight: int
    psum_single: int
    psum_double: int
    ofmap: int
    overhead: float
    convention: str = "single"

    def psum(self, convention: str | None = None) -> int:
        conv = convention or self.convention
        if conv == "single":
            return self.psum_single
        if conv == "double":
            return self.psum_double
        raise ConfigError(f"unknown psum convention {conv!r}")

    def total(self, convention: str | None = None) -> int:
        return self.ifmap + self.weight + self.psum(convention) + self.ofmap


def access_model(layer: LayerShape, params: EngineParams,
                 overhead: float = DEFAULT_OVERHEAD,
                 convention: str = "single") -> AccessReport:
    """Per-layer access model; see the module docstring for the formulas."""
    if convention not in PSUM_CONVENTIONS:
        raise ConfigError(f"unknown psum convention {convention!r}")
    if overhead < 0:
        raise ConfigError(f"overhead {overhead} must be >= 0")
    groups = math.ceil(layer.n / params.p_n)
    g = math.ceil(layer.m / params.p_m)
    ifmap_base = groups * layer.m * layer.h_i * layer.w_i
    ifmap = round(ifmap_base * (1 + overhead))
    weight = layer.n * layer.m * layer.k * layer.k
    psum_single = (g - 1) * layer.h_o * layer.w_o * layer.n
    ofmap = layer.h_o * layer.w_o * layer.n
    return AccessReport(
        ifmap=ifmap,
        weight=weight,
        psum_single=psum_single,
        psum_double=2 * psum_single,
        ofmap=ofmap,
        overhead=overhead,
        convention=convention,
    )


def network_access_report(model: CnnModel, params: EngineParams,
                          overhead: float = DEFAULT_OVERHEAD,
                          convention: str = "single",
                          ) -> tuple[list[AccessReport], AccessReport]:
    """(per-layer reports, aggregated network report)."""
    rows = [access_model(l, params, overhead, convention) for l in model.layers]
    agg = AccessReport(
        ifmap=sum(r.ifmap for r in rows),
        weight=sum(r.weight for r in rows),
        psum_single=sum(r.psum_single for r in rows),
        psum_double=sum(r.psum_double for r in rows),
        ofmap=sum(r.ofmap for r in rows),
        overhead=overhead,
        convention=convention,
    )
    return rows, agg


def _ratio(a: int | float, b: int | float) -> float:
    if a == b:
        return 1.0
    if a == 0:
        return math.inf
    return b / a


def compare_reports(a: AccessReport, b: AccessReport, convention: str | None = None) -> dict:
    """Per-category and total ratios b/a (how many times more b accesses)."""
    return {
        "ifmap": _ratio(a.ifmap, b.ifmap),
        "weight": _ratio(a.weight, b.weight),
        "psum": _ratio(a.psum(convention), b.psum(convention)),
        "ofmap": _ratio(a.ofmap, b.ofmap),
        "total": _ratio(a.total(convention), b.total(convention)),
    }


@dataclass(frozen=True)
class DesignPoint:
    p_n: int
    p_m: int
    pe_count: int
    peak_gops: float
    network_gops: float
    psum_buffer_bits: int
    bw_bits_per_cycle: int
    bw_extrapolated: bool
    fits_memory: bool
    fits_bandwidth: bool


def dse_sweep(model: CnnModel, template: EngineParams,
              grid: list[tuple[int, int]],
              memory_budget_bits: int | None = None,
              bw_budget_bits: int | None = None) -> list[DesignPoint]:
    """Evaluate every (P_N, P_M) grid point with the template's K, B, clock
    and buffer geometry.  Equal-PE-count points reach near-identical
    throughput but different buffer and bandwidth cost."""
    points = []
    for p_n, p_m in grid:
        params = with_parallelism(template, p_n=p_n, p_m=p_m)
        psum_bits = psum_buffer_bits(params)
        bw = io_bandwidth_bits(params)
        points.append(
            DesignPoint(
                p_n=p_n,
                p_m=p_m,
                pe_count=p_n * p_m * params.k * params.k,
                peak_gops=peak_throughput(params) / 1e9,
                network_gops=network_throughput(model, params) / 1e9,
                psum_buffer_bits=psum_bits,
                bw_bits_per_cycle=bw,
                bw_extrapolated=io_bandwidth_is_extrapolated(params),
                fits_memory=memory_budget_bits is None or psum_bits <= memory_budget_bits,
                fits_bandwidth=bw_budget_bits is None or bw <= bw_budget_bits,
            )
        )
    return points


def round_to_pow2(x: int) -> int:
    """Closest power of two (ties round up)."""
    if x < 1:
        raise ConfigError(f"round_to_pow2 needs x >= 1, got {x}")
    lo = 1 << (x.bit_length() - 1)
    hi = lo * 2
    return lo if x - lo < hi - x else hi


def load_eyeriss_reference() -> dict:
    """Transcribed per-layer reference metrics for the Eyeriss row-stationary
    accelerator running the same 13 layers.  Fixed published constants, never
    re-derived here."""
    path = resources.files("triarray").joinpath("data/eyeriss_vgg16.json")
    with path.open("r", encoding="utf-8") as fh:
        data = json.load(fh)
    if len(data["layers"]) != 13:
        raise ConfigError("eyeriss reference file must carry 13 layer rows")
    return data
