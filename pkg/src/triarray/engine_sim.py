"""Cycle-accurate composition: cores of P_M slices with spatial adder trees,
the engine of P_N cores with psum buffers and temporal accumulation, and the
control sequencing over filter and channel groups.

A layer executes as ceil(N/P_N) * ceil(M/P_M) computational steps, channel
groups innermost so the psum buffers accumulate across consecutive steps.
Each step is a weight phase of P_N * K cycles (one core filled per K cycles;
the input window preload rides along, inputs and weights use separate ports)
followed by a compute phase of H_O * W_O cycles emitting one provisional
output per core per cycle.

All cores consume the same broadcast ifmap streams, so the engine drives one
LaneBank of P_M lockstep lanes and forms every core's output from the shared
window state; this is bit-identical to per-core datapaths and counts each
broadcast fetch once.  Residual groups feed zeroed lanes/weights so the
datapath stays uniform; counters exclude the fictitious traffic.

Reduction-tree depths (slice tree, core tree, psum accumulator) are
value-exact pipelines that only delay emission by a constant, accounted once
per layer as pipeline_latency(params); with that constant as L_I the
simulated cycle count reproduces the analytical model exactly:

    cycles = pipeline_latency + steps * (P_N * K + H_O * W_O)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .engine_config import BitWidths, EngineParams, clog2, derive_bitwidths, validate
from .errors import (
    AccumulatorOverflowError,
    ConfigError,
    GeometryError,
    UnsupportedFeatureError,
)
from .oracle import FeatureMap, FilterSet, QuantSpec, conv3d_layer, quantize_ofmap
from .slice_sim import LaneBank, adder_tree_depth
from .stimulus import layer_stimulus
from .workload import CnnModel, LayerShape, scale_model

__all__ = [
    "Step",
    "StepPlan",
    "EngineCounters",
    "Engine",
    "LayerRunResult",
    "LayerVerdict",
    "NetworkRunResult",
    "FaultSpec",
    "plan_steps",
    "pipeline_latency",
    "run_network",
]


def pipeline_latency(params: EngineParams) -> int:
    """One-time pipeline depth of the engine: vertical psum chain, slice
    tree + register, core tree + register, psum accumulator stage."""
    k = params.k
    return (k - 1) + (adder_tree_depth(k) + 1) + (clog2(params.p_m) + 1) + 1


@dataclass(frozen=True)
class Step:
    filter_group: int
    channel_group: int
    filters: tuple[int, ...]
    channels: tuple[int, ...]
    first_channel_group: bool
    last_channel_group: bool


@dataclass(frozen=True)
class StepPlan:
    steps: tuple[Step, ...]
    filter_groups: int
    channel_groups: int


def plan_steps(layer: LayerShape, params: EngineParams) -> StepPlan:
    """ceil(N/P_N) * ceil(M/P_M) steps, channel groups iterating innermost so
    ofmaps emit every ceil(M/P_M) steps.  Residual groups are partial."""
    fgroups = math.ceil(layer.n / params.p_n)
    cgroups = math.ceil(layer.m / params.p_m)
    steps = []
    for fg in range(fgroups):
        filters = tuple(range(fg * params.p_n, min(layer.n, (fg + 1) * params.p_n)))
        for cg in range(cgroups):
            channels = tuple(range(cg * params.p_m, min(layer.m, (cg + 1) * params.p_m)))
            steps.append(
                Step(
                    filter_group=fg,
                    channel_group=cg,
                    filters=filters,
                    channels=channels,
                    first_channel_group=cg == 0,
                    last_channel_group=cg == cgroups - 1,
                )
            )
    return StepPlan(steps=tuple(steps), filter_groups=fgroups, channel_groups=cgroups)


@dataclass
class EngineCounters:
    """Event counts for one layer run, zeroed at layer start.  cycles includes
    the one-time pipeline latency."""

    cycles: int = 0
    ifmap_fetches: int = 0
    weight_fetches: int = 0
    psum_reads: int = 0
    psum_writes: int = 0
    ofmap_writes: int = 0

    def copy(self) -> "EngineCounters":
        return replace(self)


@dataclass
class LayerRunResult:
    layer: LayerShape
    ofmaps: np.ndarray  # (N, H_O, W_O) quantized activations
    counters: EngineCounters
    steps_executed: int
    pipeline_latency: int
    bitwidths: BitWidths
    quant: QuantSpec
    max_abs_core_out: int
    max_abs_accumulator: int


class Engine:
    """P_N cores x P_M slices plus psum buffers, advancing one logical clock
    domain in lockstep."""

    def __init__(self, params: EngineParams):
        self.params = validate(params)
        k = params.k
        self._x = np.zeros((params.p_m, k, k), dtype=np.int64)
        self.bank = LaneBank(params.p_m, k, params.w_im, params.sb_layout, regs_out=self._x)
        self._wm = np.zeros((params.p_n, params.p_m * k * k), dtype=np.int64)

    def _check_layer(self, fmap: FeatureMap, filt: FilterSet, layer: LayerShape) -> BitWidths:
        p = self.params
        if layer.k != p.k:
            raise ConfigError(f"layer kernel k={layer.k} does not match engine k={p.k}")
        if layer.stride != 1:
            raise UnsupportedFeatureError(
                f"stride={layer.stride} is carried by the data model but the "
                "simulator supports stride 1 only"
            )
        if (fmap.channels, fmap.height, fmap.width) != (layer.m, layer.h_i, layer.w_i):
            raise GeometryError(
                f"feature map {fmap.channels}x{fmap.height}x{fmap.width} does not "
                f"match layer {layer.m}x{layer.h_i}x{layer.w_i}"
            )
        if (filt.n, filt.m, filt.k) != (layer.n, layer.m, layer.k):
            raise GeometryError(
                f"filters {filt.n}x{filt.m}x{filt.k} do not match layer "
                f"{layer.n}x{layer.m}x{layer.k}"
            )
        if fmap.bits != p.b or filt.bits != p.b:
            raise ConfigError(f"tensor width {fmap.bits}/{filt.bits} != engine b={p.b}")
        if layer.h_o > p.h_om or layer.w_o > p.w_om:
            raise ConfigError(
                f"ofmap {layer.h_o}x{layer.w_o} exceeds psum buffer capacity "
                f"{p.h_om}x{p.w_om}"
            )
        return derive_bitwidths(p, layer.m)

    def run_layer(self, fmap: FeatureMap, filt: FilterSet, layer: LayerShape,
                  quant: QuantSpec) -> LayerRunResult:
        p = self.params
        bw = self._check_layer(fmap, filt, layer)
        plan = plan_steps(layer, p)
        self.bank.configure(layer.w_i, layer.padding)

        k, kk = p.k, p.k * p.k
        h_o, w_o = layer.h_o, layer.w_o
        counters = EngineCounters(cycles=pipeline_latency(p))
        buf = np.zeros((p.p_n, h_o, w_o), dtype=np.int64)
        ofmaps = np.zeros((layer.n, h_o, w_o), dtype=np.int64)
        wm = self._wm
        xflat = self._x.reshape(-1)
        core_bound = (1 << (bw.core_out_bits - 1)) - 1
        acc_bound = (1 << (bw.accumulator_bits - 1)) - 1
        run_max = np.zeros(p.p_n, dtype=np.int64)
        max_acc = 0

        for step in plan.steps:
            n_real = len(step.filters)
            m_real = len(step.channels)

            # weight phase: one core's P_M kernels per K cycles
            counters.cycles += p.p_n * k
            counters.weight_fetches += n_real * m_real * kk
            wm[:] = 0
            fv = filt.values
            for ci, f in enumerate(step.filters):
                for mi, ch in enumerate(step.channels):
                    wm[ci, mi * kk:(mi + 1) * kk] = fv[f, ch].reshape(-1)

            # input window preload overlaps the weight phase (separate ports)
            self.bank.reset_fetch_counters()
            self.bank.begin(fmap.values[list(step.channels)], n_active=m_real)

            accumulating = not step.first_channel_group
            for r in range(h_o):
                for c in range(w_o):
                    outs = wm @ xflat
                    np.maximum(run_max, np.abs(outs), out=run_max)
                    if accumulating:
                        buf[:n_real, r, c] += outs[:n_real]
                        counters.psum_reads += n_real
                    else:
                        buf[:n_real, r, c] = outs[:n_real]
                    counters.psum_writes += n_real
                    self.bank.advance()
            counters.cycles += h_o * w_o
            counters.ifmap_fetches += self.bank.external_fetches

            peak = int(np.abs(buf[:n_real]).max()) if n_real else 0
            max_acc = max(max_acc, peak)
            if peak > acc_bound:
                raise AccumulatorOverflowError(
                    f"psum magnitude {peak} exceeds the {bw.accumulator_bits}-bit "
                    f"accumulator bound {acc_bound}"
                )

            if step.last_channel_group:
                # quantized outputs stream to the periphery during this step,
                # overlapped with computation
                ofmaps[list(step.filters)] = quantize_ofmap(
                    buf[:n_real], quant.bits, quant.shift, quant.relu
                )
                counters.ofmap_writes += n_real * h_o * w_o

        max_core = int(run_max.max())
        if max_core > core_bound:
            raise AccumulatorOverflowError(
                f"core output magnitude {max_core} exceeds the "
                f"{bw.core_out_bits}-bit bound {core_bound}"
            )
        return LayerRunResult(
            layer=layer,
            ofmaps=ofmaps,
            counters=counters,
            steps_executed=len(plan.steps),
            pipeline_latency=pipeline_latency(p),
            bitwidths=bw,
            quant=quant,
            max_abs_core_out=max_core,
            max_abs_accumulator=max_acc,
        )


@dataclass(frozen=True)
class FaultSpec:
    """Test hook: flip one weight bit before the simulated run (the reference
    keeps the clean tensor), to prove the checker catches mismatches."""

    layer_index: int
    filter: int = 0
    channel: int = 0
    row: int = 0
    col: int = 0
    bit: int = 0


def _inject_fault(filt: FilterSet, fault: FaultSpec) -> FilterSet:
    vals = filt.values.copy()
    v = int(vals[fault.filter, fault.channel, fault.row, fault.col]) ^ (1 << fault.bit)
    half = 1 << (filt.bits - 1)
    if v >= half:
        v -= 2 * half
    vals[fault.filter, fault.channel, fault.row, fault.col] = v
    return FilterSet(n=filt.n, m=filt.m, k=filt.k, bits=filt.bits, values=vals)


@dataclass
class LayerVerdict:
    layer: LayerShape
    passed: bool
    first_mismatch: tuple | None  # (n, r, c, got, want)
    result: LayerRunResult


@dataclass
class NetworkRunResult:
    model_name: str
    verdicts: list[LayerVerdict] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return bool(self.verdicts) and all(v.passed for v in self.verdicts)


def run_network(model: CnnModel, params: EngineParams, seed: int, scale: int = 1,
                fault: FaultSpec | None = None) -> NetworkRunResult:
    """Run every layer on independent seeded stimulus and verify each against
    the functional reference.  Aborts at the first failing layer, keeping its
    diagnostics in the last verdict."""
    scaled = scale_model(model, scale)
    engine = Engine(params)
    out = NetworkRunResult(model_name=scaled.name)
    for layer in scaled.layers:
        fmap, filt, quant = layer_stimulus(seed, layer, params.b)
        run_filt = filt
        if fault is not None and fault.layer_index == layer.index:
            run_filt = _inject_fault(filt, fault)
        result = engine.run_layer(fmap, run_filt, layer, quant)
        want = quantize_ofmap(
            conv3d_layer(fmap, filt, layer.padding), quant.bits, quant.shift, quant.relu
        )
        if np.array_equal(result.ofmaps, want):
            out.verdicts.append(LayerVerdict(layer, True, None, result))
        else:
            n, r, c = map(int, np.argwhere(result.ofmaps != want)[0])
            mismatch = (n, r, c, int(result.ofmaps[n, r, c]), int(want[n, r, c]))
            out.verdicts.append(LayerVerdict(layer, False, mismatch, result))
            break
    return out
