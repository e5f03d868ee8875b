"""Accelerator instance: parallelism parameters, datapath bit widths, and the
static cost formulas for psum-buffer capacity and I/O bandwidth.

The engine is a hierarchy of P_N cores, each holding P_M slices of K x K
processing elements.  Stage widths grow up the reduction tree:

    column psums            2B + K
    slice output            2B + K + clog2(K)
    core output             2B + K + clog2(K) + clog2(P_M)
    on-chip accumulator     2B + K + clog2(K) + clog2(M)

with clog2(1) = 0.  Eq-style costs:

    psum buffer bits  = P_N * H_OM * W_OM * psum_entry_bits
    I/O bits/cycle    = (P_M * 5 + P_N) * B          (K = 3)

The input factor 5 is specific to K = 3; for other K we extrapolate it as
K + 2 and flag the result as an extrapolation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from .errors import ConfigError, GeometryError

__all__ = [
    "SubBuffer",
    "EngineParams",
    "BitWidths",
    "clog2",
    "validate",
    "derive_bitwidths",
    "psum_buffer_bits",
    "io_bandwidth_bits",
    "io_bandwidth_is_extrapolated",
    "default_sb_layout",
    "layout_for_widths",
    "achievable_delays",
    "engine_to_dict",
    "engine_from_dict",
    "load_engine_file",
    "save_engine_file",
]


def clog2(n: int) -> int:
    """ceil(log2 n) with clog2(1) = 0."""
    if n < 1:
        raise ConfigError(f"clog2 needs n >= 1, got {n}")
    return (n - 1).bit_length()


@dataclass(frozen=True)
class SubBuffer:
    """One shift-register segment of an RSRB.  A tapped segment exposes its
    oldest K cells to the dispatch multiplexer."""

    length: int
    tapped: bool


@dataclass(frozen=True)
class EngineParams:
    """One accelerator instance.  Immutable after validation."""

    k: int
    p_m: int
    p_n: int
    b: int
    w_im: int
    h_om: int
    w_om: int
    f_clk_hz: float
    l_i: int = 0
    psum_entry_bits: int = 32
    sb_layout: tuple[SubBuffer, ...] = ()

    def __post_init__(self):
        if not self.sb_layout:
            object.__setattr__(self, "sb_layout", default_sb_layout(self.w_im, self.k))


@dataclass(frozen=True)
class BitWidths:
    """Minimum widths that hold the worst-case magnitude of each stage."""

    input_bits: int
    weight_bits: int
    column_psum_bits: int
    slice_out_bits: int
    core_out_bits: int
    accumulator_bits: int


def default_sb_layout(w_im: int, k: int) -> tuple[SubBuffer, ...]:
    """Sub-buffers of length K each, all tapped, plus an untapped remainder.

    This default realizes delays that are multiples of K; width families that
    need other delays (e.g. the halving sizes of a real CNN at padding 1)
    should use layout_for_widths or an explicit layout.
    """
    if w_im < k:
        raise ConfigError(f"w_im={w_im} shorter than one {k}-wide window")
    full, rem = divmod(w_im, k)
    layout = [SubBuffer(k, True) for _ in range(full)]
    if rem:
        layout.append(SubBuffer(rem, False))
    return tuple(layout)


def layout_for_widths(w_im: int, k: int, widths: list[tuple[int, int]]) -> tuple[SubBuffer, ...]:
    """Build a layout whose taps serve the given (ifmap width, padding) pairs.

    Each pair needs a reuse delay of W_I + 2*padding - K; delays below K are
    served by the head bypass and need no tap.  Raises if two required taps
    are closer than K cells (a tapped sub-buffer must be at least K long).
    """
    delays = sorted({w + 2 * p - k for w, p in widths if w + 2 * p - k >= k})
    if delays and delays[-1] > w_im:
        raise ConfigError(f"delay {delays[-1]} exceeds w_im={w_im} registers")
    layout: list[SubBuffer] = []
    prev = 0
    for d in delays:
        if d - prev < k:
            raise ConfigError(
                f"required taps at delays {prev} and {d} are closer than k={k}; "
                "choose a wider register file or drop one width"
            )
        layout.append(SubBuffer(d - prev, True))
        prev = d
    if prev < w_im:
        layout.append(SubBuffer(w_im - prev, False))
    return tuple(layout)


def achievable_delays(layout: tuple[SubBuffer, ...], k: int) -> list[int]:
    """Delays the dispatch mux can realize: prefix sums of tapped sub-buffers.
    Delays in [0, K) are always achievable through the head bypass."""
    out = list(range(k))
    acc = 0
    for sb in layout:
        acc += sb.length
        if sb.tapped:
            out.append(acc)
    return sorted(set(out))


def _invariant_violations(p: EngineParams) -> list[str]:
    bad = []
    if p.k < 1:
        bad.append(f"k={p.k} must be >= 1")
    if p.p_m < 1:
        bad.append(f"p_m={p.p_m} must be >= 1")
    if p.p_n < 1:
        bad.append(f"p_n={p.p_n} must be >= 1")
    if p.b < 2:
        bad.append(f"b={p.b} must be >= 2")
    if p.k >= 1 and p.w_im < p.k:
        bad.append(f"w_im={p.w_im} shorter than one k={p.k} window")
    if p.h_om < 1 or p.w_om < 1:
        bad.append(f"h_om={p.h_om}, w_om={p.w_om} must be >= 1")
    if p.f_clk_hz <= 0:
        bad.append(f"f_clk_hz={p.f_clk_hz} must be > 0")
    if p.l_i < 0:
        bad.append(f"l_i={p.l_i} must be >= 0")
    total = sum(sb.length for sb in p.sb_layout)
    if total != p.w_im:
        bad.append(f"sb_layout lengths sum to {total}, expected w_im={p.w_im}")
    for i, sb in enumerate(p.sb_layout):
        if sb.length < 1:
            bad.append(f"sb_layout[{i}].length={sb.length} must be >= 1")
        if sb.tapped and sb.length < p.k:
            bad.append(f"sb_layout[{i}] tapped but shorter than k={p.k}")
    floor = 2 * p.b + p.k + clog2(max(p.k, 1))
    if p.psum_entry_bits < floor:
        bad.append(f"psum_entry_bits={p.psum_entry_bits} below single-channel width {floor}")
    return bad


def validate(params: EngineParams, memory_budget_bits: int | None = None) -> EngineParams:
    """Check every invariant and, when given, the on-chip memory budget.
    Idempotent: validating a valid instance returns it unchanged."""
    bad = _invariant_violations(params)
    if bad:
        raise ConfigError("; ".join(bad))
    if memory_budget_bits is not None:
        need = psum_buffer_bits(params)
        if need > memory_budget_bits:
            raise ConfigError(
                f"psum buffers need {need} bits ({need / 2**20:.2f} Mib) but the "
                f"budget is {memory_budget_bits} bits ({memory_budget_bits / 2**20:.2f} Mib)"
            )
    return params


def derive_bitwidths(params: EngineParams, m: int) -> BitWidths:
    """Stage widths for a layer with M input channels."""
    if m < 1:
        raise GeometryError(f"m={m} must be >= 1")
    base = 2 * params.b + params.k
    slice_out = base + clog2(params.k)
    acc = slice_out + clog2(m)
    if acc > params.psum_entry_bits:
        max_log = params.psum_entry_bits - slice_out
        max_m = (1 << max_log) if max_log >= 0 else 0
        raise ConfigError(
            f"accumulator needs {acc} bits for m={m} but psum entries are "
            f"{params.psum_entry_bits} bits (maximum supportable m: {max_m})"
        )
    return BitWidths(
        input_bits=params.b,
        weight_bits=params.b,
        column_psum_bits=base,
        slice_out_bits=slice_out,
        core_out_bits=slice_out + clog2(params.p_m),
        accumulator_bits=acc,
    )


def psum_buffer_bits(params: EngineParams) -> int:
    """Total psum buffer size: P_N * H_OM * W_OM * entry bits."""
    return params.p_n * params.h_om * params.w_om * params.psum_entry_bits


def io_bandwidth_bits(params: EngineParams) -> int:
    """Peak I/O bits per cycle: (P_M * 5 + P_N) * B for K = 3.

    The input factor is generalized to K + 2 for other kernel sizes; see
    io_bandwidth_is_extrapolated.
    """
    factor = 5 if params.k == 3 else params.k + 2
    return (params.p_m * factor + params.p_n) * params.b


def io_bandwidth_is_extrapolated(params: EngineParams) -> bool:
    return params.k != 3


# --- JSON engine file -------------------------------------------------------

def engine_to_dict(params: EngineParams) -> dict:
    return {
        "k": params.k,
        "p_m": params.p_m,
        "p_n": params.p_n,
        "b": params.b,
        "w_im": params.w_im,
        "h_om": params.h_om,
        "w_om": params.w_om,
        "f_clk_hz": params.f_clk_hz,
        "l_i": params.l_i,
        "psum_entry_bits": params.psum_entry_bits,
        "sb_layout": [{"len": sb.length, "tapped": sb.tapped} for sb in params.sb_layout],
    }


def engine_from_dict(data: dict) -> EngineParams:
    try:
        layout = tuple(
            SubBuffer(int(sb["len"]), bool(sb["tapped"])) for sb in data.get("sb_layout", [])
        )
        params = EngineParams(
            k=int(data["k"]),
            p_m=int(data["p_m"]),
            p_n=int(data["p_n"]),
            b=int(data["b"]),
            w_im=int(data["w_im"]),
            h_om=int(data["h_om"]),
            w_om=int(data["w_om"]),
            f_clk_hz=float(data["f_clk_hz"]),
            l_i=int(data.get("l_i", 0)),
            psum_entry_bits=int(data.get("psum_entry_bits", 32)),
            sb_layout=layout,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"engine file malformed: {exc}") from exc
    return validate(params)


def load_engine_file(path) -> EngineParams:
    with open(path, "r", encoding="utf-8") as fh:
        return engine_from_dict(json.load(fh))


def save_engine_file(params: EngineParams, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(engine_to_dict(params), fh, indent=2, sort_keys=True)
        fh.write("\n")


def with_parallelism(params: EngineParams, p_n: int, p_m: int) -> EngineParams:
    """Copy of an instance with different parallelism factors (for sweeps)."""
    return replace(params, p_n=p_n, p_m=p_m)
