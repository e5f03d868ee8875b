"""Command-line front end.

Subcommands:

    analyze    analytical per-layer report (CSV) + network summary (JSON)
    simulate   cycle-accurate verification run against the integer reference
    dse        (P_N, P_M) design-space grid (CSV)
    compare    model accesses vs a reference accelerator data file (CSV)

Every command is deterministic under a fixed configuration; emitted CSVs
carry a header row and a provenance comment (tool version + config digest).
Exit codes: 0 success, 1 verification failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from importlib import metadata, resources
from pathlib import Path

from . import analytics
from .engine_config import (
    EngineParams,
    derive_bitwidths,
    engine_to_dict,
    io_bandwidth_bits,
    io_bandwidth_is_extrapolated,
    load_engine_file,
    psum_buffer_bits,
)
from .engine_sim import FaultSpec, pipeline_latency, run_network
from .errors import ConfigError, TriarrayError, VerificationError
from .slice_sim import PeSlice
from .stimulus import layer_stimulus
from .workload import (
    CnnModel,
    builtin_vgg16,
    load_model_file,
    network_footprint,
    scale_model,
)

TOOL = "triarray"


def _version() -> str:
    try:
        return metadata.version(TOOL)
    except metadata.PackageNotFoundError:
        return "0.0.0"


def _digest(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _provenance(payload: dict) -> str:
    return f"# {TOOL} {_version()}; config {_digest(payload)}"


def resolve_model(name: str) -> CnnModel:
    if name == "vgg16":
        return builtin_vgg16()
    path = Path(name)
    if path.exists():
        return load_model_file(path)
    raise ConfigError(f"unknown model {name!r}: not a builtin name or an existing file")


def resolve_engine(name: str) -> EngineParams:
    path = Path(name)
    if path.exists():
        return load_engine_file(path)
    stem = name[:-5] if name.endswith(".json") else name
    builtin = resources.files(TOOL).joinpath(f"data/{stem}.json")
    if builtin.is_file():
        with builtin.open("r", encoding="utf-8") as fh:
            from .engine_config import engine_from_dict
            return engine_from_dict(json.load(fh))
    raise ConfigError(f"unknown engine {name!r}: not an existing file or a shipped config")


def _write_csv(path: Path, provenance: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(provenance + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _config_payload(args: argparse.Namespace) -> dict:
    # the digest identifies the run configuration, not the output location
    return {k: v for k, v in vars(args).items() if k not in ("func", "out")}


# --- commands ----------------------------------------------------------------

def cmd_analyze(args) -> int:
    model = resolve_model(args.model)
    params = resolve_engine(args.engine)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = _config_payload(args)

    rep = analytics.cycle_model_report(model, params)
    acc_rows, acc_total = analytics.network_access_report(
        model, params, args.overhead, args.psum_convention
    )
    rows = []
    for layer, cyc, acc in zip(model.layers, rep.layers, acc_rows):
        rows.append([
            layer.index, layer.h_o, layer.w_o, layer.m, layer.n,
            cyc.ops, cyc.nc, round(cyc.gops, 4),
            round(acc.total() / 1e6, 4),
            round(cyc.utilization, 4), round(cyc.mac_utilization, 4),
        ])
    _write_csv(
        out / "layers.csv", _provenance(payload),
        ["layer", "h_o", "w_o", "m", "n", "ops", "nc", "gops",
         "memory_accesses_millions", "pe_utilization", "mac_utilization"],
        rows,
    )

    foot = network_footprint(model, params.b)
    summary = {
        "tool": {"name": TOOL, "version": _version(), "config_digest": _digest(payload)},
        "model": model.name,
        "engine": engine_to_dict(params),
        "network": {
            "total_ops": rep.total_ops,
            "total_nc": rep.total_nc,
            "total_time_s": rep.total_time_s,
            "gops": round(rep.network_gops, 4),
            "peak_gops": round(rep.peak_gops, 4),
            "peak_gap_percent": round(rep.peak_gap * 100, 4),
            "mean_pe_utilization": round(rep.mean_utilization, 4),
        },
        "accesses": {
            "psum_convention": args.psum_convention,
            "ifmap_overhead": args.overhead,
            "ifmap": acc_total.ifmap,
            "weight": acc_total.weight,
            "psum_single": acc_total.psum_single,
            "psum_double": acc_total.psum_double,
            "ofmap": acc_total.ofmap,
            "total": acc_total.total(),
            "total_millions": round(acc_total.total() / 1e6, 4),
        },
        "sizing": {
            "psum_buffer_bits": psum_buffer_bits(params),
            "psum_buffer_mib": round(psum_buffer_bits(params) / 2**20, 4),
            "io_bandwidth_bits_per_cycle": io_bandwidth_bits(params),
            "io_bandwidth_rounded_pow2": analytics.round_to_pow2(io_bandwidth_bits(params)),
            "io_bandwidth_is_extrapolated": io_bandwidth_is_extrapolated(params),
            "accumulator_bits_at_max_m": derive_bitwidths(
                params, max(l.m for l in model.layers)
            ).accumulator_bits,
        },
        "footprint_bytes": {
            "all_layers_ifmaps_plus_weights": foot["total_bytes"],
            "all_layers_mib": round(foot["total_bytes"] / 2**20, 4),
            "peak_single_layer": foot["peak_layer_bytes"],
        },
    }
    _write_json(out / "network.json", summary)
    print(f"analyze: {model.name} on p_n={params.p_n} p_m={params.p_m}: "
          f"{rep.network_gops:.1f} GOPs/s, utilization {rep.mean_utilization:.2f}, "
          f"accesses {acc_total.total() / 1e6:.2f} M")
    return 0


def cmd_simulate(args) -> int:
    model = resolve_model(args.model)
    params = resolve_engine(args.engine)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = _config_payload(args)

    fault = FaultSpec(layer_index=1) if args.inject_fault else None
    net = run_network(model, params, seed=args.seed, scale=args.scale, fault=fault)

    scaled = scale_model(model, args.scale)
    layers_out = []
    for verdict in net.verdicts:
        layer = verdict.layer
        res = verdict.result
        eq2 = analytics.clock_cycles(layer, params)
        delta = res.counters.cycles - eq2
        status = "PASS" if verdict.passed else "FAIL"
        print(f"CL{layer.index:02d} {status} cycles={res.counters.cycles} "
              f"eq_model={eq2} delta={delta:+d}")
        if verdict.first_mismatch:
            n, r, c, got, want = verdict.first_mismatch
            print(f"  first mismatch at ofmap {n} ({r},{c}): got {got}, expected {want}")
        layers_out.append({
            "layer": layer.index,
            "h_i": layer.h_i, "w_i": layer.w_i, "m": layer.m, "n": layer.n,
            "verdict": status,
            "first_mismatch": verdict.first_mismatch,
            "cycles": res.counters.cycles,
            "cycle_model_nc": eq2,
            "cycle_delta": delta,
            "pipeline_latency": res.pipeline_latency,
            "steps": res.steps_executed,
            "quant_shift": res.quant.shift,
            "counters": {
                "ifmap_fetches": res.counters.ifmap_fetches,
                "weight_fetches": res.counters.weight_fetches,
                "psum_reads": res.counters.psum_reads,
                "psum_writes": res.counters.psum_writes,
                "ofmap_writes": res.counters.ofmap_writes,
            },
            "max_abs_core_out": res.max_abs_core_out,
            "max_abs_accumulator": res.max_abs_accumulator,
        })
    report = {
        "tool": {"name": TOOL, "version": _version(), "config_digest": _digest(payload)},
        "model": scaled.name,
        "seed": args.seed,
        "scale": args.scale,
        "fault_injected": bool(args.inject_fault),
        "passed": net.all_passed,
        "layers": layers_out,
    }
    _write_json(out / "simulate_report.json", report)

    if args.trace:
        _dump_slice_trace(scaled, params, args.seed, out / "slice_trace.csv", payload)

    n_pass = sum(1 for v in net.verdicts if v.passed)
    print(f"simulate: {n_pass}/{len(scaled.layers)} layers passed")
    return 0 if net.all_passed and len(net.verdicts) == len(scaled.layers) else 1


def _dump_slice_trace(model: CnnModel, params: EngineParams, seed: int,
                      path: Path, payload: dict) -> None:
    """Golden-trace dump: one slice pass of the first layer's first channel
    and filter, one line per compute cycle."""
    layer = model.layers[0]
    fmap, filt, _ = layer_stimulus(seed, layer, params.b)
    pe = PeSlice(params.k, params.b, params.w_im, params.sb_layout)
    pe.configure_width(layer.w_i, layer.padding)
    pe.load_weights(filt.values[0, 0])
    pe.run_pass(fmap.values[0], layer.padding, trace=True)
    _write_csv(path, _provenance(payload),
               ["cycle", "row_sources", "out_row", "out_col"],
               [list(row) for row in pe.trace_rows])


def cmd_dse(args) -> int:
    model = resolve_model(args.model)
    params = resolve_engine(args.engine)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = _config_payload(args)

    values = [int(v) for v in args.grid.split(",") if v.strip()]
    if not values or any(v < 1 for v in values):
        raise ConfigError(f"bad grid {args.grid!r}: need positive comma-separated values")
    grid = [(p_n, p_m) for p_n in values for p_m in values]
    points = analytics.dse_sweep(model, params, grid,
                                 memory_budget_bits=args.memory_budget_bits,
                                 bw_budget_bits=args.bw_budget_bits)
    rows = [[p.p_n, p.p_m, p.pe_count, round(p.peak_gops, 4), round(p.network_gops, 4),
             p.psum_buffer_bits, p.bw_bits_per_cycle,
             analytics.round_to_pow2(p.bw_bits_per_cycle), p.bw_extrapolated,
             p.fits_memory, p.fits_bandwidth] for p in points]
    _write_csv(out / "dse_grid.csv", _provenance(payload),
               ["p_n", "p_m", "pe_count", "peak_gops", "network_gops",
                "psum_buffer_bits", "bw_bits_per_cycle", "bw_rounded_pow2",
                "bw_extrapolated", "fits_memory", "fits_bandwidth"],
               rows)
    best = max(points, key=lambda p: p.network_gops)
    print(f"dse: {len(points)} points; best ({best.p_n},{best.p_m}) "
          f"{best.network_gops:.1f} GOPs/s")
    return 0


def cmd_compare(args) -> int:
    model = resolve_model(args.model)
    params = resolve_engine(args.engine)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = _config_payload(args)

    if args.reference:
        with open(args.reference, "r", encoding="utf-8") as fh:
            ref = json.load(fh)
    else:
        ref = analytics.load_eyeriss_reference()
    acc_rows, acc_total = analytics.network_access_report(
        model, params, args.overhead, args.psum_convention
    )
    if len(ref["layers"]) != len(acc_rows):
        raise ConfigError(
            f"reference has {len(ref['layers'])} layers, model has {len(acc_rows)}"
        )
    rows = []
    for layer, acc, r in zip(model.layers, acc_rows, ref["layers"]):
        ours_m = acc.total() / 1e6
        ratio = r["accesses_millions"] / ours_m if ours_m else math.inf
        rows.append([layer.index, round(ours_m, 4), r["accesses_millions"], round(ratio, 4)])
    ours_total_m = acc_total.total() / 1e6
    ref_total_m = ref["totals"]["accesses_millions"]
    total_ratio = ref_total_m / ours_total_m
    rows.append(["total", round(ours_total_m, 4), ref_total_m, round(total_ratio, 4)])
    _write_csv(out / "compare.csv", _provenance(payload),
               ["layer", "model_accesses_millions", "reference_accesses_millions", "ratio"],
               rows)
    print(f"compare: reference/model total access ratio {total_ratio:.2f}x")
    return 0


# --- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=TOOL,
        description="Analytical model and cycle-accurate verification for a "
                    "triangular-input-reuse systolic CNN accelerator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--model", default="vgg16",
                       help="builtin model name or model JSON path (default: vgg16)")
        p.add_argument("--engine", default="pn7_pm24",
                       help="engine JSON path or shipped config name (default: pn7_pm24)")
        p.add_argument("--out", default="out", help="output directory (default: ./out)")

    p = sub.add_parser("analyze", help="analytical per-layer and network report")
    common(p)
    p.add_argument("--overhead", type=float, default=analytics.DEFAULT_OVERHEAD,
                   help="ifmap external-fetch overhead fraction (default: 0.058)")
    p.add_argument("--psum-convention", choices=analytics.PSUM_CONVENTIONS,
                   default="single", help="psum transaction counting convention")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="cycle-accurate verification run")
    common(p)
    p.add_argument("--seed", type=int, default=0, help="stimulus seed (default: 0)")
    p.add_argument("--scale", type=int, default=1,
                   help="spatial divisor for desk-scale runs (default: 1)")
    p.add_argument("--trace", action="store_true",
                   help="dump a per-cycle slice trace for the first layer")
    p.add_argument("--inject-fault", action="store_true",
                   help="test hook: flip one weight bit in layer 1 to exercise the checker")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dse", help="design-space sweep over (P_N, P_M)")
    common(p)
    p.add_argument("--grid", default="1,4,8,16,24",
                   help="comma-separated parallelism values; the sweep is their "
                        "cross product (default: 1,4,8,16,24)")
    p.add_argument("--memory-budget-bits", type=int, default=11 * 2**20,
                   help="on-chip psum budget in bits (default: 11 Mib)")
    p.add_argument("--bw-budget-bits", type=int, default=1024,
                   help="I/O budget in bits/cycle (default: 1024)")
    p.set_defaults(func=cmd_dse)

    p = sub.add_parser("compare", help="model accesses vs reference accelerator")
    common(p)
    p.add_argument("--reference", default=None,
                   help="reference JSON (default: shipped row-stationary data)")
    p.add_argument("--overhead", type=float, default=analytics.DEFAULT_OVERHEAD)
    p.add_argument("--psum-convention", choices=analytics.PSUM_CONVENTIONS,
                   default="single")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except VerificationError as exc:
        print(json.dumps({"error": "verification", "detail": str(exc)}), file=sys.stderr)
        return 1
    except (TriarrayError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
