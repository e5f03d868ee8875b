import math

import pytest
from hypothesis import given, strategies as st

from helpers import engine_for
from triarray.analytics import (
    AccessReport,
    access_model,
    clock_cycles,
    compare_reports,
    compute_cycles,
    cycle_model_report,
    dse_sweep,
    layer_throughput,
    load_eyeriss_reference,
    mac_utilization,
    network_access_report,
    network_throughput,
    network_utilization,
    peak_throughput,
    pe_utilization,
    round_to_pow2,
)
from triarray.engine_config import EngineParams, with_parallelism
from triarray.workload import CnnModel, LayerShape

TABLE_GOPS = (51.8, 368, 387, 387, 396, 432, 432, 422, 422, 422, 389, 389, 389)


def zero_latency(flagship):
    return EngineParams(**{**flagship.__dict__, "l_i": 0})


# --- clock cycles ----------------------------------------------------------------

def test_clock_cycles_cl2(flagship, vgg16):
    assert clock_cycles(vgg16.layers[1], zero_latency(flagship)) == 1_505_910


def test_clock_cycles_cl1(flagship, vgg16):
    assert clock_cycles(vgg16.layers[0], zero_latency(flagship)) == 501_970


def test_clock_cycles_single_step_collapse():
    layer = LayerShape(index=1, h_i=8, w_i=8, m=4, n=2, k=3, padding=1)
    params = engine_for(layer, p_n=2, p_m=4, l_i=0)
    assert clock_cycles(layer, params) == 2 * 3 + 8 * 8


# --- throughput --------------------------------------------------------------------

def test_layer_throughput_matches_published(flagship, vgg16):
    for layer, want in zip(vgg16.layers, TABLE_GOPS):
        got = layer_throughput(layer, flagship) / 1e9
        assert abs(got / want - 1) <= 0.01, f"CL{layer.index}: {got} vs {want}"


def test_network_throughput_391(flagship, vgg16):
    got = network_throughput(vgg16, flagship) / 1e9
    assert abs(got / 391 - 1) <= 0.01


def test_network_throughput_single_layer_collapse(flagship, vgg16):
    model = CnnModel(name="one", layers=(vgg16.layers[0],))
    assert network_throughput(model, flagship) == layer_throughput(vgg16.layers[0], flagship)


def test_peak_throughput_values(flagship):
    assert peak_throughput(flagship) == 453.6e9
    tiny = EngineParams(k=1, p_m=1, p_n=1, b=8, w_im=1, h_om=1, w_om=1, f_clk_hz=1.0)
    assert peak_throughput(tiny) == 2.0
    big = with_parallelism(flagship, p_n=24, p_m=24)
    assert peak_throughput(big) == 1555.2e9


def test_peak_gap_13_8_percent(flagship, vgg16):
    rep = cycle_model_report(vgg16, flagship)
    assert abs(rep.peak_gap * 100 - 13.8) <= 1.0


@given(f=st.floats(1e6, 1e9))
def test_throughput_scales_linearly_with_clock(f, vgg16):
    layer = vgg16.layers[3]
    base = engine_for(layer, p_n=3, p_m=5, f_clk_hz=1e6, l_i=0)
    scaled = EngineParams(**{**base.__dict__, "f_clk_hz": f})
    ratio = layer_throughput(layer, scaled) / layer_throughput(layer, base)
    assert ratio == pytest.approx(f / 1e6, rel=1e-12)


# --- utilization ---------------------------------------------------------------------

def test_pe_utilization_occupancy_model(flagship, vgg16):
    assert pe_utilization(vgg16.layers[0], flagship) == pytest.approx(0.125)
    assert pe_utilization(vgg16.layers[1], flagship) == 1.0
    mean = network_utilization(vgg16, flagship)
    assert abs(mean - 0.93) <= 0.01


def test_mac_utilization_alternative_is_bounded(flagship, vgg16):
    for layer in vgg16.layers:
        assert 0 < mac_utilization(layer, flagship) < 1


# --- access model ------------------------------------------------------------------

def test_access_categories_vs_published_totals(flagship, vgg16):
    _, agg = network_access_report(vgg16, flagship)
    assert abs(agg.total() / 358.71e6 - 1) <= 0.10
    assert abs(agg.ifmap / 259.26e6 - 1) <= 0.10
    assert abs(agg.weight / 14.03e6 - 1) <= 0.05
    assert abs(agg.ofmap / 12.92e6 - 1) <= 0.05
    # the single-transaction convention lands in tolerance, the double one
    # does not; acceptance binds to the reconciled (single) convention
    assert abs(agg.psum_single / 72.5e6 - 1) <= 0.25
    assert agg.total("double") > agg.total("single")


def test_access_model_no_temporal_accumulation():
    layer = LayerShape(index=1, h_i=8, w_i=8, m=4, n=2, k=3, padding=1)
    acc = access_model(layer, engine_for(layer, p_n=2, p_m=8), overhead=0.0)
    assert acc.psum_single == 0 and acc.psum_double == 0


def test_access_model_formulas():
    layer = LayerShape(index=1, h_i=10, w_i=12, m=9, n=5, k=3, padding=1)
    params = engine_for(layer, p_n=2, p_m=4)
    acc = access_model(layer, params, overhead=0.0)
    g = math.ceil(9 / 4)
    assert acc.ifmap == math.ceil(5 / 2) * 9 * 10 * 12
    assert acc.weight == 5 * 9 * 9
    assert acc.psum_single == (g - 1) * layer.h_o * layer.w_o * 5
    assert acc.psum_double == 2 * acc.psum_single
    assert acc.ofmap == layer.h_o * layer.w_o * 5
    assert acc.total() == acc.ifmap + acc.weight + acc.psum_single + acc.ofmap


def test_compare_reports_identity_is_all_ones():
    layer = LayerShape(index=1, h_i=8, w_i=8, m=4, n=2, k=3, padding=1)
    acc = access_model(layer, engine_for(layer, p_n=2, p_m=8), overhead=0.0)
    ratios = compare_reports(acc, acc)
    assert all(v == 1.0 for v in ratios.values())  # includes 0/0 psums


def test_compare_reports_scaling():
    a = AccessReport(ifmap=10, weight=4, psum_single=2, psum_double=4, ofmap=4, overhead=0)
    b = AccessReport(ifmap=20, weight=8, psum_single=4, psum_double=8, ofmap=8, overhead=0)
    assert compare_reports(a, b)["total"] == 2.0


def test_reference_ratio_about_5x(flagship, vgg16):
    _, agg = network_access_report(vgg16, flagship)
    ref = load_eyeriss_reference()
    ratio = ref["totals"]["accesses_millions"] * 1e6 / agg.total()
    assert abs(ratio / 5.1 - 1) <= 0.10


def test_published_per_layer_ratios_transcribed_consistently():
    # ratios quoted for the comparison table follow from its own columns
    ref = load_eyeriss_reference()
    assert ref["layers"][1]["accesses_millions"] / 41.92 == pytest.approx(9.55, abs=0.01)
    assert ref["layers"][7]["accesses_millions"] / 21.91 == pytest.approx(2.45, abs=0.01)
    total = sum(l["accesses_millions"] for l in ref["layers"])
    assert total == pytest.approx(ref["totals"]["accesses_millions"], abs=0.01)


# --- design space sweep ----------------------------------------------------------------

def test_dse_grid_shape_and_best_point(flagship, vgg16):
    grid = [(pn, pm) for pn in (1, 4, 8, 16, 24) for pm in (1, 4, 8, 16, 24)]
    points = dse_sweep(vgg16, flagship, grid)
    assert len(points) == 25
    best = max(points, key=lambda p: p.network_gops)
    assert (best.p_n, best.p_m) == (24, 24)
    assert abs(best.network_gops / 1243 - 1) <= 0.02
    worst = min(points, key=lambda p: p.network_gops)
    assert (worst.p_n, worst.p_m) == (1, 1)
    assert worst.psum_buffer_bits == min(p.psum_buffer_bits for p in points)
    assert worst.bw_bits_per_cycle == min(p.bw_bits_per_cycle for p in points)


def test_dse_equal_pe_pair(flagship, vgg16):
    pts = dse_sweep(vgg16, flagship, [(4, 16), (16, 4)])
    a, b = pts
    assert a.pe_count == b.pe_count == 576
    # near-equal throughput: the weight-loading term differs with P_N and the
    # first layer's ceilings misalign, so equality holds to ~1%
    assert abs(a.network_gops / b.network_gops - 1) <= 0.02
    assert b.psum_buffer_bits == 4 * a.psum_buffer_bits
    bw_ratio = a.bw_bits_per_cycle / b.bw_bits_per_cycle
    assert abs(bw_ratio / 2.3 - 1) <= 0.05


def test_dse_equal_pe_compute_cycles_identical_when_aligned(flagship, vgg16):
    pa = with_parallelism(flagship, p_n=4, p_m=16)
    pb = with_parallelism(flagship, p_n=16, p_m=4)
    for layer in vgg16.layers:
        if layer.m % 16 == 0 and layer.n % 16 == 0:
            assert compute_cycles(layer, pa) == compute_cycles(layer, pb)


def test_dse_feasibility_frontier_includes_flagship(flagship, vgg16):
    grid = [(7, 24), (8, 24), (24, 24)]
    pts = dse_sweep(vgg16, flagship, grid,
                    memory_budget_bits=11 * 2**20, bw_budget_bits=1024)
    by_point = {(p.p_n, p.p_m): p for p in pts}
    assert by_point[(7, 24)].fits_memory and by_point[(7, 24)].fits_bandwidth
    assert not by_point[(8, 24)].fits_memory
    assert not by_point[(24, 24)].fits_memory


def test_peak_dominates_network_everywhere(flagship, vgg16):
    grid = [(pn, pm) for pn in (1, 4, 8, 16, 24) for pm in (1, 4, 8, 16, 24)]
    for p in dse_sweep(vgg16, flagship, grid):
        assert p.peak_gops >= p.network_gops


def test_round_to_pow2():
    assert round_to_pow2(1016) == 1024
    assert round_to_pow2(1) == 1
    assert round_to_pow2(48) == 64
    assert round_to_pow2(96) == 128  # tie rounds up
    assert round_to_pow2(95) == 64
