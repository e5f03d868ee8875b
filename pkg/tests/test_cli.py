import json

import pytest

from triarray.cli import main, resolve_engine, resolve_model
from triarray.errors import ConfigError
from triarray.workload import builtin_vgg16, save_model_file


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_resolvers():
    assert resolve_model("vgg16").name == "vgg16"
    assert resolve_engine("pn7_pm24").p_n == 7
    assert resolve_engine("pn7_pm24.json").p_m == 24
    with pytest.raises(ConfigError):
        resolve_model("nope")
    with pytest.raises(ConfigError):
        resolve_engine("nope")


def test_analyze_reports_published_totals(tmp_path, capsys):
    code, out, _ = run(capsys, "analyze", "--out", str(tmp_path))
    assert code == 0
    assert "391.4 GOPs/s" in out
    summary = json.loads((tmp_path / "network.json").read_text())
    assert abs(summary["network"]["gops"] / 391 - 1) <= 0.01
    assert summary["network"]["peak_gops"] == 453.6
    assert abs(summary["network"]["mean_pe_utilization"] - 0.93) <= 0.01
    assert abs(summary["accesses"]["total_millions"] / 358.71 - 1) <= 0.10
    assert summary["sizing"]["io_bandwidth_bits_per_cycle"] == 1016
    assert summary["sizing"]["io_bandwidth_rounded_pow2"] == 1024
    lines = (tmp_path / "layers.csv").read_text().splitlines()
    assert lines[0].startswith("# triarray")
    assert lines[1].split(",")[0] == "layer"
    assert len(lines) == 2 + 13


def test_analyze_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    run(capsys, "analyze", "--out", str(a))
    run(capsys, "analyze", "--out", str(b))
    assert (a / "layers.csv").read_bytes() == (b / "layers.csv").read_bytes()
    assert (a / "network.json").read_bytes() == (b / "network.json").read_bytes()


def test_analyze_empty_model_is_config_error(tmp_path, capsys):
    bad = tmp_path / "empty.json"
    bad.write_text(json.dumps({"name": "empty", "layers": []}))
    code, _, err = run(capsys, "analyze", "--model", str(bad), "--out", str(tmp_path))
    assert code == 2
    assert json.loads(err.strip())["error"] == "ConfigError"


def test_simulate_scaled_passes(tmp_path, capsys):
    code, out, _ = run(capsys, "simulate", "--scale", "32", "--seed", "1",
                       "--out", str(tmp_path))
    assert code == 0
    assert out.count("PASS") == 13
    report = json.loads((tmp_path / "simulate_report.json").read_text())
    assert report["passed"] is True
    assert all(l["cycle_delta"] == 0 for l in report["layers"])


def test_simulate_is_bit_identical_under_fixed_config(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    run(capsys, "simulate", "--scale", "32", "--seed", "7", "--out", str(a))
    run(capsys, "simulate", "--scale", "32", "--seed", "7", "--out", str(b))
    assert (a / "simulate_report.json").read_bytes() == (b / "simulate_report.json").read_bytes()


def test_simulate_fault_injection_fails_with_location(tmp_path, capsys):
    code, out, _ = run(capsys, "simulate", "--scale", "32", "--seed", "1",
                       "--inject-fault", "--out", str(tmp_path))
    assert code == 1
    assert "FAIL" in out
    assert "first mismatch" in out


def test_simulate_trace_dump(tmp_path, capsys):
    code, _, _ = run(capsys, "simulate", "--scale", "32", "--seed", "1",
                     "--trace", "--out", str(tmp_path))
    assert code == 0
    lines = (tmp_path / "slice_trace.csv").read_text().splitlines()
    assert lines[1] == "cycle,row_sources,out_row,out_col"
    assert len(lines) == 2 + 7 * 7  # scale 32: first layer is 7x7


def test_dse_default_grid(tmp_path, capsys):
    code, out, _ = run(capsys, "dse", "--out", str(tmp_path))
    assert code == 0
    assert "best (24,24)" in out
    lines = (tmp_path / "dse_grid.csv").read_text().splitlines()
    assert len(lines) == 2 + 25


def test_dse_single_point(tmp_path, capsys):
    code, _, _ = run(capsys, "dse", "--grid", "7", "--out", str(tmp_path))
    assert code == 0
    lines = (tmp_path / "dse_grid.csv").read_text().splitlines()
    assert len(lines) == 2 + 1
    assert lines[2].split(",")[:2] == ["7", "7"]


def test_dse_bad_grid_is_config_error(tmp_path, capsys):
    code, _, err = run(capsys, "dse", "--grid", "0", "--out", str(tmp_path))
    assert code == 2
    assert json.loads(err.strip())["error"] == "ConfigError"


def test_compare_total_ratio(tmp_path, capsys):
    code, out, _ = run(capsys, "compare", "--out", str(tmp_path))
    assert code == 0
    lines = (tmp_path / "compare.csv").read_text().splitlines()
    total = lines[-1].split(",")
    assert total[0] == "total"
    assert abs(float(total[3]) / 5.1 - 1) <= 0.10


def test_compare_reference_against_itself_is_unity(tmp_path, capsys):
    # a reference whose access counts equal the model's own per-layer totals
    from triarray.analytics import network_access_report
    from triarray.cli import resolve_engine

    params = resolve_engine("pn7_pm24")
    rows, agg = network_access_report(builtin_vgg16(), params)
    ref = {
        "layers": [{"layer": i + 1, "accesses_millions": r.total() / 1e6}
                   for i, r in enumerate(rows)],
        "totals": {"accesses_millions": agg.total() / 1e6},
    }
    ref_path = tmp_path / "self.json"
    ref_path.write_text(json.dumps(ref))
    code, _, _ = run(capsys, "compare", "--reference", str(ref_path),
                     "--out", str(tmp_path))
    assert code == 0
    lines = (tmp_path / "compare.csv").read_text().splitlines()
    for line in lines[2:]:
        assert float(line.split(",")[3]) == pytest.approx(1.0, abs=1e-9)


def test_model_file_path_accepted(tmp_path, capsys):
    path = tmp_path / "model.json"
    save_model_file(builtin_vgg16(), path)
    code, _, _ = run(capsys, "analyze", "--model", str(path), "--out", str(tmp_path))
    assert code == 0
