import math

import numpy as np
import orjson
import pytest

from src.pipeline.runner import main
from src.result_writer import TIMESERIES_COLUMNS, read_timeseries

FIG2_JSON = {
    "name": "fig2",
    "params": {"omega": 300},
    "time": {"start": 0.0, "stop": 0.1, "points": 2001},
    "sweep": {"parameter": "omega", "values": [300, 500, 2000]},
}


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_bytes(orjson.dumps(doc, option=orjson.OPT_INDENT_2))
    return str(path)


def run(*argv):
    return main([*argv, "--quiet"])


def events_of(path):
    return [orjson.loads(line) for line in path.read_bytes().splitlines()]


@pytest.fixture(scope="module")
def fig2_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("fig2")
    events = out / "events.jsonl"
    code = main(["preset", "fig2", "--out-dir", str(out), "--quiet", "--events-jsonl", str(events)])
    return code, out, events


def test_fig2_preset_outputs(fig2_run):
    code, out, _ = fig2_run
    assert code == 0
    lines = (out / "timeseries.csv").read_text().splitlines()
    assert lines[0] == ",".join(TIMESERIES_COLUMNS)
    assert len(lines) == 3 * 2001 + 1
    assert (out / "logneg.svg").exists()
    assert (out / "run.log").exists()


def test_fig2_summary_checks(fig2_run):
    _, out, _ = fig2_run
    summary = orjson.loads((out / "summary.json").read_bytes())
    assert summary["checks"] == {"max_logneg_decreasing_in_omega": True, "all_return_below_floor": True}
    assert [c["curve_id"] for c in summary["curves"]] == [
        "fig2-000-omega=300",
        "fig2-001-omega=500",
        "fig2-002-omega=2000",
    ]
    assert all(c["t_star_consistent"] for c in summary["curves"])
    assert all(not c["hp_exceeded"] for c in summary["curves"])
    assert summary["curves"][0]["critical_omega"] == pytest.approx(200.0 * math.sqrt(2.0))


def test_fig2_events(fig2_run):
    _, _, events = fig2_run
    names = [e["event"] for e in events_of(events)]
    assert names[0] == "run_started"
    assert names[-1] == "run_completed"
    assert names.count("curve_completed") == 3
    assert "phase_started" in names and "phase_completed" in names


def test_rerun_is_byte_identical(fig2_run, tmp_path):
    _, out, _ = fig2_run
    assert run("preset", "fig2", "--out-dir", str(tmp_path)) == 0
    assert (tmp_path / "timeseries.csv").read_bytes() == (out / "timeseries.csv").read_bytes()


def test_config_equivalent_to_preset(fig2_run, tmp_path):
    _, out, _ = fig2_run
    cfg = write_config(tmp_path, FIG2_JSON)
    assert run("run", cfg, "--out-dir", str(tmp_path / "out")) == 0
    assert (tmp_path / "out" / "timeseries.csv").read_bytes() == (out / "timeseries.csv").read_bytes()
    assert not (tmp_path / "out" / "readout.json").exists()


def test_expm_propagator_agrees(fig2_run, tmp_path):
    _, out, _ = fig2_run
    cfg = write_config(tmp_path, {**FIG2_JSON, "time": {"start": 0.0, "stop": 0.1, "points": 101}})
    assert run("run", cfg, "--out-dir", str(tmp_path / "out"), "--propagator", "expm", "--format", "csv") == 0
    got = read_timeseries(tmp_path / "out" / "timeseries.csv")
    ref = read_timeseries(out / "timeseries.csv")
    for cid, cols in got.items():
        np.testing.assert_allclose(cols["logneg_bits"], ref[cid]["logneg_bits"][::20], atol=1e-8)


def test_validate_good_config(tmp_path):
    assert run("validate", write_config(tmp_path, FIG2_JSON)) == 0


def test_validate_unknown_key(tmp_path):
    doc = {**FIG2_JSON, "params": {"omega": 300, "omgea0": 300}}
    assert run("validate", write_config(tmp_path, doc)) == 2


def test_invalid_json_exit_code(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"name": "x",,}')
    assert run("run", str(path), "--out-dir", str(tmp_path / "out")) == 2


def test_unstable_sweep_rejected(tmp_path):
    doc = {
        "name": "unstable",
        "params": {"omega": 300},
        "time": {"stop": 0.01, "points": 11},
        "sweep": {"parameter": "N", "values": [1000, 10000, 100000]},
    }
    cfg = write_config(tmp_path, doc)
    assert run("validate", cfg) == 3
    events = tmp_path / "events.jsonl"
    assert run("run", cfg, "--out-dir", str(tmp_path / "out"), "--events-jsonl", str(events)) == 3
    assert not (tmp_path / "out" / "timeseries.csv").exists()
    failed = [e for e in events_of(events) if e["event"] == "run_failed"]
    assert failed and failed[0]["data"]["exit_code"] == 3
    assert failed[0]["data"]["error"] == "UnstableRegimeError"


def test_phase_pi_matches_phase_zero(tmp_path):
    doc = {
        "name": "phase",
        "params": {"omega": 300},
        "time": {"stop": 0.05, "points": 501},
        "sweep": {"parameter": "phi", "values": [0.0, math.pi]},
    }
    assert run("run", write_config(tmp_path, doc), "--out-dir", str(tmp_path / "out"), "--format", "csv") == 0
    data = read_timeseries(tmp_path / "out" / "timeseries.csv")
    assert len(data) == 2
    a, b = (data[k]["logneg_bits"] for k in sorted(data))
    np.testing.assert_allclose(a, b, atol=1e-9)
    assert not (tmp_path / "out" / "logneg.svg").exists()


def test_svg_only(tmp_path):
    doc = {"name": "single", "params": {"omega": 500}, "time": {"stop": 0.05, "points": 201}}
    assert run("run", write_config(tmp_path, doc), "--out-dir", str(tmp_path / "out"), "--format", "svg") == 0
    assert (tmp_path / "out" / "logneg.svg").exists()
    assert not (tmp_path / "out" / "timeseries.csv").exists()
    assert (tmp_path / "out" / "summary.json").exists()


def test_fig3_preset(tmp_path):
    assert run("preset", "fig3", "--out-dir", str(tmp_path), "--format", "csv", "--workers", "2") == 0
    summary = orjson.loads((tmp_path / "summary.json").read_bytes())
    assert summary["checks"] == {
        "max_logneg_decreasing_in_nbar": True,
        "onset_increasing_in_nbar": True,
        "hottest_still_entangled": True,
    }
    table = summary["temperature_table"]
    assert [row["nbar"] for row in table] == [0.0, 0.05, 0.1, 0.2]
    assert table[0]["kT_over_hbar_omega"] == 0.0
    assert table[2]["kT_over_hbar_omega"] == pytest.approx(1.0 / math.log(11.0))


@pytest.mark.slow
def test_oracle_verb(tmp_path):
    doc = {
        "name": "small-oracle",
        "params": {"omega": 300},
        "oracle": {"n_ladder": [1, 2], "initial_cutoff": 10, "max_cutoff": 40, "reference_N": 10000},
    }
    assert run("oracle", write_config(tmp_path, doc), "--out-dir", str(tmp_path / "out")) == 0
    lines = (tmp_path / "out" / "oracle.csv").read_text().splitlines()
    assert len(lines) == 3
    report = orjson.loads((tmp_path / "out" / "oracle.json").read_bytes())
    assert [row["n_spins"] for row in report["ladder"]] == [1, 2]
    assert report["vacuum_scan"]["entangled"] is True
    assert report["vacuum_scan"]["rotating_wave_entangled"] is False


@pytest.mark.slow
def test_readout_demo_preset(tmp_path):
    assert run("preset", "readout-demo", "--out-dir", str(tmp_path)) == 0
    report = orjson.loads((tmp_path / "readout.json").read_bytes())
    assert report["true_logneg"] > 0
    assert report["within_3_std_errors"] is True
    assert report["verified"] is True
    assert report["false_positives"] <= 0.01 * report["separable_trials"]
    assert 1e-3 <= report["t_star"] <= 5e-2


READOUT_JSON = {
    "name": "with-readout",
    "params": {"omega": 300},
    "time": {"stop": 0.05, "points": 501},
    "readout": {"eta1": 0.9, "eta2": 0.9, "samples": 2000, "trials": 2},
}


def test_run_with_readout_section(tmp_path):
    cfg = write_config(tmp_path, READOUT_JSON)
    reports = {}
    for label, seed in (("a", "1"), ("b", "1"), ("c", "2")):
        out = tmp_path / label
        assert run("run", cfg, "--out-dir", str(out), "--seed", seed, "--format", "csv") == 0
        assert (out / "timeseries.csv").exists()
        reports[label] = (out / "readout.json").read_bytes()
    first = orjson.loads(reports["a"])
    assert first["seed"] == 1
    assert first["eta1"] == 0.9
    assert first["samples_per_setting"] == 2000
    assert first["separable_trials"] == 4
    assert reports["a"] == reports["b"]
    assert orjson.loads(reports["c"])["estimated_logneg"] != first["estimated_logneg"]
