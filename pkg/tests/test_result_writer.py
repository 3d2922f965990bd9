import numpy as np
import orjson

from src.dicke_model import PhysicalParams, build_hamiltonian, initial_state
from src.entanglement import entanglement_trajectory
from src.exact_oracle import OracleComparison
from src.result_writer import TIMESERIES_COLUMNS, CurveResult, ResultWriter, fmt, read_timeseries


def curve(curve_id: str, omega: float) -> CurveResult:
    p = PhysicalParams(omega=omega, omega0=omega, N1=10_000, N2=10_000)
    series = entanglement_trajectory(build_hamiltonian(p), initial_state(p), np.linspace(0.0, 0.01, 5), p)
    return CurveResult(curve_id=curve_id, params=p, series=series)


def test_fmt():
    assert fmt(0.1) == "1.000000000000e-01"
    assert fmt(10_000) == "10000"
    assert fmt(True) == "true"
    assert fmt(None) == ""


def test_rows_sorted_by_curve_id(tmp_path):
    writer = ResultWriter(tmp_path / "out")
    path = writer.write_timeseries([curve("b-001", 500.0), curve("b-000", 300.0)], "ts.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(TIMESERIES_COLUMNS)
    assert len(lines) == 11
    assert lines[1].startswith("b-000,3.000000000000e+02,10000,")
    assert lines[-1].startswith("b-001,")
    data = read_timeseries(path)
    assert set(data) == {"b-000", "b-001"}
    np.testing.assert_allclose(data["b-000"]["gt"], np.linspace(0.0, 0.01, 5))
    np.testing.assert_allclose(data["b-000"]["hp_ratio_max"][0], 5e-5)


def test_oracle_csv_and_json(tmp_path):
    writer = ResultWriter(tmp_path)
    comps = [
        OracleComparison(4, 20, True, 1e-8, 0.01, 0.02, None, 0.3),
        OracleComparison(2, 20, True, 1e-8, 0.01, 0.04, 0.1, 0.3),
    ]
    lines = writer.write_oracle(comps).read_text().splitlines()
    assert lines[0] == "n_spins,cutoff,t,max_abs_deviation,exact_logneg,gaussian_logneg,converged"
    assert lines[1].startswith("2,20,")
    assert lines[2].split(",")[4] == ""
    payload = orjson.loads(writer.write_json({"a": np.array([1.0, 2.0]), "b": None}, "s.json").read_bytes())
    assert payload == {"a": [1.0, 2.0], "b": None}
    assert len(writer.written) == 2
