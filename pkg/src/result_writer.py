"""
Flat-file results: time-series CSV, oracle CSV and JSON summaries.

Frequencies and times are already in units of g (omega_over_g = omega, gt = t).
Rows are written in (curve_id, gt) order with fixed float formatting, so a rerun
with the same config and seed reproduces the files byte for byte.
"""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Sequence

import numpy as np
import orjson
from loguru import logger

from .dicke_model import PhysicalParams
from .entanglement import EntanglementSeries
from .exact_oracle import OracleComparison

TIMESERIES_COLUMNS = (
    "curve_id",
    "omega_over_g",
    "N",
    "nbar_ens",
    "nbar_cav",
    "phi",
    "gt",
    "logneg_bits",
    "hp_ratio_max",
    "symplectic_residual",
)
ORACLE_COLUMNS = (
    "n_spins",
    "cutoff",
    "t",
    "max_abs_deviation",
    "exact_logneg",
    "gaussian_logneg",
    "converged",
)
FLOAT_FORMAT = "%.12e"


def fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return FLOAT_FORMAT % float(value)


@dataclass(frozen=True, eq=False)
class CurveResult:
    curve_id: str
    params: PhysicalParams
    series: EntanglementSeries

    def rows(self) -> List[List[str]]:
        p = self.params
        hp = self.series.hp_report
        hp_rows = hp.ratios.max(axis=1) if hp is not None else np.zeros(len(self.series.times))
        out = []
        for t, res, hp_max, resid in zip(self.series.times, self.series.results, hp_rows, self.series.residuals):
            out.append(
                [
                    self.curve_id,
                    fmt(p.omega),
                    fmt(p.N1),
                    fmt(p.nbar_ensembles),
                    fmt(p.nbar_cavity),
                    fmt(p.phi),
                    fmt(t),
                    fmt(res.log_negativity),
                    fmt(hp_max),
                    fmt(resid),
                ]
            )
        return out


def _dumps(payload: Any) -> bytes:
    return orjson.dumps(
        payload,
        option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_APPEND_NEWLINE,
    )


class ResultWriter:
    """Owns the output directory; every artifact of a run goes through here."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.written: List[Path] = []
        logger.debug(f"[output] writing to {self.out_dir}")

    def _path(self, name: str) -> Path:
        path = self.out_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def _csv(self, name: str, header: Sequence[str], rows: Sequence[Sequence[str]]) -> Path:
        path = self._path(name)
        with path.open("w", encoding="utf-8", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        self.written.append(path)
        logger.info(f"[output] {len(rows)} rows -> {path}")
        return path

    def write_timeseries(self, curves: Sequence[CurveResult], name: str = "timeseries.csv") -> Path:
        rows: List[List[str]] = []
        for curve in sorted(curves, key=lambda c: c.curve_id):
            rows.extend(curve.rows())
        return self._csv(name, TIMESERIES_COLUMNS, rows)

    def write_oracle(self, comparisons: Sequence[OracleComparison], name: str = "oracle.csv") -> Path:
        rows = []
        for c in sorted(comparisons, key=lambda c: c.n_spins):
            d = asdict(c)
            rows.append([fmt(d[col]) for col in ORACLE_COLUMNS])
        return self._csv(name, ORACLE_COLUMNS, rows)

    def write_json(self, payload: Mapping[str, Any], name: str) -> Path:
        path = self._path(name)
        path.write_bytes(_dumps(dict(payload)))
        self.written.append(path)
        logger.info(f"[output] summary -> {path}")
        return path


def read_timeseries(path: Path) -> Dict[str, Dict[str, np.ndarray]]:
    """curve_id -> column -> values (numeric columns only)."""
    out: Dict[str, Dict[str, List[float]]] = {}
    with Path(path).open("r", encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            cols = out.setdefault(row["curve_id"], {c: [] for c in TIMESERIES_COLUMNS[1:]})
            for c in TIMESERIES_COLUMNS[1:]:
                cols[c].append(float(row[c]))
    return {cid: {c: np.array(v) for c, v in cols.items()} for cid, cols in out.items()}
