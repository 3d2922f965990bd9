"""
Experiment configuration: strict JSON schema, defaults, and the curve list a config expands to.

Unknown keys anywhere are errors; every error names the dotted field and, when it can be
located in the source text, the line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import orjson

from ..dicke_model import PhysicalParams
from ..dynamics import NORMAL_MODE, SOURCES
from ..errors import ConfigError, InvalidParameterError

PARAM_DEFAULTS: Dict[str, Any] = {
    "omega": 300.0,
    "omega0": None,  # follows omega
    "g": 1.0,
    "N1": 10000,
    "N2": 10000,
    "phi": 0.0,
    "nbar_ensembles": 0.0,
    "nbar_cavity": None,  # follows nbar_ensembles
}
# sweep-only shorthands that move both ensembles together
SWEEP_ALIASES = {"N": ("N1", "N2")}
INT_PARAMS = ("N1", "N2", "N")

_SECTIONS = {
    "name",
    "params",
    "time",
    "sweep",
    "propagator",
    "seed",
    "outputs",
    "oracle",
    "readout",
}


@dataclass(frozen=True)
class TimeGrid:
    start: float = 0.0
    stop: float = 0.1
    points: int = 2001

    def grid(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


@dataclass(frozen=True)
class Sweep:
    parameter: str
    values: Tuple[float, ...]


@dataclass(frozen=True)
class Outputs:
    csv: str = "timeseries.csv"
    svg: str = "logneg.svg"
    summary: str = "summary.json"


@dataclass(frozen=True)
class OracleOptions:
    n_ladder: Tuple[int, ...] = (2, 4, 8)
    t: float = 0.01
    initial_cutoff: int = 10
    max_cutoff: int = 160
    tolerance: float = 1e-6
    reference_N: int = 10000


@dataclass(frozen=True)
class ReadoutOptions:
    eta1: float = 1.0
    eta2: float = 1.0
    samples: int = 100_000
    trials: int = 100


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    params: Mapping[str, Any] = field(default_factory=lambda: dict(PARAM_DEFAULTS))
    time: TimeGrid = TimeGrid()
    sweep: Optional[Sweep] = None
    propagator: str = NORMAL_MODE
    seed: int = 0
    outputs: Outputs = Outputs()
    oracle: OracleOptions = OracleOptions()
    readout: ReadoutOptions = ReadoutOptions()
    # a config that carries a "readout" section also runs the readout phase
    readout_requested: bool = False
    source: Optional[str] = None

    def with_overrides(self, **changes: Any) -> "ExperimentConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        cfg = replace(self, **changes)
        validate(cfg)
        return cfg

    def base_params(self) -> PhysicalParams:
        return _resolve(self.params, "params")

    def curves(self) -> List[Tuple[str, PhysicalParams]]:
        """(curve_id, params) per sweep point, in sweep order; ids sort in that same order."""
        if self.sweep is None:
            return [(f"{self.name}-000", self.base_params())]
        out = []
        for k, value in enumerate(self.sweep.values):
            raw = dict(self.params)
            for key in SWEEP_ALIASES.get(self.sweep.parameter, (self.sweep.parameter,)):
                raw[key] = value
            out.append((f"{self.name}-{k:03d}-{self.sweep.parameter}={value:g}", _resolve(raw, "sweep.values")))
        return out

    def reference_params(self) -> PhysicalParams:
        """Reference system for the exact oracle: the base params at reference_N spins per ensemble."""
        n = self.oracle.reference_N
        return self.base_params().updated(N1=n, N2=n, nbar_ensembles=0.0, nbar_cavity=0.0)


def _resolve(raw: Mapping[str, Any], where: str) -> PhysicalParams:
    values = dict(raw)
    if values.get("omega0") is None:
        values["omega0"] = values["omega"]
    if values.get("nbar_cavity") is None:
        values["nbar_cavity"] = values["nbar_ensembles"]
    try:
        return PhysicalParams(**values)
    except InvalidParameterError as e:
        raise ConfigError(str(e), field=where) from e


def _line_of(text: str, key: str) -> Optional[int]:
    idx = text.find(f'"{key}"')
    return text.count("\n", 0, idx) + 1 if idx >= 0 else None


class _Reader:
    """Walks the decoded document, consuming keys so leftovers can be reported."""

    def __init__(self, text: str):
        self.text = text

    def fail(self, message: str, path: str) -> ConfigError:
        return ConfigError(message, field=path, line=_line_of(self.text, path.rsplit(".", 1)[-1]))

    def section(self, doc: Mapping[str, Any], key: str, allowed: Sequence[str]) -> Dict[str, Any]:
        sec = doc.get(key, {})
        if not isinstance(sec, dict):
            raise self.fail(f"section {key!r} must be an object", key)
        unknown = sorted(set(sec) - set(allowed))
        if unknown:
            raise self.fail(f"unknown key {unknown[0]!r} in {key!r}; allowed: {sorted(allowed)}", f"{key}.{unknown[0]}")
        return sec

    def number(self, sec: Mapping[str, Any], key: str, path: str, default: Any, integer: bool = False) -> Any:
        v = sec.get(key, default)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self.fail(f"expected a number, got {v!r}", path)
        if integer:
            if int(v) != v:
                raise self.fail(f"expected an integer, got {v!r}", path)
            return int(v)
        if not math.isfinite(v):
            raise self.fail(f"expected a finite number, got {v!r}", path)
        return float(v)

    def string(self, sec: Mapping[str, Any], key: str, path: str, default: str) -> str:
        v = sec.get(key, default)
        if not isinstance(v, str) or not v:
            raise self.fail(f"expected a non-empty string, got {v!r}", path)
        return v


def parse_config(text: str, source: Optional[str] = None) -> ExperimentConfig:
    try:
        doc = orjson.loads(text)
    except orjson.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg} (column {e.colno})", line=e.lineno) from None
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a JSON object")
    r = _Reader(text)

    unknown = sorted(set(doc) - _SECTIONS)
    if unknown:
        raise r.fail(f"unknown top-level key {unknown[0]!r}; allowed: {sorted(_SECTIONS)}", unknown[0])
    if "name" not in doc:
        raise ConfigError("missing required key", field="name")
    name = r.string(doc, "name", "name", "")

    p = r.section(doc, "params", list(PARAM_DEFAULTS))
    params = {
        k: r.number(p, k, f"params.{k}", default, integer=k in INT_PARAMS) for k, default in PARAM_DEFAULTS.items()
    }
    for k, v in params.items():
        if v is None and PARAM_DEFAULTS[k] is not None:
            raise r.fail("may not be null", f"params.{k}")

    t = r.section(doc, "time", ["start", "stop", "points"])
    time = TimeGrid(
        start=r.number(t, "start", "time.start", TimeGrid.start),
        stop=r.number(t, "stop", "time.stop", TimeGrid.stop),
        points=r.number(t, "points", "time.points", TimeGrid.points, integer=True),
    )

    sweep = None
    if "sweep" in doc:
        s = r.section(doc, "sweep", ["parameter", "values"])
        parameter = r.string(s, "parameter", "sweep.parameter", "")
        if parameter not in PARAM_DEFAULTS and parameter not in SWEEP_ALIASES:
            allowed = sorted(list(PARAM_DEFAULTS) + list(SWEEP_ALIASES))
            raise r.fail(f"unknown sweep parameter {parameter!r}; allowed: {allowed}", "sweep.parameter")
        raw_values = s.get("values")
        if not isinstance(raw_values, list):
            raise r.fail("sweep values must be a list", "sweep.values")
        values = tuple(
            r.number({"v": v}, "v", f"sweep.values[{i}]", None, integer=parameter in INT_PARAMS)
            for i, v in enumerate(raw_values)
        )
        sweep = Sweep(parameter=parameter, values=values)

    propagator = r.string(doc, "propagator", "propagator", NORMAL_MODE)
    seed = r.number(doc, "seed", "seed", 0, integer=True)

    o = r.section(doc, "outputs", ["csv", "svg", "summary"])
    outputs = Outputs(
        csv=r.string(o, "csv", "outputs.csv", Outputs.csv),
        svg=r.string(o, "svg", "outputs.svg", Outputs.svg),
        summary=r.string(o, "summary", "outputs.summary", Outputs.summary),
    )

    q = r.section(doc, "oracle", ["n_ladder", "t", "initial_cutoff", "max_cutoff", "tolerance", "reference_N"])
    ladder = q.get("n_ladder", list(OracleOptions.n_ladder))
    if not isinstance(ladder, list):
        raise r.fail("n_ladder must be a list", "oracle.n_ladder")
    oracle = OracleOptions(
        n_ladder=tuple(r.number({"v": v}, "v", f"oracle.n_ladder[{i}]", None, integer=True) for i, v in enumerate(ladder)),
        t=r.number(q, "t", "oracle.t", OracleOptions.t),
        initial_cutoff=r.number(q, "initial_cutoff", "oracle.initial_cutoff", OracleOptions.initial_cutoff, integer=True),
        max_cutoff=r.number(q, "max_cutoff", "oracle.max_cutoff", OracleOptions.max_cutoff, integer=True),
        tolerance=r.number(q, "tolerance", "oracle.tolerance", OracleOptions.tolerance),
        reference_N=r.number(q, "reference_N", "oracle.reference_N", OracleOptions.reference_N, integer=True),
    )

    ro = r.section(doc, "readout", ["eta1", "eta2", "samples", "trials"])
    readout = ReadoutOptions(
        eta1=r.number(ro, "eta1", "readout.eta1", ReadoutOptions.eta1),
        eta2=r.number(ro, "eta2", "readout.eta2", ReadoutOptions.eta2),
        samples=r.number(ro, "samples", "readout.samples", ReadoutOptions.samples, integer=True),
        trials=r.number(ro, "trials", "readout.trials", ReadoutOptions.trials, integer=True),
    )

    cfg = ExperimentConfig(
        name=name,
        params=params,
        time=time,
        sweep=sweep,
        propagator=propagator,
        seed=seed,
        outputs=outputs,
        oracle=oracle,
        readout=readout,
        readout_requested="readout" in doc,
        source=source,
    )
    validate(cfg, text)
    return cfg


def load_config(path: Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return parse_config(text, source=str(path))


def validate(cfg: ExperimentConfig, text: str = "") -> None:
    """Semantic checks beyond the schema; physics stability is checked by the runner."""
    r = _Reader(text)
    if cfg.time.points < 2:
        raise r.fail(f"need at least 2 time points, got {cfg.time.points}", "time.points")
    if cfg.time.start < 0:
        raise r.fail(f"time grid must start at >= 0, got {cfg.time.start}", "time.start")
    if cfg.time.stop <= cfg.time.start:
        raise r.fail(f"time.stop ({cfg.time.stop}) must exceed time.start ({cfg.time.start})", "time.stop")
    if cfg.sweep is not None and not cfg.sweep.values:
        raise r.fail("sweep values must be non-empty", "sweep.values")
    if cfg.propagator not in SOURCES:
        raise r.fail(f"unknown propagator {cfg.propagator!r}; expected one of {SOURCES}", "propagator")
    if cfg.seed < 0:
        raise r.fail(f"seed must be >= 0, got {cfg.seed}", "seed")
    if not cfg.oracle.n_ladder or any(n < 1 for n in cfg.oracle.n_ladder):
        raise r.fail("n_ladder must list positive spin counts", "oracle.n_ladder")
    if cfg.oracle.initial_cutoff < 1 or cfg.oracle.max_cutoff < 2 * cfg.oracle.initial_cutoff:
        raise r.fail("need 1 <= initial_cutoff and max_cutoff >= 2 * initial_cutoff", "oracle.max_cutoff")
    if cfg.oracle.tolerance <= 0 or cfg.oracle.t < 0:
        raise r.fail("oracle tolerance must be > 0 and t >= 0", "oracle.tolerance")
    if cfg.oracle.reference_N < 1:
        raise r.fail("reference_N must be >= 1", "oracle.reference_N")
    for key in ("eta1", "eta2"):
        v = getattr(cfg.readout, key)
        if not 0.0 <= v <= 1.0:
            raise r.fail(f"{key} must lie in [0, 1], got {v}", f"readout.{key}")
    if cfg.readout.samples < 2 or cfg.readout.trials < 0:
        raise r.fail("readout needs samples >= 2 and trials >= 0", "readout.samples")
    # surfaces parameter errors (e.g. negative nbar in a sweep) as config errors
    cfg.curves()
