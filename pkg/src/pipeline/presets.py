"""Built-in experiments and the qualitative checks reported alongside their summaries."""
from __future__ import annotations

from typing import Any, Callable, Dict, List, Mapping, Sequence, Tuple

from .config import PARAM_DEFAULTS, ExperimentConfig, OracleOptions, ReadoutOptions, Sweep, TimeGrid

PHASE_CURVES = "curves"
PHASE_ORACLE = "oracle"
PHASE_READOUT = "readout"

# first-peak timescale window, units of 1/g
T_STAR_WINDOW = (1e-3, 5e-2)


def _params(**changes: Any) -> Dict[str, Any]:
    p = dict(PARAM_DEFAULTS)
    p.update(changes)
    return p


def fig2() -> ExperimentConfig:
    return ExperimentConfig(
        name="fig2",
        params=_params(omega=300.0),
        time=TimeGrid(0.0, 0.1, 2001),
        sweep=Sweep("omega", (300.0, 500.0, 2000.0)),
    )


def fig3() -> ExperimentConfig:
    return ExperimentConfig(
        name="fig3",
        params=_params(omega=300.0),
        time=TimeGrid(0.0, 0.1, 2001),
        sweep=Sweep("nbar_ensembles", (0.0, 0.05, 0.1, 0.2)),
    )


def oracle_convergence() -> ExperimentConfig:
    return ExperimentConfig(name="oracle-convergence", params=_params(omega=300.0), oracle=OracleOptions())


def readout_demo() -> ExperimentConfig:
    return ExperimentConfig(
        name="readout-demo",
        params=_params(omega=300.0),
        time=TimeGrid(0.0, 0.05, 1001),
        seed=7,
        readout=ReadoutOptions(eta1=0.8, eta2=0.8, samples=100_000, trials=100),
    )


PRESETS: Dict[str, Tuple[Callable[[], ExperimentConfig], Tuple[str, ...]]] = {
    "fig2": (fig2, (PHASE_CURVES,)),
    "fig3": (fig3, (PHASE_CURVES,)),
    "oracle-convergence": (oracle_convergence, (PHASE_ORACLE,)),
    "readout-demo": (readout_demo, (PHASE_READOUT,)),
}


def _strictly(values: Sequence[float], increasing: bool) -> bool:
    if any(v is None for v in values):
        return False
    pairs = zip(values, values[1:])
    return all(b > a for a, b in pairs) if increasing else all(b < a for a, b in pairs)


def curve_checks(sweep: Sweep, curves: Sequence[Mapping[str, Any]]) -> Dict[str, Any]:
    """Trend checks along the sweep axis; which ones apply depends on the swept parameter."""
    maxima = [c["max_logneg"] for c in curves]
    checks: Dict[str, Any] = {}
    if sweep.parameter == "omega":
        order = sorted(range(len(curves)), key=lambda k: sweep.values[k])
        checks["max_logneg_decreasing_in_omega"] = _strictly([maxima[k] for k in order], increasing=False)
        checks["all_return_below_floor"] = all(c["returns_below"] for c in curves)
    if sweep.parameter.startswith("nbar"):
        order = sorted(range(len(curves)), key=lambda k: sweep.values[k])
        checks["max_logneg_decreasing_in_nbar"] = _strictly([maxima[k] for k in order], increasing=False)
        checks["onset_increasing_in_nbar"] = _strictly([curves[k]["onset_time"] for k in order], increasing=True)
        checks["hottest_still_entangled"] = maxima[order[-1]] > 0.0
    return checks


def t_star_consistent(t_star: Any) -> bool:
    return t_star is not None and T_STAR_WINDOW[0] <= t_star <= T_STAR_WINDOW[1]


def names() -> List[str]:
    return sorted(PRESETS)
