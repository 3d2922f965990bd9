"""Logarithmic negativity (base 2) of the two-ensemble reduced state, and time-series helpers."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dicke_model import ENSEMBLE_1, ENSEMBLE_2, HpValidityReport, PhysicalParams, QuadraticHamiltonian, hp_validity
from .dynamics import NORMAL_MODE, evolve, propagate_grid
from .errors import InvalidParameterError
from .symplectic import GaussianState, partial_trace, partial_transpose, symplectic_eigenvalues

NOISE_FLOOR = 1e-3
DEFAULT_PARTITION: Tuple[Tuple[str, ...], Tuple[str, ...]] = ((ENSEMBLE_1,), (ENSEMBLE_2,))


@dataclass(frozen=True, eq=False)
class EntanglementResult:
    log_negativity: float
    symplectic_spectrum_pt: np.ndarray
    reduced_purity: float
    pairing_residual: float = 0.0

    @property
    def min_pt_eigenvalue(self) -> float:
        return float(self.symplectic_spectrum_pt[0])


def log_negativity_from_spectrum(spectrum: Sequence[float]) -> float:
    total = -sum(math.log2(min(1.0, abs(float(g)))) for g in spectrum)
    return max(0.0, total) + 0.0


def log_negativity(
    state: GaussianState,
    partition: Tuple[Sequence[str], Sequence[str]] = DEFAULT_PARTITION,
) -> EntanglementResult:
    """Trace down to A u B, transpose the B momenta, and sum -log2 min(1, gamma~) over the spectrum."""
    a, b = (tuple(part) for part in partition)
    if not a or not b:
        raise InvalidParameterError("both sides of the partition must be non-empty")
    if set(a) & set(b):
        raise InvalidParameterError(f"partition sides overlap: {sorted(set(a) & set(b))}")
    reduced = partial_trace(state, a + b)
    transposed = reduced
    for label in b:
        transposed = partial_transpose(transposed, label)
    spectrum, residual = symplectic_eigenvalues(transposed.cov, return_residual=True)
    spectrum.setflags(write=False)
    return EntanglementResult(
        log_negativity=log_negativity_from_spectrum(spectrum),
        symplectic_spectrum_pt=spectrum,
        reduced_purity=reduced.purity(),
        pairing_residual=residual,
    )


@dataclass(frozen=True, eq=False)
class EntanglementSeries:
    times: np.ndarray
    results: List[EntanglementResult]
    residuals: np.ndarray
    hp_report: Optional[HpValidityReport]

    @property
    def values(self) -> np.ndarray:
        return np.array([r.log_negativity for r in self.results])

    def first_peak(self, floor: float = NOISE_FLOOR) -> Optional[Tuple[float, float]]:
        return first_peak(self.times, self.values, floor)

    def onset_time(self, threshold: float = NOISE_FLOOR) -> Optional[float]:
        return onset_time(self.times, self.values, threshold)


def entanglement_trajectory(
    H: QuadraticHamiltonian,
    state0: GaussianState,
    t_grid: Sequence[float],
    params: Optional[PhysicalParams] = None,
    source: str = NORMAL_MODE,
) -> EntanglementSeries:
    props = propagate_grid(H, t_grid, source)
    states = [evolve(state0, p) for p in props]
    results = [log_negativity(s) for s in states]
    return EntanglementSeries(
        times=np.array([p.t for p in props]),
        results=results,
        residuals=np.array([p.residual for p in props]),
        hp_report=hp_validity(states, params) if params is not None else None,
    )


def first_peak(
    times: Sequence[float],
    values: Sequence[float],
    floor: float = NOISE_FLOOR,
) -> Optional[Tuple[float, float]]:
    """First interior local maximum above `floor`, refined by a parabola through its three grid points."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.size == 0 or t.shape != v.shape:
        raise InvalidParameterError("first_peak needs non-empty, equally long times and values")
    for k in range(1, len(v) - 1):
        if v[k] > floor and v[k - 1] < v[k] >= v[k + 1]:
            return _parabolic_vertex(t[k - 1 : k + 2], v[k - 1 : k + 2])
    return None


def _parabolic_vertex(t3: np.ndarray, v3: np.ndarray) -> Tuple[float, float]:
    a, b, c = np.polyfit(t3 - t3[1], v3, 2)
    if a >= 0:
        return float(t3[1]), float(v3[1])
    dt = float(np.clip(-b / (2.0 * a), t3[0] - t3[1], t3[2] - t3[1]))
    return float(t3[1] + dt), float(c + b * dt + a * dt * dt)


def onset_time(times: Sequence[float], values: Sequence[float], threshold: float = NOISE_FLOOR) -> Optional[float]:
    above = np.nonzero(np.asarray(values, dtype=float) > threshold)[0]
    return float(np.asarray(times, dtype=float)[above[0]]) if above.size else None


def returns_below(times: Sequence[float], values: Sequence[float], floor: float = NOISE_FLOOR) -> bool:
    """Whether the series drops back under `floor` after its first peak."""
    peak = first_peak(times, values, floor)
    if peak is None:
        return False
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    return bool(np.any(v[t > peak[0]] < floor))
