"""
Symplectic time evolution under a time-independent quadratic Hamiltonian.

Heisenberg flow dX/dt = Omega M X, so S(t) = exp(Omega M t). Two constructions:
  - "normal-mode": orthogonal diagonalization of the position block (exact, default)
  - "expm": scipy matrix exponential on balanced quadratures (cross-check)
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from scipy.linalg import expm

from .dicke_model import QuadraticHamiltonian
from .errors import InvalidParameterError, NumericalDegeneracyError, StepTooLargeError
from .symplectic import GaussianState, symplectic_form, symplectic_residual

NORMAL_MODE = "normal-mode"
MATRIX_EXPONENTIAL = "expm"
SOURCES = (NORMAL_MODE, MATRIX_EXPONENTIAL)

MAX_PHASE = 1e6
RESIDUAL_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class SymplecticPropagator:
    S: np.ndarray
    t: float
    source: str

    @property
    def residual(self) -> float:
        return symplectic_residual(self.S)

    def check(self) -> "SymplecticPropagator":
        res = self.residual
        bound = RESIDUAL_RTOL * max(1.0, float(np.linalg.norm(self.S, 2)) ** 2)
        if res >= bound:
            raise NumericalDegeneracyError(f"propagator ({self.source}, t={self.t:g}) is not symplectic", residual=res)
        return self


def _guard_step(H: QuadraticHamiltonian, t: float) -> None:
    if not np.isfinite(t):
        raise InvalidParameterError(f"time must be finite, got {t}")
    phase = abs(t) * float(np.max(H.normal_freqs))
    if phase > MAX_PHASE:
        raise StepTooLargeError(f"|t| * max normal frequency = {phase:.3g} exceeds {MAX_PHASE:g}; subdivide the step")


def _frozen(S: np.ndarray) -> np.ndarray:
    S = np.ascontiguousarray(S)
    S.setflags(write=False)
    return S


def propagator_expm(H: QuadraticHamiltonian, t: float) -> SymplecticPropagator:
    _guard_step(H, t)
    n = H.layout.n_modes
    # balance each mode with its bare frequency so x and p enter exp() on the same scale
    nu = np.sqrt(np.diag(H.potential))
    d = np.empty(2 * n)
    d[0::2], d[1::2] = np.sqrt(nu), 1.0 / np.sqrt(nu)
    A = symplectic_form(n) @ H.M
    A_bal = d[:, None] * A / d[None, :]
    S = expm(A_bal * t)
    S = S / d[:, None] * d[None, :]
    return SymplecticPropagator(S=_frozen(S), t=float(t), source=MATRIX_EXPONENTIAL).check()


def _rotation_block(nu: float, t: float) -> np.ndarray:
    c, s = np.cos(nu * t), np.sin(nu * t)
    return np.array([[c, s / nu], [-nu * s, c]])


def propagator_normal_mode(H: QuadraticHamiltonian, t: float) -> SymplecticPropagator:
    """V = R diag(nu^2) R^T; each normal mode rotates in its own phase plane."""
    _guard_step(H, t)
    n = H.layout.n_modes
    Sn = np.zeros((2 * n, 2 * n))
    for j, nu in enumerate(H.normal_freqs):
        Sn[2 * j : 2 * j + 2, 2 * j : 2 * j + 2] = _rotation_block(float(nu), t)
    T = np.kron(H.normal_vectors, np.eye(2))
    S = T @ Sn @ T.T
    return SymplecticPropagator(S=_frozen(S), t=float(t), source=NORMAL_MODE).check()


def make_propagator(H: QuadraticHamiltonian, t: float, source: str = NORMAL_MODE) -> SymplecticPropagator:
    if source == NORMAL_MODE:
        return propagator_normal_mode(H, t)
    if source == MATRIX_EXPONENTIAL:
        return propagator_expm(H, t)
    raise InvalidParameterError(f"unknown propagator source {source!r}; expected one of {SOURCES}")


def evolve(state: GaussianState, prop: SymplecticPropagator) -> GaussianState:
    S = prop.S
    if S.shape != (state.layout.dim, state.layout.dim):
        raise InvalidParameterError(f"propagator {S.shape} does not match a {state.layout.n_modes}-mode state")
    cov = S @ state.cov @ S.T
    return GaussianState(layout=state.layout, mean=S @ state.mean, cov=(cov + cov.T) / 2.0)


def check_grid(t_grid: Sequence[float]) -> np.ndarray:
    grid = np.asarray(t_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise InvalidParameterError("time grid must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(grid)):
        raise InvalidParameterError("time grid must be finite")
    if grid[0] < 0:
        raise InvalidParameterError(f"time grid must start at t >= 0, got {grid[0]}")
    if np.any(np.diff(grid) < 0):
        raise InvalidParameterError("time grid must be sorted ascending")
    return grid


def propagate_grid(H: QuadraticHamiltonian, t_grid: Sequence[float], source: str = NORMAL_MODE) -> List[SymplecticPropagator]:
    # one closed-form propagator per instant: no step-to-step accumulation
    return [make_propagator(H, float(t), source) for t in check_grid(t_grid)]


def trajectory(
    H: QuadraticHamiltonian,
    state0: GaussianState,
    t_grid: Sequence[float],
    source: str = NORMAL_MODE,
) -> List[GaussianState]:
    return [evolve(state0, prop) for prop in propagate_grid(H, t_grid, source)]
