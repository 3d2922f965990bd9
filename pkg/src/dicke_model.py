"""
Two molecular ensembles coupled to one cavity mode, linearized by the lowest-order
Holstein-Primakoff mapping. Everything is in units of the coupling g (time in 1/g).

    H = 1/2 [p_c^2 + w0^2 x_c^2 + sum_i (p_i^2 + w^2 x_i^2 + 2 kappa_i x_i x_c)]
    kappa_i = 2 g_i sqrt(N_i w w0),  g_1 = g,  g_2 = g cos(phi)
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Sequence

import numpy as np
from loguru import logger

from .errors import InvalidParameterError, UnstableRegimeError, UnsupportedStateError
from .symplectic import GaussianState, ModeLayout, thermal_state

ENSEMBLE_1 = "ensemble-1"
ENSEMBLE_2 = "ensemble-2"
CAVITY = "cavity"
MODEL_LAYOUT = ModeLayout((ENSEMBLE_1, ENSEMBLE_2, CAVITY))
ENSEMBLES = (ENSEMBLE_1, ENSEMBLE_2)

# 1% of the ensemble can be excited before the linearization is flagged
HP_RATIO_THRESHOLD = 0.01


@dataclass(frozen=True)
class PhysicalParams:
    omega: float
    omega0: float
    N1: int
    N2: int
    g: float = 1.0
    phi: float = 0.0
    nbar_ensembles: float = 0.0
    nbar_cavity: float = 0.0

    def __post_init__(self) -> None:
        for name in ("omega", "omega0"):
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0:
                raise InvalidParameterError(f"{name} must be > 0, got {v}")
        for name in ("N1", "N2"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise InvalidParameterError(f"{name} must be a positive integer, got {v}")
            object.__setattr__(self, name, int(v))
        if not math.isfinite(self.g) or self.g < 0:
            raise InvalidParameterError(f"g must be >= 0, got {self.g}")
        if not math.isfinite(self.phi):
            raise InvalidParameterError(f"phi must be finite, got {self.phi}")
        for name in ("nbar_ensembles", "nbar_cavity"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise InvalidParameterError(f"{name} must be >= 0, got {v}")

    @property
    def g1(self) -> float:
        return self.g

    @property
    def g2(self) -> float:
        # projection of the phase-shifted coupling onto the coupled cavity quadrature
        return self.g * math.cos(self.phi)

    def couplings(self) -> tuple:
        k1 = 2.0 * self.g1 * math.sqrt(self.N1 * self.omega * self.omega0)
        k2 = 2.0 * self.g2 * math.sqrt(self.N2 * self.omega * self.omega0)
        return k1, k2

    def mode_frequencies(self) -> List[float]:
        return [self.omega, self.omega, self.omega0]

    def updated(self, **changes: Any) -> "PhysicalParams":
        return replace(self, **changes)

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


def effective_coupling(params: PhysicalParams) -> float:
    """sqrt(kappa_1^2 + kappa_2^2): strength of the bright ensemble combination on the cavity."""
    k1, k2 = params.couplings()
    return math.hypot(k1, k2)


def critical_coupling(params: PhysicalParams) -> float:
    """Effective coupling at which the potential loses positivity (kappa_eff = w w0)."""
    return params.omega * params.omega0


def critical_omega(params: PhysicalParams) -> float:
    """
    Molecular frequency at the superradiant boundary for the given g, N and phi.

    On resonance (omega0 == omega) both frequencies move together and the boundary is
    w^2 = 2 g sqrt(N1 + N2 cos^2 phi); e.g. 2*sqrt(2)*g*sqrt(N) for equal ensembles.
    Off resonance omega0 is held fixed.
    """
    weight = params.N1 + params.N2 * math.cos(params.phi) ** 2
    if params.omega0 == params.omega:
        return 2.0 * params.g * math.sqrt(weight)
    return 4.0 * params.g ** 2 * weight / params.omega0


@dataclass(frozen=True, eq=False)
class QuadraticHamiltonian:
    """H = 1/2 X^T M X with unit-mass kinetic terms; built from the position block V."""

    layout: ModeLayout
    potential: np.ndarray
    M: np.ndarray = field(init=False)
    normal_freqs: np.ndarray = field(init=False)
    normal_vectors: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        V = np.array(self.potential, dtype=float)
        n = self.layout.n_modes
        if V.shape != (n, n):
            raise InvalidParameterError(f"potential must be {n}x{n}, got {V.shape}")
        if not np.allclose(V, V.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.max(np.abs(V))))):
            raise InvalidParameterError("potential matrix must be symmetric")
        V = (V + V.T) / 2.0
        w2, R = np.linalg.eigh(V)
        if w2[0] <= 0:
            raise UnstableRegimeError(
                f"potential is not positive definite (min eigenvalue {w2[0]:.6g}); harmonic treatment fails",
                critical_omega=float("nan"),
                critical_coupling=float("nan"),
            )
        M = np.zeros((2 * n, 2 * n))
        M[0::2, 0::2] = V
        M[1::2, 1::2] = np.eye(n)
        for name, value in (("potential", V), ("M", M), ("normal_freqs", np.sqrt(w2)), ("normal_vectors", R)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    def expectation(self, state: GaussianState) -> float:
        """<H> = 1/4 tr(M cov) + 1/2 mean^T M mean."""
        return float(0.25 * np.trace(self.M @ state.cov) + 0.5 * state.mean @ self.M @ state.mean)


def build_hamiltonian(params: PhysicalParams) -> QuadraticHamiltonian:
    k1, k2 = params.couplings()
    w2, w02 = params.omega ** 2, params.omega0 ** 2
    V = np.array(
        [
            [w2, 0.0, k1],
            [0.0, w2, k2],
            [k1, k2, w02],
        ]
    )
    if np.linalg.eigvalsh(V)[0] <= 0:
        w_crit = critical_omega(params)
        k_crit = critical_coupling(params)
        raise UnstableRegimeError(
            f"unstable regime: effective coupling {effective_coupling(params):.6g} g^2 reaches the critical "
            f"coupling {k_crit:.6g} g^2 (omega={params.omega:g}g, critical omega={w_crit:.6g}g, "
            f"N1={params.N1}, N2={params.N2})",
            critical_omega=w_crit,
            critical_coupling=k_crit,
        )
    H = QuadraticHamiltonian(layout=MODEL_LAYOUT, potential=V)
    logger.debug(f"[model] normal frequencies {np.round(H.normal_freqs, 4).tolist()} for omega={params.omega:g}")
    return H


def initial_state(params: PhysicalParams) -> GaussianState:
    """Product of thermal (or vacuum) states of the decoupled oscillators."""
    return thermal_state(
        MODEL_LAYOUT,
        params.mode_frequencies(),
        [params.nbar_ensembles, params.nbar_ensembles, params.nbar_cavity],
    )


@dataclass(frozen=True, eq=False)
class HpValidityReport:
    ratios: np.ndarray  # shape (T, 2): r_1(t), r_2(t)
    max_ratio: tuple
    threshold: float
    exceeded: bool

    @property
    def overall_max(self) -> float:
        return float(max(self.max_ratio))


def hp_validity(
    trajectory: Sequence[GaussianState],
    params: PhysicalParams,
    threshold: float = HP_RATIO_THRESHOLD,
) -> HpValidityReport:
    """
    Excitation density r_i = <p_i^2 + w^2 x_i^2> / (2 w N_i) along a trajectory.

    Uses <A^2> = sigma_AA / 2, so the states must have zero mean.
    """
    w = params.omega
    Ns = (params.N1, params.N2)
    ratios = np.zeros((len(trajectory), 2))
    for k, state in enumerate(trajectory):
        if state.layout != MODEL_LAYOUT:
            raise UnsupportedStateError(f"HP monitor expects layout {MODEL_LAYOUT.labels}, got {state.layout.labels}")
        spread = np.sqrt(np.abs(np.diag(state.cov)))
        if np.any(np.abs(state.mean) > 1e-9 * np.maximum(spread, 1.0)):
            raise UnsupportedStateError("HP monitor requires zero-mean states")
        for i, label in enumerate(ENSEMBLES):
            b = state.block(label)
            ratios[k, i] = (b[1, 1] / 2.0 + w ** 2 * b[0, 0] / 2.0) / (2.0 * w * Ns[i])
    ratios.setflags(write=False)
    max_ratio = tuple(float(v) for v in ratios.max(axis=0)) if len(trajectory) else (0.0, 0.0)
    exceeded = max(max_ratio) > threshold
    if exceeded:
        logger.warning(f"[model] HP linearization questionable: max excitation ratio {max(max_ratio):.3g} > {threshold}")
    return HpValidityReport(ratios=ratios, max_ratio=max_ratio, threshold=threshold, exceeded=exceeded)
