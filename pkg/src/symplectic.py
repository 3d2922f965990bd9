"""
Continuous-variable foundation: mode layouts, the symplectic form, Gaussian states,
partial trace / transpose and symplectic eigenvalues.

Convention: quadratures interleaved per mode (x1, p1, x2, p2, ...), covariance
sigma_jk = <X_j X_k + X_k X_j> - 2 <X_j><X_k>, so the vacuum has symplectic eigenvalue 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from .errors import InvalidParameterError, NumericalDegeneracyError

PHYSICALITY_TOL = 1e-9
PAIRING_RTOL = 1e-8

_OMEGA_1 = np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass(frozen=True)
class ModeLayout:
    labels: Tuple[str, ...]

    def __post_init__(self) -> None:
        labels = tuple(self.labels)
        if not labels:
            raise InvalidParameterError("layout needs at least one mode")
        if len(set(labels)) != len(labels):
            raise InvalidParameterError(f"mode labels must be unique: {labels}")
        object.__setattr__(self, "labels", labels)

    @property
    def n_modes(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return 2 * len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise InvalidParameterError(f"unknown mode label {label!r}; layout has {self.labels}") from None

    def quadrature_indices(self, labels: Iterable[str]) -> List[int]:
        out: List[int] = []
        for label in labels:
            i = self.index(label)
            out.extend((2 * i, 2 * i + 1))
        return out

    def subset(self, keep: Iterable[str]) -> "ModeLayout":
        keep_set = set(keep)
        for label in keep_set:
            self.index(label)
        return ModeLayout(tuple(label for label in self.labels if label in keep_set))


def symplectic_form(n_modes: int) -> np.ndarray:
    return np.kron(np.eye(n_modes), _OMEGA_1)


def symplectic_residual(S: np.ndarray) -> float:
    """max-norm of S Omega S^T - Omega."""
    omega = symplectic_form(S.shape[0] // 2)
    return float(np.max(np.abs(S @ omega @ S.T - omega)))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GaussianState:
    layout: ModeLayout
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        mean = _frozen(self.mean)
        cov = _frozen(self.cov)
        d = self.layout.dim
        if mean.shape != (d,) or cov.shape != (d, d):
            raise InvalidParameterError(
                f"state dimensions {mean.shape}/{cov.shape} do not match layout of {self.layout.n_modes} modes"
            )
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.max(np.abs(cov))))):
            raise InvalidParameterError("covariance matrix must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    def physicality_margin(self) -> float:
        """Smallest eigenvalue of the Hermitian matrix cov + i*Omega (>= 0 for physical states)."""
        herm = self.cov + 1j * symplectic_form(self.layout.n_modes)
        return float(np.min(np.linalg.eigvalsh(herm)))

    def is_physical(self, tol: float = PHYSICALITY_TOL) -> bool:
        return self.physicality_margin() >= -tol

    def block(self, label: str) -> np.ndarray:
        i = self.layout.index(label)
        return np.array(self.cov[2 * i : 2 * i + 2, 2 * i : 2 * i + 2])

    def purity(self) -> float:
        return float(1.0 / np.sqrt(np.linalg.det(self.cov)))


def _check_positive(values: Sequence[float], what: str) -> None:
    for v in values:
        if not np.isfinite(v) or v <= 0:
            raise InvalidParameterError(f"{what} must be > 0, got {v}")


def thermal_state(layout: ModeLayout, freqs: Sequence[float], nbars: Sequence[float]) -> GaussianState:
    if len(freqs) != layout.n_modes or len(nbars) != layout.n_modes:
        raise InvalidParameterError("need one frequency and one occupation per mode")
    _check_positive(freqs, "mode frequency")
    for n in nbars:
        if not np.isfinite(n) or n < 0:
            raise InvalidParameterError(f"mean occupation must be >= 0, got {n}")
    blocks = [(2.0 * n + 1.0) * np.diag([1.0 / nu, nu]) for nu, n in zip(freqs, nbars)]
    cov = np.zeros((layout.dim, layout.dim))
    for i, b in enumerate(blocks):
        cov[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = b
    return GaussianState(layout=layout, mean=np.zeros(layout.dim), cov=cov)


def vacuum_state(layout: ModeLayout, freqs: Sequence[float]) -> GaussianState:
    return thermal_state(layout, freqs, [0.0] * layout.n_modes)


def partial_trace(state: GaussianState, keep: Iterable[str]) -> GaussianState:
    keep = list(keep)
    if not keep:
        raise InvalidParameterError("partial_trace needs at least one mode to keep")
    sub = state.layout.subset(keep)
    idx = state.layout.quadrature_indices(sub.labels)
    return GaussianState(layout=sub, mean=state.mean[idx], cov=state.cov[np.ix_(idx, idx)])


def partial_transpose(state: GaussianState, transposed_mode: str) -> GaussianState:
    """Flip p -> -p on one mode. The result is generally not a physical state."""
    if state.layout.n_modes < 2:
        raise InvalidParameterError("partial transpose needs a state with at least two modes")
    i = state.layout.index(transposed_mode)
    flip = np.ones(state.layout.dim)
    flip[2 * i + 1] = -1.0
    return GaussianState(
        layout=state.layout,
        mean=state.mean * flip,
        cov=state.cov * flip[:, None] * flip[None, :],
    )


def local_scaling(state: GaussianState, scales: Dict[str, float]) -> GaussianState:
    """(x_j, p_j) -> (s x_j, p_j / s) per listed mode; a local symplectic map."""
    d = np.ones(state.layout.dim)
    for label, s in scales.items():
        _check_positive([s], "scale")
        i = state.layout.index(label)
        d[2 * i], d[2 * i + 1] = s, 1.0 / s
    return GaussianState(layout=state.layout, mean=state.mean * d, cov=state.cov * d[:, None] * d[None, :])


def to_dimensionless(state: GaussianState, freqs: Sequence[float]) -> GaussianState:
    """x~ = sqrt(nu) x, p~ = p / sqrt(nu); vacuum covariance becomes the identity."""
    _check_positive(freqs, "mode frequency")
    return local_scaling(state, {label: float(np.sqrt(nu)) for label, nu in zip(state.layout.labels, freqs)})


def symplectic_eigenvalues(
    cov: np.ndarray,
    rtol: float = PAIRING_RTOL,
    return_residual: bool = False,
) -> Union[np.ndarray, Tuple[np.ndarray, float]]:
    """
    Symplectic eigenvalues from the spectrum of Omega.cov = {+-i gamma_j}.

    Returns the n values sorted ascending, plus the pairing residual (largest real part or
    +/- mismatch) when `return_residual` is set. Raises NumericalDegeneracyError when the
    eigenvalues do not come in purely imaginary +- pairs within rtol * ||cov||.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
        raise InvalidParameterError(f"covariance must be 2n x 2n, got {cov.shape}")
    n = cov.shape[0] // 2
    scale = max(float(np.linalg.norm(cov, 2)), np.finfo(float).tiny)
    eig = np.linalg.eigvals(symplectic_form(n) @ cov)

    upper = np.sort(eig.imag[eig.imag > 0])
    lower = np.sort(-eig.imag[eig.imag < 0])
    if len(upper) != n or len(lower) != n:
        raise NumericalDegeneracyError(
            "symplectic spectrum does not split into +-i pairs", residual=float(np.max(np.abs(eig.real)))
        )
    residual = max(float(np.max(np.abs(eig.real))), float(np.max(np.abs(upper - lower))))
    if residual > rtol * scale:
        raise NumericalDegeneracyError("symplectic eigenvalue pairing failed", residual=residual)
    values = (upper + lower) / 2.0
    return (values, residual) if return_residual else values


def thermal_temperature_table(nbars: Sequence[float]) -> List[Tuple[float, float]]:
    """(nbar, k_B T / hbar omega) pairs from inverting nbar = 1/(exp(hbar omega / k_B T) - 1)."""
    table = []
    for n in nbars:
        if n < 0:
            raise InvalidParameterError(f"mean occupation must be >= 0, got {n}")
        table.append((float(n), 0.0 if n == 0 else float(1.0 / np.log1p(1.0 / n))))
    return table
