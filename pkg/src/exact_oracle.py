"""
Brute-force oracle: exact evolution of the full spin-boson Hamiltonian (counter-rotating
terms kept, no Holstein-Primakoff) for small ensembles in a truncated photon space.

    H = w0 a^dag a + w (Jz_1 + Jz_2) + sum_i g_i (a + a^dag)(J+_i + J-_i)

With `rotating_wave=True` the coupling keeps only g_i (a J+_i + a^dag J-_i), which conserves
the excitation number and leaves |down, down, 0> stationary.

Basis: spin-1 (x) spin-2 (x) Fock, lexicographic; spin index k <-> m = -j + k.
Only the symmetric Dicke sector (j = N/2) is represented.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sparse
from loguru import logger
from scipy.sparse.linalg import eigsh, expm_multiply

from .dicke_model import ENSEMBLES, MODEL_LAYOUT, PhysicalParams, build_hamiltonian, initial_state
from .dynamics import evolve, make_propagator
from .entanglement import log_negativity
from .errors import ConvergenceError, DimensionCapError, InvalidParameterError
from .symplectic import GaussianState, partial_trace, to_dimensionless

MAX_DIMENSION = 200_000
DENSE_MAX = 2000
REDUCED_MAX = 100
NORM_TOL = 1e-9


@dataclass(frozen=True)
class TruncatedSpace:
    j1: float
    j2: float
    photon_cutoff: int

    def __post_init__(self) -> None:
        for name in ("j1", "j2"):
            j = getattr(self, name)
            if j <= 0 or (2 * j) != int(2 * j):
                raise InvalidParameterError(f"{name} must be a positive half-integer, got {j}")
        if self.photon_cutoff < 1:
            raise InvalidParameterError(f"photon cutoff must be >= 1, got {self.photon_cutoff}")
        if self.dimension > MAX_DIMENSION:
            raise DimensionCapError(f"truncated space has dimension {self.dimension} > {MAX_DIMENSION}")

    @classmethod
    def for_ensembles(cls, N1: int, N2: int, photon_cutoff: int) -> "TruncatedSpace":
        return cls(j1=N1 / 2.0, j2=N2 / 2.0, photon_cutoff=photon_cutoff)

    @property
    def dims(self) -> tuple:
        return int(2 * self.j1 + 1), int(2 * self.j2 + 1), self.photon_cutoff + 1

    @property
    def dimension(self) -> int:
        d1, d2, dn = self.dims
        return d1 * d2 * dn

    def index(self, m1: float, m2: float, n: int) -> int:
        _, d2, dn = self.dims
        return (int(m1 + self.j1) * d2 + int(m2 + self.j2)) * dn + n


@dataclass(frozen=True, eq=False)
class ExactState:
    space: TruncatedSpace
    psi: np.ndarray
    t: float = 0.0

    def __post_init__(self) -> None:
        psi = np.array(self.psi, dtype=complex)
        if psi.shape != (self.space.dimension,):
            raise InvalidParameterError(f"amplitude vector {psi.shape} does not match dimension {self.space.dimension}")
        drift = abs(float(np.linalg.norm(psi)) - 1.0)
        if drift > NORM_TOL:
            raise ConvergenceError("state vector is not normalized", residual=drift)
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)


def _spin_lowering(j: float) -> sparse.csr_matrix:
    m = np.arange(-j, j)  # lower state of each pair
    return sparse.diags(np.sqrt((j - m) * (j + m + 1)), 1, format="csr")


def _spin_z(j: float) -> sparse.csr_matrix:
    return sparse.diags(np.arange(-j, j + 1), 0, format="csr")


def _annihilation(cutoff: int) -> sparse.csr_matrix:
    return sparse.diags(np.sqrt(np.arange(1, cutoff + 1)), 1, format="csr")


@dataclass(frozen=True, eq=False)
class _Operators:
    jz1: sparse.csr_matrix
    jz2: sparse.csr_matrix
    jx1: sparse.csr_matrix
    jx2: sparse.csr_matrix
    jy1: sparse.csr_matrix
    jy2: sparse.csr_matrix
    jp1: sparse.csr_matrix
    jp2: sparse.csr_matrix
    a: sparse.csr_matrix
    n: sparse.csr_matrix


def _operators(space: TruncatedSpace) -> _Operators:
    d1, d2, dn = space.dims
    i1, i2, ic = (sparse.identity(d, format="csr") for d in (d1, d2, dn))

    def embed(o1=None, o2=None, oc=None) -> sparse.csr_matrix:
        o1 = i1 if o1 is None else o1
        o2 = i2 if o2 is None else o2
        oc = ic if oc is None else oc
        return sparse.kron(sparse.kron(o1, o2), oc, format="csr")

    jm1, jm2 = _spin_lowering(space.j1), _spin_lowering(space.j2)
    a = _annihilation(space.photon_cutoff)
    return _Operators(
        jz1=embed(o1=_spin_z(space.j1)),
        jz2=embed(o2=_spin_z(space.j2)),
        jx1=embed(o1=(jm1 + jm1.T) / 2.0),
        jx2=embed(o2=(jm2 + jm2.T) / 2.0),
        jy1=embed(o1=(jm1.T - jm1) / 2j),
        jy2=embed(o2=(jm2.T - jm2) / 2j),
        jp1=embed(o1=jm1.T),
        jp2=embed(o2=jm2.T),
        a=embed(oc=a),
        n=embed(oc=(a.T @ a)),
    )


def build_exact_hamiltonian(
    params: PhysicalParams,
    space: TruncatedSpace,
    rotating_wave: bool = False,
) -> sparse.csr_matrix:
    """Real symmetric sparse H; (a + a^dag)(J+ + J-) = 2 (a + a^dag) Jx keeps all four products."""
    ops = _operators(space)
    if rotating_wave:
        coupling = [ops.a @ jp + ops.a.T @ jp.T for jp in (ops.jp1, ops.jp2)]
    else:
        field_x = ops.a + ops.a.T
        coupling = [field_x @ (2.0 * jx) for jx in (ops.jx1, ops.jx2)]
    H = (
        params.omega0 * ops.n
        + params.omega * (ops.jz1 + ops.jz2)
        + params.g1 * coupling[0]
        + params.g2 * coupling[1]
    )
    H = sparse.csr_matrix(H)
    H.eliminate_zeros()
    return H


def ground_product_state(space: TruncatedSpace) -> ExactState:
    """|m=-j1>|m=-j2>|0>: ground state of the decoupled Hamiltonian."""
    psi = np.zeros(space.dimension, dtype=complex)
    psi[space.index(-space.j1, -space.j2, 0)] = 1.0
    return ExactState(space=space, psi=psi, t=0.0)


def ground_energy(H: sparse.csr_matrix) -> float:
    if H.shape[0] <= DENSE_MAX:
        return float(np.linalg.eigvalsh(H.toarray())[0])
    return float(eigsh(H, k=1, which="SA", return_eigenvectors=False)[0])


def _checked(space: TruncatedSpace, psi: np.ndarray, t: float) -> ExactState:
    drift = abs(float(np.linalg.norm(psi)) - 1.0)
    if drift > NORM_TOL:
        raise ConvergenceError(f"norm drift during exact evolution to t={t:g}", residual=drift)
    return ExactState(space=space, psi=psi / np.linalg.norm(psi), t=float(t))


def evolve_exact(H: sparse.csr_matrix, psi0: ExactState, t: float) -> ExactState:
    """psi(t) = exp(-i H t) psi0 via scipy's Krylov-type expm_multiply."""
    if t < 0 or not math.isfinite(t):
        raise InvalidParameterError(f"exact evolution needs finite t >= 0, got {t}")
    if t == 0:
        return ExactState(space=psi0.space, psi=psi0.psi, t=psi0.t)
    psi = expm_multiply(-1j * t * H, np.array(psi0.psi))
    return _checked(psi0.space, psi, psi0.t + t)


def exact_trajectory(H: sparse.csr_matrix, psi0: ExactState, times: Sequence[float]) -> List[ExactState]:
    """States at each time; dense eigendecomposition when small, else chained Krylov steps."""
    times = [float(t) for t in times]
    if any(t < 0 for t in times) or any(b < a for a, b in zip(times, times[1:])):
        raise InvalidParameterError("exact trajectory needs a sorted grid of times >= 0")
    if H.shape[0] <= DENSE_MAX:
        energies, vecs = np.linalg.eigh(H.toarray())
        coeffs = vecs.T @ psi0.psi
        return [_checked(psi0.space, vecs @ (np.exp(-1j * energies * t) * coeffs), psi0.t + t) for t in times]
    out: List[ExactState] = []
    state, last = psi0, 0.0
    for t in times:
        state = evolve_exact(H, state, t - last)
        last = t
        out.append(ExactState(space=state.space, psi=state.psi, t=psi0.t + t))
    return out


@dataclass(frozen=True, eq=False)
class ExactMoments:
    spin_means: np.ndarray  # rows: ensemble; cols: <Jx>, <Jy>, <Jz>
    spin_second_moments: np.ndarray  # symmetrized <{A, B}>/2 over (Jx1, Jy1, Jx2, Jy2)
    photon_means: np.ndarray  # <x_c>, <p_c>
    photon_second_moments: np.ndarray  # symmetrized over (x_c, p_c)
    state: GaussianState  # moments mapped to the HP quadrature convention

    def dimensionless(self, params: PhysicalParams) -> GaussianState:
        return to_dimensionless(self.state, params.mode_frequencies())


def _sym_second_moments(vecs: List[np.ndarray]) -> np.ndarray:
    k = len(vecs)
    out = np.zeros((k, k))
    for a in range(k):
        for b in range(a, k):
            out[a, b] = out[b, a] = float(np.real(np.vdot(vecs[a], vecs[b])))
    return out


def exact_moments(psi: ExactState, params: PhysicalParams) -> ExactMoments:
    """
    First and symmetrized second moments, mapped through
    x_a = sqrt(2) Jx / sqrt(w N), p_a = -sqrt(2 w) Jy / sqrt(N),
    x_c = (a + a^dag) / sqrt(2 w0), p_c = i sqrt(w0) (a^dag - a) / sqrt(2).
    """
    space = psi.space
    if (params.N1, params.N2) != (int(round(2 * space.j1)), int(round(2 * space.j2))):
        raise InvalidParameterError(f"params N=({params.N1},{params.N2}) do not match space j=({space.j1},{space.j2})")
    ops = _operators(space)
    v = np.asarray(psi.psi)
    spin_ops = [ops.jx1, ops.jy1, ops.jx2, ops.jy2]
    spin_vecs = [o @ v for o in spin_ops]
    photon_ops = [
        (ops.a + ops.a.T) / math.sqrt(2.0 * params.omega0),
        1j * math.sqrt(params.omega0) * (ops.a.T - ops.a) / math.sqrt(2.0),
    ]
    photon_vecs = [o @ v for o in photon_ops]

    def mean(vec: np.ndarray) -> float:
        return float(np.real(np.vdot(v, vec)))

    spin_means = np.array(
        [
            [mean(spin_vecs[0]), mean(spin_vecs[1]), mean(ops.jz1 @ v)],
            [mean(spin_vecs[2]), mean(spin_vecs[3]), mean(ops.jz2 @ v)],
        ]
    )
    spin_second = _sym_second_moments(spin_vecs)
    photon_means = np.array([mean(x) for x in photon_vecs])
    photon_second = _sym_second_moments(photon_vecs)

    w = params.omega
    scale = []
    for N in (params.N1, params.N2):
        scale.extend([math.sqrt(2.0 / (w * N)), -math.sqrt(2.0 * w / N)])
    scale = np.array(scale)
    quad_vecs = [s * x for s, x in zip(scale, spin_vecs)] + photon_vecs
    second = _sym_second_moments(quad_vecs)
    means = np.array([mean(x) for x in quad_vecs])
    cov = 2.0 * second - 2.0 * np.outer(means, means)
    return ExactMoments(
        spin_means=spin_means,
        spin_second_moments=spin_second,
        photon_means=photon_means,
        photon_second_moments=photon_second,
        state=GaussianState(layout=MODEL_LAYOUT, mean=means, cov=(cov + cov.T) / 2.0),
    )


def exact_log_negativity(psi: ExactState) -> float:
    """log2 of the trace norm of the spin-spin reduced density matrix, transposed on ensemble 2."""
    d1, d2, dn = psi.space.dims
    if d1 * d2 > REDUCED_MAX:
        raise DimensionCapError(f"reduced spin space {d1}x{d2} exceeds {REDUCED_MAX}")
    amp = np.asarray(psi.psi).reshape(d1 * d2, dn)
    rho = amp @ amp.conj().T
    rho_pt = rho.reshape(d1, d2, d1, d2).transpose(0, 3, 2, 1).reshape(d1 * d2, d1 * d2)
    trace_norm = float(np.sum(np.abs(np.linalg.eigvalsh(rho_pt))))
    return max(0.0, math.log2(trace_norm)) + 0.0


def scaled_params(reference: PhysicalParams, n_spins: int) -> PhysicalParams:
    """Same w, w0 and effective coupling 2 g sqrt(N w w0) as `reference`, with n spins per ensemble."""
    if n_spins < 1:
        raise InvalidParameterError(f"spin count must be >= 1, got {n_spins}")
    return reference.updated(
        N1=n_spins,
        N2=n_spins,
        g=reference.g * math.sqrt(reference.N1 / n_spins),
        nbar_ensembles=0.0,
        nbar_cavity=0.0,
    )


@dataclass(frozen=True, eq=False)
class OracleRun:
    params: PhysicalParams
    cutoff: int
    converged: bool
    cutoff_delta: float
    moments: ExactMoments
    final: ExactState


def run_exact(params: PhysicalParams, t: float, photon_cutoff: int) -> OracleRun:
    space = TruncatedSpace.for_ensembles(params.N1, params.N2, photon_cutoff)
    H = build_exact_hamiltonian(params, space)
    final = evolve_exact(H, ground_product_state(space), t)
    moments = exact_moments(final, params)
    return OracleRun(params=params, cutoff=photon_cutoff, converged=False, cutoff_delta=float("nan"), moments=moments, final=final)


def converged_run(
    params: PhysicalParams,
    t: float,
    initial_cutoff: int = 10,
    max_cutoff: int = 160,
    tolerance: float = 1e-6,
) -> OracleRun:
    """Double the photon cutoff until the dimensionless moments move by less than `tolerance`."""
    cutoff = initial_cutoff
    prev = run_exact(params, t, cutoff)
    while True:
        nxt = run_exact(params, t, 2 * cutoff)
        delta = float(
            np.max(np.abs(nxt.moments.dimensionless(params).cov - prev.moments.dimensionless(params).cov))
        )
        logger.debug(f"[oracle] N={params.N1} cutoff {cutoff}->{2 * cutoff} moment change {delta:.3e}")
        if delta < tolerance:
            return OracleRun(params, 2 * cutoff, True, delta, nxt.moments, nxt.final)
        cutoff *= 2
        if 2 * cutoff > max_cutoff:
            logger.warning(f"[oracle] N={params.N1}: cutoff {cutoff} not converged (change {delta:.3e} >= {tolerance:g})")
            return OracleRun(params, cutoff, False, delta, nxt.moments, nxt.final)
        prev = nxt


def gaussian_reference(reference: PhysicalParams, t: float) -> GaussianState:
    """Vacuum-start Gaussian evolution of `reference` at time t (HP limit of the oracle)."""
    params = reference.updated(nbar_ensembles=0.0, nbar_cavity=0.0)
    H = build_hamiltonian(params)
    return evolve(initial_state(params), make_propagator(H, t))


@dataclass(frozen=True)
class OracleComparison:
    n_spins: int
    cutoff: int
    converged: bool
    cutoff_delta: float
    t: float
    max_abs_deviation: float
    exact_logneg: Optional[float]
    gaussian_logneg: float


def convergence_study(
    reference: PhysicalParams,
    n_ladder: Sequence[int],
    t: float,
    initial_cutoff: int = 10,
    max_cutoff: int = 160,
    tolerance: float = 1e-6,
    progress_cb: Optional[Callable[[int, int], None]] = None,
) -> List[OracleComparison]:
    """Exact vs Gaussian two-ensemble covariances (dimensionless) at fixed effective coupling and time."""
    gauss = gaussian_reference(reference, t)
    freqs = reference.mode_frequencies()
    gauss_ens = partial_trace(to_dimensionless(gauss, freqs), ENSEMBLES)
    gauss_logneg = log_negativity(gauss).log_negativity
    out: List[OracleComparison] = []
    for n in n_ladder:
        params = scaled_params(reference, n)
        run = converged_run(params, t, initial_cutoff, max_cutoff, tolerance)
        exact_ens = partial_trace(run.moments.dimensionless(params), ENSEMBLES)
        deviation = float(np.max(np.abs(exact_ens.cov - gauss_ens.cov)))
        d1, d2, _ = run.final.space.dims
        exact_ln = exact_log_negativity(run.final) if d1 * d2 <= REDUCED_MAX else None
        logger.info(f"[oracle] N={n} cutoff={run.cutoff} converged={run.converged} deviation={deviation:.4e}")
        out.append(
            OracleComparison(
                n_spins=n,
                cutoff=run.cutoff,
                converged=run.converged,
                cutoff_delta=run.cutoff_delta,
                t=float(t),
                max_abs_deviation=deviation,
                exact_logneg=exact_ln,
                gaussian_logneg=gauss_logneg,
            )
        )
        if progress_cb:
            progress_cb(len(out), len(n_ladder))
    return out


def vacuum_entanglement_scan(
    reference: PhysicalParams,
    times: Sequence[float],
    n_spins: int = 1,
    photon_cutoff: int = 40,
    rotating_wave: bool = False,
) -> Tuple[np.ndarray, np.ndarray]:
    """Exact ln N(t) from the decoupled ground state, at the reference effective coupling."""
    params = scaled_params(reference, n_spins)
    space = TruncatedSpace.for_ensembles(params.N1, params.N2, photon_cutoff)
    H = build_exact_hamiltonian(params, space, rotating_wave)
    states = exact_trajectory(H, ground_product_state(space), times)
    values = np.array([exact_log_negativity(s) for s in states])
    logger.info(f"[oracle] N={n_spins} vacuum scan (rwa={rotating_wave}): max lnN {values.max():.4f} over {len(values)} instants")
    return np.asarray(times, dtype=float), values
