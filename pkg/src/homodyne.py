"""
Readout simulation: ensemble modes leave through an efficiency-eta channel,
a_out = sqrt(eta) c + sqrt(1 - eta) a_vac, and are measured by balanced homodyne detection,
either locally or after a 50:50 beam splitter. The two-mode covariance is rebuilt from
the measured quadrature variances and the channel is inverted.

All states here use dimensionless quadratures (vacuum covariance = identity).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from .dicke_model import ENSEMBLES, PhysicalParams
from .entanglement import log_negativity
from .errors import InvalidParameterError, ReadoutError
from .symplectic import GaussianState, ModeLayout, partial_trace, thermal_state, to_dimensionless

MODE_1 = "mode-1"
MODE_2 = "mode-2"
BS_SUM = "bs-sum"
BS_DIFFERENCE = "bs-difference"
BS_SUM_SHIFTED = "bs-sum-shifted"
BS_DIFFERENCE_SHIFTED = "bs-difference-shifted"
TARGETS = (MODE_1, MODE_2, BS_SUM, BS_DIFFERENCE, BS_SUM_SHIFTED, BS_DIFFERENCE_SHIFTED)

PHASES = (0.0, math.pi / 4, math.pi / 2)
MAX_CORRECTION_GAIN = 100.0
BS_LAYOUT = ModeLayout((BS_SUM, BS_DIFFERENCE))


@dataclass(frozen=True)
class ReadoutChannel:
    eta1: float = 1.0
    eta2: float = 1.0

    def __post_init__(self) -> None:
        for name in ("eta1", "eta2"):
            v = getattr(self, name)
            if not math.isfinite(v) or not 0.0 <= v <= 1.0:
                raise InvalidParameterError(f"{name} must lie in [0, 1], got {v}")

    def _scales(self) -> np.ndarray:
        r1, r2 = math.sqrt(self.eta1), math.sqrt(self.eta2)
        return np.array([r1, r1, r2, r2])

    def _noise(self) -> np.ndarray:
        return np.diag([1 - self.eta1, 1 - self.eta1, 1 - self.eta2, 1 - self.eta2])


@dataclass(frozen=True)
class HomodyneSetting:
    target: str
    phase: float

    def __post_init__(self) -> None:
        if self.target not in TARGETS:
            raise InvalidParameterError(f"unknown homodyne target {self.target!r}; expected one of {TARGETS}")


def required_settings(resolve_cross: bool = False) -> List[HomodyneSetting]:
    """4 targets x 3 LO phases; `resolve_cross` adds the shifted BS ports at 0 and pi/2."""
    out = [HomodyneSetting(t, p) for t in (MODE_1, MODE_2, BS_SUM, BS_DIFFERENCE) for p in PHASES]
    if resolve_cross:
        out += [HomodyneSetting(t, p) for t in (BS_SUM_SHIFTED, BS_DIFFERENCE_SHIFTED) for p in (PHASES[0], PHASES[2])]
    return out


def readout_input(state: GaussianState, params: PhysicalParams) -> GaussianState:
    """Two-ensemble reduced state in dimensionless quadratures."""
    return to_dimensionless(partial_trace(state, ENSEMBLES), [params.omega, params.omega])


def _require_two_modes(state: GaussianState) -> None:
    if state.layout.n_modes != 2:
        raise InvalidParameterError(f"readout operates on two-mode states, got {state.layout.n_modes} modes")


def apply_readout_channel(state: GaussianState, ch: ReadoutChannel) -> GaussianState:
    _require_two_modes(state)
    d = ch._scales()
    cov = state.cov * d[:, None] * d[None, :] + ch._noise()
    return GaussianState(layout=state.layout, mean=state.mean * d, cov=cov)


_BS = np.block([[np.eye(2), np.eye(2)], [np.eye(2), -np.eye(2)]]) / math.sqrt(2.0)
# rotate mode 2 by pi/2 (x2 -> p2, p2 -> -x2) before the splitter
_SHIFT = np.block([[np.eye(2), np.zeros((2, 2))], [np.zeros((2, 2)), np.array([[0.0, 1.0], [-1.0, 0.0]])]])


def _congruence(state: GaussianState, S: np.ndarray) -> GaussianState:
    cov = S @ state.cov @ S.T
    return GaussianState(layout=BS_LAYOUT, mean=S @ state.mean, cov=(cov + cov.T) / 2.0)


def beam_splitter(state: GaussianState, shifted: bool = False) -> GaussianState:
    """x_+- = (x1 +- x2)/sqrt(2), p_+- = (p1 +- p2)/sqrt(2); outputs labelled bs-sum / bs-difference."""
    _require_two_modes(state)
    return _congruence(state, _BS @ _SHIFT if shifted else _BS)


def _target_mode(state: GaussianState, target: str) -> Tuple[np.ndarray, np.ndarray]:
    """(mean, 2x2 covariance) of the mode the detector sees."""
    _require_two_modes(state)
    if target in (MODE_1, MODE_2):
        i = 0 if target == MODE_1 else 1
    elif target in (BS_SUM, BS_DIFFERENCE, BS_SUM_SHIFTED, BS_DIFFERENCE_SHIFTED):
        state = beam_splitter(state, shifted=target.endswith("shifted"))
        i = 0 if target.startswith(BS_SUM) else 1
    else:
        raise InvalidParameterError(f"unknown homodyne target {target!r}; expected one of {TARGETS}")
    sl = slice(2 * i, 2 * i + 2)
    return np.array(state.mean[sl]), np.array(state.cov[sl, sl])


def quadrature_moments(state: GaussianState, setting: HomodyneSetting) -> Tuple[float, float]:
    """Mean and variance of X_phi = x cos phi + p sin phi on the target mode."""
    mean, b = _target_mode(state, setting.target)
    c, s = math.cos(setting.phase), math.sin(setting.phase)
    var = (b[0, 0] * c * c + b[1, 1] * s * s + 2.0 * b[0, 1] * s * c) / 2.0
    return float(mean[0] * c + mean[1] * s), float(var)


def sample_quadrature(state: GaussianState, target: str, phase: float, count: int, seed: int) -> np.ndarray:
    if count < 1:
        raise InvalidParameterError(f"sample count must be >= 1, got {count}")
    mu, var = quadrature_moments(state, HomodyneSetting(target, phase))
    rng = np.random.default_rng(seed)
    return rng.normal(mu, math.sqrt(max(var, 0.0)), size=count)


def derive_seed(seed: int, setting: HomodyneSetting) -> int:
    """Per-setting seed, independent of sampling order."""
    key = [int(seed), TARGETS.index(setting.target), int(round(setting.phase * 1e6))]
    return int(np.random.SeedSequence(key).generate_state(1)[0])


@dataclass(frozen=True, eq=False)
class HomodyneRecord:
    settings: Tuple[HomodyneSetting, ...]
    samples: Mapping[HomodyneSetting, np.ndarray]
    seed: int

    def __post_init__(self) -> None:
        for s in self.settings:
            if s not in self.samples:
                raise InvalidParameterError(f"no samples recorded for setting {s}")
            if len(self.samples[s]) < 2:
                raise InvalidParameterError(f"setting {s} needs at least 2 samples, got {len(self.samples[s])}")


def acquire_records(
    state: GaussianState,
    ch: ReadoutChannel,
    samples: int,
    seed: int,
    resolve_cross: bool = False,
) -> HomodyneRecord:
    """Send the two-mode state through the channel and sample every required setting."""
    out_state = apply_readout_channel(state, ch)
    settings = tuple(required_settings(resolve_cross))
    data = {s: sample_quadrature(out_state, s.target, s.phase, samples, derive_seed(seed, s)) for s in settings}
    return HomodyneRecord(settings=settings, samples=data, seed=seed)


@dataclass(frozen=True, eq=False)
class ReconstructedState:
    state: GaussianState
    std_errors: np.ndarray
    bias_corrected: bool
    cross_xp_symmetrized: bool
    variances: Mapping[HomodyneSetting, float]
    variance_errors: Mapping[HomodyneSetting, float]
    channel: ReadoutChannel

    @property
    def cov(self) -> np.ndarray:
        return self.state.cov


@dataclass(frozen=True)
class LogNegEstimate:
    value: float
    std_error: float

    @property
    def verified(self) -> bool:
        """Entanglement claimed only at 3 standard errors."""
        return self.value - 3.0 * self.std_error > 0.0


def _assemble(variances: Mapping[HomodyneSetting, float], means: Mapping[HomodyneSetting, float], ch: Optional[ReadoutChannel]) -> Tuple[np.ndarray, np.ndarray, bool]:
    q0, q45, q90 = PHASES

    def V(target: str, phase: float) -> float:
        return variances[HomodyneSetting(target, phase)]

    cov = np.zeros((4, 4))
    mean = np.zeros(4)
    for i, target in enumerate((MODE_1, MODE_2)):
        sxx, spp = 2.0 * V(target, q0), 2.0 * V(target, q90)
        sxp = 2.0 * V(target, q45) - V(target, q0) - V(target, q90)
        cov[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = [[sxx, sxp], [sxp, spp]]
        mean[2 * i] = means.get(HomodyneSetting(target, q0), 0.0)
        mean[2 * i + 1] = means.get(HomodyneSetting(target, q90), 0.0)

    def cross(phase: float, shifted: bool = False) -> float:
        plus, minus = (BS_SUM_SHIFTED, BS_DIFFERENCE_SHIFTED) if shifted else (BS_SUM, BS_DIFFERENCE)
        return V(plus, phase) - V(minus, phase)

    x1x2, p1p2 = cross(q0), cross(q90)
    symmetrized = HomodyneSetting(BS_SUM_SHIFTED, q0) not in variances
    if symmetrized:
        x1p2 = p1x2 = (2.0 * cross(q45) - x1x2 - p1p2) / 2.0
    else:
        x1p2, p1x2 = cross(q0, shifted=True), -cross(q90, shifted=True)
    C = np.array([[x1x2, x1p2], [p1x2, p1p2]])
    cov[0:2, 2:4] = C
    cov[2:4, 0:2] = C.T

    if ch is not None:
        d = ch._scales()
        cov = (cov - ch._noise()) / d[:, None] / d[None, :]
        mean = mean / d
    return mean, cov, symmetrized


def _check_conditioning(ch: ReadoutChannel) -> None:
    worst = min(ch.eta1, ch.eta2)
    gain = math.inf if worst == 0 else 1.0 / worst
    if gain > MAX_CORRECTION_GAIN:
        raise ReadoutError(
            f"bias correction would amplify noise by {gain:.3g} (> {MAX_CORRECTION_GAIN:g}); "
            f"eta=({ch.eta1:g}, {ch.eta2:g}) too small for a meaningful reconstruction"
        )


def reconstruct_from_variances(
    variances: Mapping[HomodyneSetting, float],
    ch: ReadoutChannel,
    variance_errors: Optional[Mapping[HomodyneSetting, float]] = None,
    means: Optional[Mapping[HomodyneSetting, float]] = None,
    layout: ModeLayout = ModeLayout(ENSEMBLES),
    correct_bias: bool = True,
) -> ReconstructedState:
    missing = [s for s in required_settings() if s not in variances]
    if missing:
        raise ReadoutError(f"missing homodyne settings: {[(s.target, round(s.phase, 4)) for s in missing]}")
    if correct_bias:
        _check_conditioning(ch)
    channel = ch if correct_bias else None
    mean, cov, symmetrized = _assemble(variances, means or {}, channel)

    errors = dict(variance_errors or {s: 0.0 for s in variances})
    # the estimator is linear in the variances: propagate with unit perturbations
    var2 = np.zeros((4, 4))
    for s, err in errors.items():
        if err == 0.0:
            continue
        bumped = dict(variances)
        bumped[s] = variances[s] + 1.0
        _, cov_b, _ = _assemble(bumped, {}, channel)
        var2 += ((cov_b - cov) * err) ** 2
    return ReconstructedState(
        state=GaussianState(layout=layout, mean=mean, cov=(cov + cov.T) / 2.0),
        std_errors=np.sqrt(var2),
        bias_corrected=correct_bias,
        cross_xp_symmetrized=symmetrized,
        variances=dict(variances),
        variance_errors=errors,
        channel=ch,
    )


def reconstruct_covariance(record: HomodyneRecord, ch: ReadoutChannel, correct_bias: bool = True) -> ReconstructedState:
    """Mean-subtracted sample variances per setting, SE(V) = V sqrt(2/(n-1)), then the linear estimator."""
    variances: Dict[HomodyneSetting, float] = {}
    errors: Dict[HomodyneSetting, float] = {}
    means: Dict[HomodyneSetting, float] = {}
    for s in record.settings:
        x = np.asarray(record.samples[s], dtype=float)
        n = len(x)
        means[s] = float(np.mean(x))
        variances[s] = float(np.var(x, ddof=1))
        errors[s] = variances[s] * math.sqrt(2.0 / (n - 1))
    recon = reconstruct_from_variances(variances, ch, errors, means, correct_bias=correct_bias)
    logger.debug(f"[readout] reconstructed covariance from {len(record.settings)} settings (seed={record.seed})")
    return recon


def estimate_log_negativity(recon: ReconstructedState) -> LogNegEstimate:
    """ln N of the reconstructed state with a delta-method error over the independent measured variances."""
    value = log_negativity(recon.state).log_negativity
    channel = recon.channel if recon.bias_corrected else None
    var = 0.0
    for s, err in recon.variance_errors.items():
        if err == 0.0:
            continue
        h = 1e-6 * max(abs(recon.variances[s]), 1.0)
        shifted = []
        for sign in (1.0, -1.0):
            bumped = dict(recon.variances)
            bumped[s] += sign * h
            _, cov, _ = _assemble(bumped, {}, channel)
            state = GaussianState(layout=recon.state.layout, mean=np.zeros(4), cov=(cov + cov.T) / 2.0)
            shifted.append(log_negativity(state).log_negativity)
        var += ((shifted[0] - shifted[1]) / (2.0 * h) * err) ** 2
    return LogNegEstimate(value=value, std_error=math.sqrt(var))


def analytic_variances(state: GaussianState, settings: Iterable[HomodyneSetting]) -> Dict[HomodyneSetting, float]:
    """Exact detector variances for a (post-channel) two-mode state; the infinite-sample limit."""
    return {s: quadrature_moments(state, s)[1] for s in settings}


def readout_trial(
    state: GaussianState,
    ch: ReadoutChannel,
    samples: int,
    seed: int,
    resolve_cross: bool = False,
) -> Tuple[ReconstructedState, LogNegEstimate]:
    recon = reconstruct_covariance(acquire_records(state, ch, samples, seed, resolve_cross), ch)
    return recon, estimate_log_negativity(recon)


def false_positive_count(
    states: Sequence[GaussianState],
    ch: ReadoutChannel,
    samples: int,
    seeds: Sequence[int],
) -> int:
    """How many (state, seed) trials on separable inputs wrongly verify entanglement."""
    hits = 0
    for state in states:
        for seed in seeds:
            _, est = readout_trial(state, ch, samples, seed)
            hits += int(est.verified)
    return hits


def separable_thermal_inputs(nbars: Sequence[float] = (0.1, 0.2), layout: ModeLayout = ModeLayout(ENSEMBLES)) -> List[GaussianState]:
    """Product thermal states (dimensionless), the false-positive test inputs."""
    return [thermal_state(layout, [1.0, 1.0], [n, n]) for n in nbars]


def readout_study(
    state: GaussianState,
    ch: ReadoutChannel,
    samples: int,
    trials: int,
    seed: int,
    resolve_cross: bool = False,
) -> Dict[str, object]:
    """One reconstruction of `state` through `ch`, plus `trials` seeded runs per separable input."""
    truth = log_negativity(state).log_negativity
    recon, est = readout_trial(state, ch, samples, seed, resolve_cross)
    deviation = abs(est.value - truth)
    logger.info(
        f"[readout] eta=({ch.eta1:g}, {ch.eta2:g}) lnN true={truth:.4f} est={est.value:.4f} "
        f"+- {est.std_error:.4f} verified={est.verified}"
    )
    separable = separable_thermal_inputs()
    seeds = [seed + 1 + k for k in range(trials)]
    false_positives = false_positive_count(separable, ch, samples, seeds) if trials else 0
    if false_positives:
        logger.warning(f"[readout] {false_positives} false positives over {trials * len(separable)} separable trials")
    return {
        "eta1": ch.eta1,
        "eta2": ch.eta2,
        "samples_per_setting": samples,
        "seed": seed,
        "true_logneg": truth,
        "estimated_logneg": est.value,
        "std_error": est.std_error,
        "abs_deviation": deviation,
        "within_3_std_errors": bool(deviation <= 3.0 * est.std_error),
        "verified": bool(est.verified),
        "cross_xp_symmetrized": recon.cross_xp_symmetrized,
        "reconstructed_cov": recon.cov,
        "cov_std_errors": recon.std_errors,
        "separable_trials": trials * len(separable),
        "false_positives": false_positives,
    }
