import math

import numpy as np
import pytest

from src.dicke_model import ENSEMBLE_2, PhysicalParams, build_hamiltonian, initial_state
from src.entanglement import (
    NOISE_FLOOR,
    entanglement_trajectory,
    first_peak,
    log_negativity,
    log_negativity_from_spectrum,
    onset_time,
    returns_below,
)
from src.errors import InvalidParameterError
from src.symplectic import GaussianState, ModeLayout, local_scaling, thermal_state

from .test_symplectic import tmsv

GRID = np.linspace(0.0, 0.1, 2001)


def resonant(omega: float, **kw) -> PhysicalParams:
    return PhysicalParams(omega=omega, omega0=omega, N1=10_000, N2=10_000, **kw)


def series_for(params: PhysicalParams, grid=GRID):
    return entanglement_trajectory(build_hamiltonian(params), initial_state(params), grid, params)


def test_tmsv_log_negativity():
    r = 0.35
    res = log_negativity(tmsv(r), (("a",), ("b",)))
    assert res.log_negativity == pytest.approx(2 * r / math.log(2))
    assert res.min_pt_eigenvalue == pytest.approx(math.exp(-2 * r))


def test_product_states_are_separable():
    layout = ModeLayout(("a", "b"))
    for nbar in (0.0, 0.1):
        state = thermal_state(layout, [3.0, 5.0], [nbar, nbar])
        assert log_negativity(state, (("a",), ("b",))).log_negativity == 0.0


def test_spectrum_clips_at_one():
    assert log_negativity_from_spectrum([1.0, 2.0, 3.0]) == 0.0
    assert log_negativity_from_spectrum([0.5, 4.0]) == pytest.approx(1.0)


def test_partition_validation():
    with pytest.raises(InvalidParameterError):
        log_negativity(tmsv(0.1), (("a",), ("a",)))
    with pytest.raises(InvalidParameterError):
        log_negativity(tmsv(0.1), ((), ("b",)))


def test_decoupled_system_never_entangles():
    s = series_for(resonant(300.0, g=0.0))
    assert np.max(s.values) < 1e-12


def test_reduced_purity_of_vacuum(fig2_params):
    res = log_negativity(initial_state(fig2_params))
    assert res.reduced_purity == pytest.approx(1.0)
    assert res.log_negativity == 0.0


def test_fig2_ordering():
    maxima = [series_for(resonant(w)).values.max() for w in (300.0, 500.0, 2000.0)]
    assert maxima[0] > maxima[1] > maxima[2] > 0.0


@pytest.mark.parametrize("omega", [300.0, 500.0, 2000.0])
def test_fig2_oscillates_back_to_separable(omega):
    s = series_for(resonant(omega))
    assert s.first_peak() is not None
    assert returns_below(s.times, s.values, NOISE_FLOOR)


def test_first_peak_timescale(fig2_series):
    t_star, peak = fig2_series.first_peak()
    assert 1e-3 <= t_star <= 5e-2
    assert peak > NOISE_FLOOR
    assert peak <= fig2_series.values.max() + 1e-9


def test_fig3_thermal_trends():
    runs = [series_for(resonant(300.0, nbar_ensembles=n, nbar_cavity=n)) for n in (0.0, 0.05, 0.1, 0.2)]
    maxima = [r.values.max() for r in runs]
    onsets = [r.onset_time() for r in runs]
    assert all(b < a for a, b in zip(maxima, maxima[1:]))
    assert None not in onsets
    assert all(b > a for a, b in zip(onsets, onsets[1:]))
    assert maxima[-1] > 0.0


def test_phase_pi_is_a_local_reflection():
    a = series_for(resonant(300.0, phi=0.0), GRID[:401]).values
    b = series_for(resonant(300.0, phi=math.pi), GRID[:401]).values
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_first_peak_parabolic_refinement():
    t = np.linspace(0.0, 1.0, 11)
    v = 1.0 - (t - 0.53) ** 2
    t_star, v_star = first_peak(t, v, floor=0.0)
    assert t_star == pytest.approx(0.53)
    assert v_star == pytest.approx(1.0)


def test_first_peak_none_for_monotone_or_flat():
    t = np.linspace(0.0, 1.0, 11)
    assert first_peak(t, t) is None
    assert first_peak(t, np.zeros_like(t)) is None


def test_first_peak_input_checks():
    with pytest.raises(InvalidParameterError):
        first_peak([0.0, 1.0], [1.0])


def test_onset_and_return():
    t = np.linspace(0.0, 1.0, 11)
    v = np.array([0, 0, 0.002, 0.01, 0.02, 0.01, 0.0, 0.0, 0.01, 0.0, 0.0])
    assert onset_time(t, v) == pytest.approx(0.2)
    assert returns_below(t, v)
    assert onset_time(t, np.zeros(11)) is None
    assert not returns_below(t, np.zeros(11))


def test_hp_report_attached(fig2_series):
    report = fig2_series.hp_report
    assert report is not None
    assert report.ratios.shape == (len(GRID), 2)
    assert report.ratios[0, 0] == pytest.approx(5e-5)
    assert not report.exceeded


def test_series_residuals_small(fig2_series):
    assert np.all(fig2_series.residuals < 1e-6)


@pytest.mark.parametrize("s", [0.1, 1.0, 10.0])
def test_invariant_under_local_scaling(first_peak_state, s):
    base = log_negativity(first_peak_state).log_negativity
    assert base > 0.1
    scaled = local_scaling(first_peak_state, {ENSEMBLE_2: s})
    assert log_negativity(scaled).log_negativity == pytest.approx(base, rel=1e-9)


@pytest.mark.parametrize("theta", [0.3, math.pi / 2, 2.0])
def test_invariant_under_local_rotation(first_peak_state, theta):
    c, s = math.cos(theta), math.sin(theta)
    S = np.eye(4)
    S[2:, 2:] = [[c, s], [-s, c]]
    rotated = GaussianState(
        layout=first_peak_state.layout,
        mean=S @ first_peak_state.mean,
        cov=S @ first_peak_state.cov @ S.T,
    )
    base = log_negativity(first_peak_state).log_negativity
    assert log_negativity(rotated).log_negativity == pytest.approx(base, rel=1e-9)


def test_pairing_residual_on_result(first_peak_state):
    assert 0.0 <= log_negativity(first_peak_state).pairing_residual < 1e-9
