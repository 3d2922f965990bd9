import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.linalg import expm

from src.errors import InvalidParameterError, NumericalDegeneracyError
from src.symplectic import (
    GaussianState,
    ModeLayout,
    partial_trace,
    partial_transpose,
    symplectic_eigenvalues,
    symplectic_form,
    symplectic_residual,
    thermal_state,
    thermal_temperature_table,
    to_dimensionless,
    vacuum_state,
)

AB = ModeLayout(("a", "b"))


def tmsv(r: float) -> GaussianState:
    c, s = math.cosh(2 * r), math.sinh(2 * r)
    cov = np.array(
        [
            [c, 0, s, 0],
            [0, c, 0, -s],
            [s, 0, c, 0],
            [0, -s, 0, c],
        ]
    )
    return GaussianState(layout=AB, mean=np.zeros(4), cov=cov)


def test_symplectic_form_squares_to_minus_identity():
    om = symplectic_form(3)
    assert_allclose(om @ om, -np.eye(6))
    assert_allclose(om[:2, :2], [[0, 1], [-1, 0]])


def test_vacuum_is_pure_with_unit_spectrum():
    state = vacuum_state(AB, [300.0, 500.0])
    assert_allclose(state.block("a"), np.diag([1 / 300.0, 300.0]))
    assert_allclose(symplectic_eigenvalues(state.cov), [1.0, 1.0], atol=1e-12)
    assert state.purity() == pytest.approx(1.0)
    assert state.is_physical()


def test_thermal_spectrum_is_two_nbar_plus_one():
    state = thermal_state(AB, [2.0, 7.0], [0.1, 0.2])
    assert_allclose(symplectic_eigenvalues(state.cov), [1.2, 1.4], rtol=1e-12)


def test_thermal_rejects_negative_occupation():
    with pytest.raises(InvalidParameterError):
        thermal_state(AB, [1.0, 1.0], [0.0, -0.1])


def test_state_shape_and_symmetry_checked():
    with pytest.raises(InvalidParameterError):
        GaussianState(layout=AB, mean=np.zeros(2), cov=np.eye(4))
    bad = np.eye(4)
    bad[0, 1] = 0.5
    with pytest.raises(InvalidParameterError):
        GaussianState(layout=AB, mean=np.zeros(4), cov=bad)


def test_state_arrays_are_read_only():
    state = vacuum_state(AB, [1.0, 1.0])
    with pytest.raises(ValueError):
        state.cov[0, 0] = 5.0


def test_partial_trace_keeps_layout_order():
    layout = ModeLayout(("a", "b", "c"))
    state = thermal_state(layout, [1.0, 2.0, 3.0], [0.0, 0.1, 0.2])
    reduced = partial_trace(state, ["c", "a"])
    assert reduced.layout.labels == ("a", "c")
    assert_allclose(reduced.block("c"), 1.4 * np.diag([1 / 3.0, 3.0]))


def test_unknown_label_rejected():
    with pytest.raises(InvalidParameterError):
        partial_trace(vacuum_state(AB, [1.0, 1.0]), ["z"])


def test_partial_transpose_flips_one_momentum():
    state = tmsv(0.3)
    pt = partial_transpose(state, "b")
    assert pt.cov[1, 3] == pytest.approx(-state.cov[1, 3])
    assert pt.cov[0, 2] == pytest.approx(state.cov[0, 2])
    assert pt.cov[3, 3] == pytest.approx(state.cov[3, 3])


def test_partial_transpose_needs_two_modes():
    with pytest.raises(InvalidParameterError):
        partial_transpose(vacuum_state(ModeLayout(("a",)), [1.0]), "a")


def test_tmsv_transposed_spectrum():
    r = 0.4
    spectrum = symplectic_eigenvalues(partial_transpose(tmsv(r), "b").cov)
    assert_allclose(spectrum, [math.exp(-2 * r), math.exp(2 * r)], rtol=1e-10)


def test_dimensionless_vacuum_is_identity():
    state = to_dimensionless(vacuum_state(AB, [300.0, 2000.0]), [300.0, 2000.0])
    assert_allclose(state.cov, np.eye(4), atol=1e-12)


def test_spectrum_rejects_indefinite_matrix():
    with pytest.raises(NumericalDegeneracyError):
        symplectic_eigenvalues(np.diag([1.0, -1.0]))


def test_spectrum_rejects_odd_shape():
    with pytest.raises(InvalidParameterError):
        symplectic_eigenvalues(np.eye(3))


def test_residual_of_rotation_is_zero():
    th = 0.7
    S = np.array([[math.cos(th), math.sin(th)], [-math.sin(th), math.cos(th)]])
    assert symplectic_residual(S) < 1e-15


def test_temperature_table():
    table = thermal_temperature_table([0.0, 0.1, 0.2])
    assert table[0] == (0.0, 0.0)
    assert table[1][1] == pytest.approx(1 / math.log(11.0))
    assert table[2][1] == pytest.approx(1 / math.log(6.0))


def random_symplectic(n_modes: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(2 * n_modes, 2 * n_modes))
    # exp(Omega K) is symplectic for symmetric K
    return expm(symplectic_form(n_modes) @ (0.3 * (A + A.T)))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_spectrum_invariant_under_congruence(seed):
    layout = ModeLayout(("a", "b", "c"))
    cov = thermal_state(layout, [1.0, 1.0, 1.0], [0.0, 0.1, 0.3]).cov
    S = random_symplectic(3, seed)
    assert symplectic_residual(S) < 1e-10
    assert_allclose(symplectic_eigenvalues(S @ cov @ S.T), [1.0, 1.2, 1.6], rtol=1e-8)


def test_diagonal_spectrum_example():
    assert_allclose(symplectic_eigenvalues(np.diag([3.0, 3.0, 5.0, 5.0])), [3.0, 5.0], rtol=1e-12)


def test_pairing_residual_reported():
    values, residual = symplectic_eigenvalues(tmsv(0.5).cov, return_residual=True)
    assert_allclose(values, [1.0, 1.0], atol=1e-10)
    assert 0.0 <= residual < 1e-10


def test_partial_trace_composes_to_intersection():
    layout = ModeLayout(("a", "b", "c", "d"))
    S = random_symplectic(4, 3)
    base = thermal_state(layout, [1.0, 2.0, 3.0, 4.0], [0.1, 0.0, 0.2, 0.05])
    state = GaussianState(layout=layout, mean=np.arange(8.0), cov=S @ base.cov @ S.T)
    twice = partial_trace(partial_trace(state, ["a", "b", "c"]), ["b", "c"])
    once = partial_trace(state, ["b", "c"])
    assert twice.layout == once.layout
    assert np.array_equal(twice.cov, once.cov)
    assert np.array_equal(twice.mean, once.mean)


def test_partial_transpose_is_an_involution():
    state = GaussianState(layout=AB, mean=np.array([0.1, -0.2, 0.3, 0.4]), cov=tmsv(0.7).cov)
    back = partial_transpose(partial_transpose(state, "a"), "a")
    assert np.array_equal(back.cov, state.cov)
    assert np.array_equal(back.mean, state.mean)
