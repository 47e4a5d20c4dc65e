import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from backflow.certify import weak_backflow_verdict
from backflow.channels import (
    Basis,
    classical_channel,
    generalized_classical_channel,
    identity_channel,
    unitary_channel,
)
from backflow.dynamics import depolarizing_example, identity_map
from backflow.errors import InvalidInputError, UnsupportedDimensionError
from backflow.numerics import TimeGrid
from backflow.witness import (
    CCState,
    TwoQubitBloch,
    Witness,
    cc_state,
    choi_state,
    optimal_witness,
    refute_type0,
    witness_value,
    x_functional,
)
from helpers import random_channel, random_unitary

seeds = st.integers(0, 2 ** 32 - 1)


def _random_witness(rng):
    s = rng.normal(size=3)
    s *= rng.uniform() / np.linalg.norm(s)
    o1, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    o2, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    return Witness(s, o1 @ np.diag(rng.uniform(-1, 1, size=3)) @ o2)


def test_identity_choi_state():
    rho = choi_state(identity_channel())
    assert np.allclose(rho.r, 0) and np.allclose(rho.s, 0)
    assert np.allclose(rho.T, np.diag([1, -1, 1]))
    assert x_functional(rho) == pytest.approx(3)


def test_dephasing_sits_on_the_boundary():
    deph = classical_channel(np.eye(2), Basis.computational())
    assert x_functional(choi_state(deph)) == pytest.approx(1)


def test_uniform_cc_state_has_zero_x():
    z = Basis.computational()
    rho, bloch = cc_state(CCState(np.full((2, 2), 0.25), z, z))
    assert np.allclose(rho, np.eye(4) / 4)
    assert x_functional(bloch) == pytest.approx(0)


def test_cc_state_row_sums_checked():
    z = Basis.computational()
    with pytest.raises(InvalidInputError):
        CCState(np.array([[0.5, 0.1], [0.2, 0.2]]), z, z)
    with pytest.raises(InvalidInputError):
        CCState(np.array([[0.6, -0.1], [0.25, 0.25]]), z, z)


def test_optimal_witness_for_diagonal_tensor():
    rho = TwoQubitBloch(np.zeros(3), np.zeros(3), np.diag([2.0, -1.0, 0.0]))
    w = optimal_witness(rho)
    assert np.allclose(w.s_w, 0)
    assert np.allclose(w.T_w, np.diag([-1, 1, 1]))
    assert w.is_valid
    with pytest.raises(InvalidInputError):
        optimal_witness(TwoQubitBloch(np.zeros(3), np.zeros(3), np.zeros((3, 3))))


def test_zero_witness_value_is_one_quarter():
    rho = choi_state(random_channel(np.random.default_rng(0)))
    assert witness_value(Witness(np.zeros(3), np.zeros((3, 3))), rho) == pytest.approx(0.25)


def test_invalid_witness_rejected():
    rho = choi_state(identity_channel())
    with pytest.raises(InvalidInputError):
        witness_value(Witness([0, 0, 1.5], np.zeros((3, 3))), rho)
    with pytest.raises(InvalidInputError):
        Witness(np.zeros(3), 2 * np.eye(3)).check()
    with pytest.raises(InvalidInputError):
        Witness(np.zeros(3), np.eye(2))


def test_x_requires_maximally_mixed_first_marginal():
    rho = TwoQubitBloch([0, 0, 0.5], np.zeros(3), np.zeros((3, 3)))
    with pytest.raises(InvalidInputError):
        x_functional(rho)


def test_density_round_trip():
    rng = np.random.default_rng(4)
    rho = choi_state(random_channel(rng))
    again = TwoQubitBloch.from_density(rho.density_matrix())
    assert np.allclose(again.T, rho.T) and np.allclose(again.s, rho.s)
    with pytest.raises(UnsupportedDimensionError):
        TwoQubitBloch.from_density(np.eye(2) / 2)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_optimal_witness_attains_one_minus_x(seed):
    rng = np.random.default_rng(seed)
    rho = choi_state(random_channel(rng))
    w = optimal_witness(rho)
    assert witness_value(w, rho) == pytest.approx((1 - x_functional(rho)) / 4, abs=1e-12)
    # no valid witness does better
    for _ in range(5):
        assert witness_value(_random_witness(rng), rho) >= witness_value(w, rho) - 1e-12


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_x_invariant_under_output_unitaries(seed):
    rng = np.random.default_rng(seed)
    c = random_channel(rng)
    x = x_functional(choi_state(c))
    v = random_unitary(rng)
    assert x_functional(choi_state(c.conjugate_output(v))) == pytest.approx(x, abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_generalized_classical_never_witnessed(seed):
    rng = np.random.default_rng(seed)
    m = rng.dirichlet(np.ones(2), size=2).T
    c = generalized_classical_channel(m, Basis(random_unitary(rng)), random_unitary(rng))
    rho = choi_state(c)
    assert x_functional(rho) <= 1 + 1e-10
    assert witness_value(_random_witness(rng), rho) >= -1e-12


def test_choi_state_for_qutrit_is_matrix():
    c = identity_channel(3)
    assert choi_state(c).shape == (9, 9)


def test_refute_type0_on_unitary_family():
    grid = TimeGrid(0.0, 1.0, 11)
    v = refute_type0(identity_map(grid))
    assert v.failed and v.name == "type0"
    assert v.witness_point["time"] == 0.0
    assert v.witness_point["x"] == pytest.approx(3)
    assert v.witness_point["witness_value"] == pytest.approx(-0.5)
    assert np.allclose(v.margins, 2)
    # a static unitary refutes type 0 yet shows no backflow, so no weak certificate
    assert weak_backflow_verdict(identity_map(grid)).kind == "none"


def test_refute_type0_threads_agree():
    dm = depolarizing_example(grid=TimeGrid(0.0, 3.0, 61))
    a, b = refute_type0(dm), refute_type0(dm, workers=4)
    assert np.array_equal(a.margins, b.margins)
    assert a.witness_point["time"] == b.witness_point["time"]


def test_hadamard_is_not_type0():
    had = unitary_channel(np.array([[1, 1], [1, -1]]) / np.sqrt(2))
    assert x_functional(choi_state(had)) == pytest.approx(3)
