import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from backflow.channels import (
    Basis,
    BlochAffine,
    Channel,
    as_stochastic,
    bloch_from_channel,
    channel_from_bloch,
    channel_from_kraus,
    channel_from_superop,
    classical_channel,
    dephasing_map,
    generalized_classical_channel,
    identity_channel,
    is_dio,
    kraus_from_channel,
    l1_coherence,
    pauli_channel,
    unitary_channel,
)
from backflow.errors import CPTPError, InvalidInputError, UnsupportedDimensionError
from backflow.numerics import IDENTITY2, PAULI
from backflow.witness import choi_state, x_functional
from helpers import random_channel, random_dio, random_state, random_unitary

seeds = st.integers(0, 2 ** 32 - 1)


def _bloch_state(m):
    return (IDENTITY2 + sum(m[i] * PAULI[i] for i in range(3))) / 2


def test_identity_choi_is_maximally_entangled():
    c = identity_channel()
    phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert np.allclose(c.choi, np.outer(phi, phi))
    assert np.trace(c.choi) == pytest.approx(1)


def test_choi_first_marginal_is_maximally_mixed():
    c = random_channel(np.random.default_rng(0), d=3)
    marg = np.einsum("iaja->ij", c.choi.reshape(3, 3, 3, 3))
    assert np.allclose(marg, np.eye(3) / 3)


def test_choi_is_read_only():
    c = identity_channel()
    with pytest.raises(ValueError):
        c.choi[0, 0] = 0


def test_superop_acts_like_kraus_sum():
    rng = np.random.default_rng(1)
    ks = [np.diag([1, np.sqrt(0.3)]), np.array([[0, np.sqrt(0.7)], [0, 0]])]
    c = channel_from_kraus(ks)
    rho = random_state(rng)
    assert np.allclose(c.apply(rho), sum(k @ rho @ k.conj().T for k in ks))
    assert np.allclose(c(rho), c.apply(rho))


@settings(max_examples=30, deadline=None)
@given(seeds, st.sampled_from([2, 3]))
def test_kraus_round_trip(seed, d):
    rng = np.random.default_rng(seed)
    c = random_channel(rng, d=d, rank=int(rng.integers(1, d * d + 1)))
    again = channel_from_kraus(kraus_from_channel(c))
    assert np.allclose(again.choi, c.choi, atol=1e-10)
    back = channel_from_superop(c.superop)
    assert np.allclose(back.choi, c.choi, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_bloch_round_trip_and_action(seed):
    rng = np.random.default_rng(seed)
    c = random_channel(rng)
    b = bloch_from_channel(c)
    assert np.allclose(channel_from_bloch(b).choi, c.choi, atol=1e-12)
    m = rng.normal(size=3)
    m /= 2 * np.linalg.norm(m)
    out = c.apply(_bloch_state(m))
    assert np.allclose(out, _bloch_state(b.apply_bloch(m)), atol=1e-12)


def test_transfer_matrix_layout():
    b = BlochAffine([0, 0, 0.2], np.diag([0.5, 0.5, 0.7]))
    r = b.transfer_matrix()
    assert r[0, 0] == 1 and np.allclose(r[0, 1:], 0)
    assert np.allclose(r[1:, 0], [0, 0, 0.2])


def test_pauli_channel_rejects_non_cp():
    with pytest.raises(CPTPError) as err:
        pauli_channel([1.0, 1.0, -1.0])
    assert err.value.min_eigenvalue < 0


def test_non_trace_preserving_rejected():
    with pytest.raises(CPTPError):
        Channel(np.eye(4) / 2)


def test_unitary_channel_checks_unitarity():
    with pytest.raises(InvalidInputError):
        unitary_channel(np.array([[1, 1], [0, 1]]))


def test_kraus_completeness_checked():
    with pytest.raises(InvalidInputError):
        channel_from_kraus([np.eye(2), np.eye(2)])


def test_bloch_form_is_qubit_only():
    with pytest.raises(UnsupportedDimensionError):
        bloch_from_channel(identity_channel(3))


def test_basis_constructors():
    z = Basis.computational()
    assert np.allclose(z.axis, [0, 0, 1])
    for k, axis in zip((1, 2, 3), np.eye(3)):
        assert np.allclose(Basis.pauli(k).axis, axis)
    n = np.array([1.0, 2.0, -2.0]) / 3
    assert np.allclose(Basis.from_axis(n).axis, n)
    with pytest.raises(InvalidInputError):
        Basis(np.array([[1, 1], [0, 1]]))


def test_dephasing_and_coherence():
    x = Basis.pauli(1)
    rho = _bloch_state([0.3, 0.4, 0.5])
    deph = dephasing_map(rho, x)
    assert np.allclose(deph, _bloch_state([0.3, 0, 0]))
    assert l1_coherence(rho, Basis.computational()) == pytest.approx(2 * abs(0.3 - 0.4j) / 2)
    assert l1_coherence(deph, x) == pytest.approx(0)


def test_stochastic_validation():
    assert np.allclose(as_stochastic([[0.9, 0.2], [0.1, 0.8]]).sum(axis=0), 1)
    with pytest.raises(InvalidInputError):
        as_stochastic([[0.9, 0.2], [0.2, 0.8]])
    with pytest.raises(InvalidInputError):
        as_stochastic([[1.1, 0.0], [-0.1, 1.0]])


def test_classical_channel_action():
    m = np.array([[0.9, 0.3], [0.1, 0.7]])
    c = classical_channel(m, Basis.computational())
    rho = np.array([[0.6, 0.2 + 0.1j], [0.2 - 0.1j, 0.4]])
    out = c.apply(rho)
    assert np.allclose(np.diag(out), m @ [0.6, 0.4])
    assert abs(out[0, 1]) < 1e-15
    # the dephasing channel is classical with M = I
    d = classical_channel(np.eye(2), Basis.computational())
    assert np.allclose(d.bloch().T, np.diag([0, 0, 1]))


def test_classical_channel_is_linear_on_non_hermitian_inputs():
    m = np.array([[0.5, 0.5], [0.5, 0.5]])
    c = classical_channel(m, Basis.pauli(1))
    e = np.array([[0, 1j], [0, 0]])
    assert np.allclose(c.apply(e) + c.apply(e.conj().T), c.apply(e + e.conj().T))


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_generalized_classical_choi_is_type0(seed):
    rng = np.random.default_rng(seed)
    m = rng.dirichlet(np.ones(2), size=2).T
    c = generalized_classical_channel(m, Basis(random_unitary(rng)), random_unitary(rng))
    assert x_functional(choi_state(c)) <= 1 + 1e-10


def test_is_dio():
    z = Basis.computational()
    assert is_dio(random_dio(np.random.default_rng(3)), z).passed
    assert is_dio(classical_channel([[0.7, 0.2], [0.3, 0.8]], z), z).passed
    had = unitary_channel(np.array([[1, 1], [1, -1]]) / np.sqrt(2))
    v = is_dio(had, z)
    assert v.failed and v.witness_point["residual"] > 0.1


def test_compose_and_conjugate():
    rng = np.random.default_rng(5)
    a, b = random_channel(rng), random_channel(rng)
    rho = random_state(rng)
    assert np.allclose(a.compose(b).apply(rho), a.apply(b.apply(rho)))
    u = random_unitary(rng)
    assert np.allclose(a.conjugate_output(u).apply(rho), u @ a.apply(rho) @ u.conj().T)
