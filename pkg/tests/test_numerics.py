import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from backflow import numerics as nx
from backflow.errors import InvalidInputError
from backflow.numerics import TimeGrid

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_time_grid_basics():
    g = TimeGrid(0.0, 1.0, 11)
    assert g.step == pytest.approx(0.1)
    assert len(g.times) == 11
    assert g.index_of(0.3) == 3
    assert g.index_of(0.35) is None
    assert g.contains(1.0) and not g.contains(1.1)
    assert g.to_dict() == {"t_start": 0.0, "t_end": 1.0, "n_samples": 11}


@pytest.mark.parametrize("args", [(0.0, 1.0, 2), (1.0, 1.0, 5), (2.0, 1.0, 5)])
def test_time_grid_rejects(args):
    with pytest.raises(InvalidInputError):
        TimeGrid(*args)


def test_polar_of_diagonal():
    # polar factor of diag(2, -1, 0): the signs of the nonzero entries, free third entry
    o = nx.polar_orthogonal(np.diag([2.0, -1.0, 0.0]))
    assert np.allclose(np.abs(np.diag(o)), 1)
    assert o[0, 0] == pytest.approx(1) and o[1, 1] == pytest.approx(-1)
    proper = nx.polar_orthogonal(np.diag([2.0, -1.0, 0.0]), proper=True)
    assert np.linalg.det(proper) == pytest.approx(1)
    assert np.allclose(proper, np.diag([1, -1, -1]))


@settings(max_examples=50, deadline=None)
@given(arrays(float, (3, 3), elements=finite))
def test_polar_maximizes_trace(t):
    o = nx.polar_orthogonal(t, proper=True)
    assert np.allclose(o.T @ o, np.eye(3), atol=1e-10)
    assert np.trace(o.T @ t) == pytest.approx(nx.trace_norm(t), abs=1e-9)


def test_norms():
    a = np.diag([3.0, -4.0, 0.5])
    assert nx.trace_norm(a) == pytest.approx(7.5)
    assert nx.operator_norm(a) == pytest.approx(4.0)
    assert nx.trace_norm(np.zeros((0, 0))) == 0.0


def test_hermitian_eig_rejects_non_hermitian():
    with pytest.raises(InvalidInputError):
        nx.hermitian_eig(np.array([[0, 1], [0, 0]], dtype=complex))
    w, _ = nx.hermitian_eig(np.array([[2, 1j], [-1j, 2]]))
    assert np.allclose(w, [1, 3])


def test_central_diff_is_exact_for_quadratics():
    f = lambda t: 3 * t ** 2 - 2 * t + 1  # noqa: E731
    for t in (0.0, 0.5, 1.0):
        assert nx.central_diff(f, t, 1e-3, 0.0, 1.0) == pytest.approx(6 * t - 2, abs=1e-9)


def test_central_diff_window_checks():
    with pytest.raises(InvalidInputError):
        nx.central_diff(math.sin, 2.0, 1e-3, 0.0, 1.0)
    with pytest.raises(InvalidInputError):
        nx.central_diff(math.sin, 0.5, 1.0, 0.0, 1.0)


def test_grid_gradient_second_order_exact():
    h = 0.1
    t = np.arange(11) * h
    d = nx.grid_gradient(t ** 2, h)
    assert np.allclose(d, 2 * t)


def test_quadrature_piecewise_exact():
    # |t - 1| integrated over [0, 3]: 1/2 + 2 = 2.5; exact with the kink listed
    val = nx.quadrature(lambda x: np.abs(x - 1), 0.0, 3.0, n=4, breakpoints=[1.0])
    assert val == pytest.approx(2.5, abs=1e-14)
    assert nx.quadrature(lambda x: x ** 3, 0.0, 2.0, n=2) == pytest.approx(4.0, abs=1e-14)
    with pytest.raises(InvalidInputError):
        nx.quadrature(lambda x: x, 1.0, 0.0)


def test_tolerances_from_env(monkeypatch):
    monkeypatch.setenv("BACKFLOW_TOL_EIG", "1e-6")
    monkeypatch.setenv("BACKFLOW_TOL_CPTP", "1e-7")
    tol = nx.Tolerances.from_env()
    assert tol.eig == 1e-6 and tol.cptp == 1e-7


def test_configure_replaces_global(monkeypatch):
    before = nx.TOL
    try:
        nx.configure(eig=1e-5)
        assert nx.TOL.eig == 1e-5
        assert nx.TOL.cptp == before.cptp
    finally:
        nx.TOL = before
