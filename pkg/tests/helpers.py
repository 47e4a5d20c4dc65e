"""Random generators shared by the test modules."""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import expm
from scipy.stats import unitary_group

from backflow.channels import Basis, BlochAffine, Channel, channel_from_bloch, channel_from_kraus
from backflow.dynamics import ANALYTIC, DynamicalMap
from backflow.errors import CPTPError
from backflow.numerics import PAULI, TimeGrid

TETRA = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)


def random_unitary(rng, d=2):
    return unitary_group.rvs(d, random_state=rng)


def random_channel(rng, d=2, rank=None):
    rank = rank or d * d
    g = rng.normal(size=(rank * d, d)) + 1j * rng.normal(size=(rank * d, d))
    q, _ = np.linalg.qr(g)
    return channel_from_kraus([q[k * d:(k + 1) * d] for k in range(rank)])


def random_state(rng, d=2, rank=None):
    rank = rank or d
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_bloch_vector(rng, radius=1.0):
    v = rng.normal(size=3)
    return radius * rng.uniform() ** (1 / 3) * v / np.linalg.norm(v)


def rotation_of(u):
    """SO(3) matrix ``R`` with ``u (m.s) u^+ = (R m).s``."""
    return np.array([[0.5 * np.trace(PAULI[i] @ u @ PAULI[j] @ u.conj().T).real for j in range(3)]
                     for i in range(3)])


def random_unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def random_basis(rng):
    return Basis.from_axis(random_unit(rng))


def random_tetra_point(rng, scale=1.0):
    w = rng.dirichlet(np.ones(4))
    return scale * (w @ TETRA)


def smooth_unital_family(rng, grid=None):
    """``T(t) = R1(t) diag(c(t) p) R2(t)`` with ``p`` in the Pauli tetrahedron, ``0 <= c <= 1``."""
    grid = grid or TimeGrid(0.0, 2.0, 201)
    p = random_tetra_point(rng)
    h1 = rng.normal(size=3)
    h2 = rng.normal(size=3)
    a, b, w = rng.uniform(0.2, 0.8), rng.uniform(0.0, 0.2), rng.uniform(0.5, 4.0)

    def rot(h, t):
        return expm(t * np.array([[0, -h[2], h[1]], [h[2], 0, -h[0]], [-h[1], h[0], 0]]))

    def bloch(t):
        c = a + b * math.sin(w * t)
        return BlochAffine(np.zeros(3), rot(h1, t) @ np.diag(c * p) @ rot(h2, t))

    return DynamicalMap(2, lambda t: channel_from_bloch(bloch(t)), grid, ANALYTIC, "smooth", bloch)


def block_diagonal_family(rng, grid=None):
    """Family block-diagonal in a random basis: ``T = W Rz(theta) diag(a, +-a, c) W^T``.

    Returns ``(map, basis)``; ``U(t) = I`` works as the frame unitary.
    """
    grid = grid or TimeGrid(0.0, 2.0, 201)
    u = random_unitary(rng)
    w_rot = rotation_of(u)
    basis = Basis(u)
    sign = rng.choice([1.0, -1.0])
    c0 = rng.uniform(-0.6, 0.6)
    a0 = rng.uniform(0.3, 1.0) * (1 - abs(c0)) / 2
    gamma = rng.uniform(0.1, 1.0)
    beta = rng.choice([0.0, rng.uniform(0.2, 0.6)])
    omega, dtheta = rng.uniform(1.0, 4.0), rng.normal()

    def bloch(t):
        a = a0 * math.exp(-gamma * t) * (1 + beta * math.sin(omega * t)) / (1 + beta)
        c = c0 * math.exp(-gamma * t)
        th = dtheta * t
        rz = np.array([[math.cos(th), -math.sin(th), 0], [math.sin(th), math.cos(th), 0], [0, 0, 1]])
        return BlochAffine(np.zeros(3), w_rot @ rz @ np.diag([a, sign * a, c]) @ w_rot.T)

    return DynamicalMap(2, lambda t: channel_from_bloch(bloch(t)), grid, ANALYTIC, "block", bloch), basis


def elementary_family(rng, grid=None):
    """Family elementary in the z basis: contractions in the xy plane decay monotonically."""
    grid = grid or TimeGrid(0.0, 2.0, 201)
    c0 = rng.uniform(-0.5, 0.5)
    a0 = rng.uniform(0.2, 1.0) * (1 - abs(c0)) / 2
    ga, gc, dtheta = rng.uniform(0.1, 1.0), rng.uniform(0.0, 1.0), rng.normal()
    sign = rng.choice([1.0, -1.0])

    def bloch(t):
        a = a0 * math.exp(-ga * t)
        th = dtheta * t
        rz = np.array([[math.cos(th), -math.sin(th), 0], [math.sin(th), math.cos(th), 0], [0, 0, 1]])
        return BlochAffine(np.zeros(3), rz @ np.diag([a, sign * a, c0 * math.exp(-gc * t)]))

    return DynamicalMap(2, lambda t: channel_from_bloch(bloch(t)), grid, ANALYTIC, "elementary", bloch)


def random_dio(rng, tries=1000) -> Channel:
    """Qubit channel commuting with dephasing in the z basis."""
    for _ in range(tries):
        a = rng.normal(size=(2, 2))
        a *= rng.uniform(0.1, 1.0) / np.linalg.norm(a, 2)
        c = rng.uniform(-1, 1)
        r3 = rng.uniform(-1, 1) * (1 - abs(c))
        T = np.zeros((3, 3))
        T[:2, :2] = a
        T[2, 2] = c
        try:
            return channel_from_bloch(BlochAffine(np.array([0.0, 0.0, r3]), T))
        except CPTPError:
            continue
    raise RuntimeError("no DIO channel found")


def pauli_rate_family(rng, grid=None):
    """Pauli family with rates ``g + h sin(w t)``; each rate's minimum is at least 0.05 away from 0.

    Keeps CP-divisibility and BLP verdicts away from their tolerance bands.
    Returns ``None`` when the drawn family leaves the CPTP set on the grid.
    """
    grid = grid or TimeGrid(0.0, 2.0, 201)
    params = []
    for _ in range(3):
        h = rng.uniform(0.0, 1.0)
        if rng.uniform() < 0.6:
            g = h + rng.uniform(0.05, 0.6)
        else:
            g = h - rng.uniform(0.05, min(0.3, h + 0.05)) if h > 0.05 else 0.3
        params.append((g, h, rng.uniform(1.0, 5.0)))

    def big(t):
        return np.array([g * t + h * (1 - math.cos(w * t)) / w for g, h, w in params])

    def lambdas(t):
        b = big(t)
        return np.exp(-np.array([b[1] + b[2], b[2] + b[0], b[0] + b[1]]))

    for t in grid.times:
        lam = lambdas(t)
        if np.min(TETRA @ lam) < -1 - 1e-12:
            return None

    def bloch(t):
        return BlochAffine(np.zeros(3), np.diag(lambdas(t)))

    dm = DynamicalMap(2, lambda t: channel_from_bloch(bloch(t)), grid, ANALYTIC, "pauli-random", bloch)
    dm.params = {"rates": params}
    return dm
