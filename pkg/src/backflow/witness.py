"""Choi states, classical-classical channel states and linear witnesses for qubit maps.

Two-qubit states are handled in Bloch form ``rho = 1/4 (I + r.s x I + I x s.s + sum T_ij s_i x s_j)``.
A witness ``W = [1, 0, s_w, T_w]`` uses the same normalization, so that
``Tr(W rho) = 1/4 (1 + s_w . s + Tr(T_w^T T))``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .channels import Basis, Channel
from .dynamics import DynamicalMap
from .errors import InvalidInputError, UnsupportedDimensionError
from .numerics import IDENTITY2, PAULI
from .verdict import Status, Verdict, worst_index

__all__ = [
    "TwoQubitBloch",
    "Witness",
    "CCState",
    "choi_state",
    "cc_state",
    "x_functional",
    "optimal_witness",
    "witness_value",
    "refute_type0",
]

CHOI_MARGINAL_TOL = 1e-6
REFUTATION_TOL = 1e-9
ROW_SUM_TOL = 1e-12
VALIDITY_TOL = 1e-12
AGREEMENT_TOL = 1e-12

_FIRST = tuple(np.kron(p, IDENTITY2) for p in PAULI)
_SECOND = tuple(np.kron(IDENTITY2, p) for p in PAULI)
_BOTH = tuple(tuple(np.kron(p, q) for q in PAULI) for p in PAULI)


@dataclass(frozen=True)
class TwoQubitBloch:
    """Bloch data ``(r, s, T)`` of a two-qubit operator with unit trace."""

    r: np.ndarray
    s: np.ndarray
    T: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float).reshape(3)
        s = np.asarray(self.s, dtype=float).reshape(3)
        T = np.asarray(self.T, dtype=float)
        if T.shape != (3, 3):
            raise InvalidInputError(f"correlation tensor must be 3x3, got {T.shape}")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "T", T)

    @classmethod
    def from_density(cls, rho) -> "TwoQubitBloch":
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (4, 4):
            raise UnsupportedDimensionError(f"two-qubit state must be 4x4, got {rho.shape}")
        tr = np.trace(rho).real
        if abs(tr - 1) > 1e-10:
            raise InvalidInputError(f"state must have unit trace, got {tr}")
        r = [np.trace(rho @ a).real for a in _FIRST]
        s = [np.trace(rho @ b).real for b in _SECOND]
        T = [[np.trace(rho @ ab).real for ab in row] for row in _BOTH]
        return cls(np.array(r), np.array(s), np.array(T))

    def density_matrix(self) -> np.ndarray:
        rho = np.eye(4, dtype=complex)
        for i in range(3):
            rho += self.r[i] * _FIRST[i] + self.s[i] * _SECOND[i]
            for j in range(3):
                rho += self.T[i, j] * _BOTH[i][j]
        return rho / 4

    def to_dict(self) -> dict:
        return {"r": self.r, "s": self.s, "T": self.T}


@dataclass(frozen=True)
class Witness:
    """``W = [1, 0, s_w, T_w]``; valid when ``|s_w| <= 1`` and ``||T_w||_inf <= 1``."""

    s_w: np.ndarray
    T_w: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s_w, dtype=float).reshape(3)
        T = np.asarray(self.T_w, dtype=float)
        if T.shape != (3, 3):
            raise InvalidInputError(f"witness tensor must be 3x3, got {T.shape}")
        object.__setattr__(self, "s_w", s)
        object.__setattr__(self, "T_w", T)

    @property
    def is_valid(self) -> bool:
        return (np.linalg.norm(self.s_w) <= 1 + VALIDITY_TOL
                and nx.operator_norm(self.T_w) <= 1 + VALIDITY_TOL)

    def check(self) -> "Witness":
        if not self.is_valid:
            raise InvalidInputError(
                f"invalid witness: |s_w| = {np.linalg.norm(self.s_w):.6g}, "
                f"||T_w|| = {nx.operator_norm(self.T_w):.6g} (both must be <= 1)"
            )
        return self

    def operator(self) -> np.ndarray:
        return TwoQubitBloch(np.zeros(3), self.s_w, self.T_w).density_matrix()

    def to_dict(self) -> dict:
        return {"s_w": self.s_w, "T_w": self.T_w}


@dataclass(frozen=True)
class CCState:
    """``sum_ij p_ij |f_i><f_i| x |e_j><e_j|`` with every row of ``p`` summing to ``1/d``."""

    p: np.ndarray
    first: Basis
    second: Basis

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        d = self.first.dim
        if p.shape != (d, d) or self.second.dim != d:
            raise InvalidInputError(f"p must be {d}x{d} and both bases of dimension {d}")
        if np.min(p) < -ROW_SUM_TOL:
            raise InvalidInputError("p must be nonnegative")
        rows = p.sum(axis=1)
        if np.max(np.abs(rows - 1 / d)) > ROW_SUM_TOL:
            raise InvalidInputError(f"every row of p must sum to 1/{d}, got {rows}")
        object.__setattr__(self, "p", np.clip(p, 0.0, None))


def choi_state(c: Channel) -> TwoQubitBloch | np.ndarray:
    """Choi state ``1/d sum E_ij x Lambda(E_ij)``; Bloch form for qubits, matrix otherwise."""
    if c.dim != 2:
        return np.array(c.choi)
    return TwoQubitBloch.from_density(c.choi)


def cc_state(spec: CCState) -> tuple[np.ndarray, TwoQubitBloch | None]:
    """Density matrix of a c-c state, plus its Bloch form for qubits."""
    f = spec.first.projectors()
    e = spec.second.projectors()
    d = spec.first.dim
    rho = sum(spec.p[i, j] * np.kron(f[i], e[j]) for i in range(d) for j in range(d))
    return rho, (TwoQubitBloch.from_density(rho) if d == 2 else None)


def x_functional(rho: TwoQubitBloch) -> float:
    """``|s| + ||T||_1`` for a state whose first marginal is maximally mixed.

    Values above 1 rule out membership in the convex hull of c-c channel states.
    """
    if np.linalg.norm(rho.r) > CHOI_MARGINAL_TOL:
        raise InvalidInputError(
            f"first marginal is not maximally mixed (|r| = {np.linalg.norm(rho.r):.3g})"
        )
    return float(np.linalg.norm(rho.s) + nx.trace_norm(rho.T))


def optimal_witness(rho: TwoQubitBloch) -> Witness:
    """Witness minimizing ``Tr(W rho)``: ``s_w = -s/|s|``, ``T_w = -O(T)``.

    ``O(T)`` is the orthogonal polar factor, taken with determinant +1 when
    ``T`` is singular. For ``s = 0`` the zero vector is used (every unit vector
    gives the same value).
    """
    ns = np.linalg.norm(rho.s)
    if ns < 1e-12 and np.max(np.abs(rho.T)) < 1e-12:
        raise InvalidInputError("optimal witness is undefined for s = 0 and T = 0")
    s_w = -rho.s / ns if ns >= 1e-12 else np.zeros(3)
    # adding 0.0 turns -0.0 into 0.0 so reports stay tidy
    return Witness(s_w + 0.0, -nx.polar_orthogonal(rho.T, proper=True) + 0.0).check()


def witness_value(w: Witness, rho: TwoQubitBloch) -> float:
    """``Tr(W rho)``, computed densely and from Bloch data; the two must agree."""
    w.check()
    bloch = 0.25 * (1 + w.s_w @ rho.s + np.sum(w.T_w * rho.T))
    dense = np.trace(w.operator() @ rho.density_matrix()).real
    if abs(dense - bloch) > AGREEMENT_TOL:
        raise ArithmeticError(f"witness value paths disagree: {dense!r} vs {bloch!r}")
    return float(bloch)


def refute_type0(dmap: DynamicalMap, workers: int | None = None) -> Verdict:
    """Look for a grid time whose Choi state has ``X > 1``.

    A hit means the family is not a time-independent mixture of generalized
    classical maps. Status ``FAIL`` means type 0 is refuted; the witness
    point holds the earliest maximizing time, ``X`` there and the optimal
    witness.
    """
    if dmap.dim != 2:
        raise UnsupportedDimensionError("the X functional is defined for qubit maps")
    chans = dmap.validate()
    times = dmap.grid.times

    def xval(c):
        return x_functional(choi_state(c))

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            xs = np.array(list(pool.map(xval, chans)))
    else:
        xs = np.array([xval(c) for c in chans])
    k = worst_index(xs)
    margin = float(xs[k] - 1)
    details = {"x_max": float(xs[k]), "x_max_time": float(times[k])}
    if margin > REFUTATION_TOL:
        rho = choi_state(chans[k])
        w = optimal_witness(rho)
        wp = {"time": float(times[k]), "x": float(xs[k]), "witness": w.to_dict(),
              "witness_value": witness_value(w, rho)}
        status = Status.FAIL
    else:
        status, wp = Status.PASS, None
    return Verdict("type0", status, margin, REFUTATION_TOL, wp, dmap.grid, "exact", times,
                   xs - 1, details)
