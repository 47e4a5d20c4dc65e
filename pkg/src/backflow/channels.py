"""Quantum channels on d-level systems and the constructors used by the examples.

A :class:`Channel` is stored as its normalized Choi matrix

    J = (1/d) sum_ij E_ij (x) Lambda(E_ij),

so ``Tr J = 1`` and the first marginal is maximally mixed. Superoperators use
row-major vectorization, ``vec(X)[a*d + b] = X[a, b]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import numerics as nx
from .errors import CPTPError, InvalidInputError, UnsupportedDimensionError
from .numerics import IDENTITY2, PAULI
from .verdict import Status, Verdict

__all__ = [
    "Basis",
    "BlochAffine",
    "Channel",
    "as_stochastic",
    "apply_channel",
    "bloch_from_channel",
    "channel_from_bloch",
    "channel_from_kraus",
    "channel_from_superop",
    "choi_from_action",
    "classical_channel",
    "dephasing_map",
    "generalized_classical_channel",
    "identity_channel",
    "is_dio",
    "kraus_from_channel",
    "l1_coherence",
    "pauli_channel",
    "unitary_channel",
]

# Hilbert-Schmidt basis {I, s1, s2, s3} as row-major vectors, one per column.
_PAULI_VEC = np.stack([m.reshape(-1) for m in (IDENTITY2, *PAULI)], axis=1)


class Basis:
    """Orthonormal basis of C^d stored as the columns of a unitary matrix."""

    def __init__(self, vectors):
        v = np.array(vectors, dtype=complex)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise InvalidInputError(f"basis needs a square matrix of column vectors, got {v.shape}")
        defect = np.max(np.abs(v.conj().T @ v - np.eye(v.shape[0])))
        if defect > nx.TOL.hermitian:
            raise InvalidInputError(f"basis vectors are not orthonormal (defect {defect:.2e})")
        v.setflags(write=False)
        self.vectors = v

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @classmethod
    def computational(cls, d: int = 2) -> "Basis":
        return cls(np.eye(d))

    @classmethod
    def from_axis(cls, n) -> "Basis":
        """Eigenbasis of ``n . sigma``; first vector has eigenvalue +1."""
        n = np.asarray(n, dtype=float)
        if n.shape != (3,):
            raise InvalidInputError("qubit basis axis must be a 3-vector")
        norm = np.linalg.norm(n)
        if abs(norm - 1) > 1e-12:
            raise InvalidInputError(f"basis axis must be a unit vector, |n| = {norm}")
        h = sum(c * p for c, p in zip(n, PAULI))
        _, vecs = np.linalg.eigh(h)
        vecs = vecs[:, ::-1]
        for k in range(2):
            col = vecs[:, k]
            j = int(np.argmax(np.abs(col) > 1e-12))
            vecs[:, k] = col * np.exp(-1j * np.angle(col[j]))
        # re-orthonormalize away the eigh rounding
        q, r = np.linalg.qr(vecs)
        q = q * (np.diag(r) / np.abs(np.diag(r)))
        return cls(q)

    @classmethod
    def pauli(cls, k: int) -> "Basis":
        """Eigenbasis of sigma_k, k in {1, 2, 3}."""
        if k not in (1, 2, 3):
            raise InvalidInputError(f"Pauli index must be 1, 2 or 3, got {k}")
        return cls.from_axis(np.eye(3)[k - 1])

    @property
    def axis(self) -> np.ndarray:
        """Bloch axis n of a qubit basis (the first vector is the +1 eigenvector)."""
        if self.dim != 2:
            raise UnsupportedDimensionError("Bloch axis exists only for qubit bases")
        e = self.vectors[:, 0]
        return np.array([np.real(e.conj() @ p @ e) for p in PAULI])

    def projectors(self) -> list[np.ndarray]:
        return [np.outer(self.vectors[:, i], self.vectors[:, i].conj()) for i in range(self.dim)]

    def to_basis(self, a: np.ndarray) -> np.ndarray:
        """Matrix entries of ``a`` in this basis."""
        return self.vectors.conj().T @ a @ self.vectors

    def from_basis(self, a: np.ndarray) -> np.ndarray:
        return self.vectors @ a @ self.vectors.conj().T

    def __repr__(self) -> str:
        if self.dim == 2:
            return f"Basis(axis={np.round(self.axis, 12).tolist()})"
        return f"Basis(dim={self.dim})"


def as_stochastic(m) -> np.ndarray:
    """Validate a column-stochastic matrix (columns sum to one)."""
    m = np.array(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"stochastic matrix must be square, got shape {m.shape}")
    if np.min(m) < -1e-12:
        raise InvalidInputError(f"stochastic matrix has negative entry {np.min(m):.3e}")
    col = m.sum(axis=0)
    if np.max(np.abs(col - 1)) > 1e-10:
        raise InvalidInputError(f"stochastic matrix columns must sum to 1, got {col}")
    return np.clip(m, 0.0, None)


@dataclass(frozen=True)
class BlochAffine:
    """Qubit channel as ``rho = (I + m.s)/2  ->  (I + (r + T m).s)/2``."""

    r: np.ndarray
    T: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float).reshape(3)
        t = np.asarray(self.T, dtype=float).reshape(3, 3)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "T", t)

    def transfer_matrix(self) -> np.ndarray:
        """4x4 real matrix in the basis {I, s1, s2, s3}."""
        out = np.zeros((4, 4))
        out[0, 0] = 1.0
        out[1:, 0] = self.r
        out[1:, 1:] = self.T
        return out

    def apply_bloch(self, m) -> np.ndarray:
        return self.r + self.T @ np.asarray(m, dtype=float)


class Channel:
    """Completely positive trace-preserving map on d x d matrices.

    Parameters
    ----------
    choi : array_like
        Normalized Choi matrix of shape (d^2, d^2).
    validate : bool
        Check Hermiticity, positivity and trace preservation. Disable only for
        intermediate objects that are checked elsewhere.
    """

    def __init__(self, choi, validate: bool = True):
        j = np.array(choi, dtype=complex)
        if j.ndim != 2 or j.shape[0] != j.shape[1]:
            raise InvalidInputError(f"Choi matrix must be square, got {j.shape}")
        d = int(round(np.sqrt(j.shape[0])))
        if d * d != j.shape[0]:
            raise InvalidInputError(f"Choi size {j.shape[0]} is not a perfect square")
        self.dim = d
        if validate:
            herm = np.max(np.abs(j - j.conj().T))
            if herm > 1e-10:
                raise CPTPError(f"Choi matrix is not Hermitian (defect {herm:.2e})")
        j = 0.5 * (j + j.conj().T)
        j.setflags(write=False)
        self.choi = j
        if validate:
            self.validate()

    # -- validation -----------------------------------------------------------------
    @cached_property
    def min_choi_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.choi)[0])

    def trace_defect(self) -> float:
        d = self.dim
        marg = np.trace(self.choi.reshape(d, d, d, d), axis1=1, axis2=3)
        return float(np.max(np.abs(marg - np.eye(d) / d)))

    def validate(self, cptp_tol: float | None = None) -> "Channel":
        tol = nx.TOL.cptp if cptp_tol is None else cptp_tol
        lam = self.min_choi_eigenvalue
        if lam < -tol:
            raise CPTPError(
                f"map is not completely positive: most negative Choi eigenvalue {lam:.3e}",
                min_eigenvalue=lam,
            )
        defect = self.trace_defect()
        if defect > 1e-10:
            raise CPTPError(f"map is not trace preserving (marginal defect {defect:.2e})")
        return self

    # -- representations --------------------------------------------------------------
    @cached_property
    def superop(self) -> np.ndarray:
        d = self.dim
        s = d * self.choi.reshape(d, d, d, d).transpose(1, 3, 0, 2)
        return s.reshape(d * d, d * d)

    def apply(self, rho) -> np.ndarray:
        rho = np.asarray(rho)
        if rho.shape != (self.dim, self.dim):
            raise InvalidInputError(f"operator shape {rho.shape} does not match dimension {self.dim}")
        return (self.superop @ rho.reshape(-1)).reshape(self.dim, self.dim)

    __call__ = apply

    def compose(self, other: "Channel") -> "Channel":
        """``self o other`` (apply ``other`` first)."""
        if other.dim != self.dim:
            raise InvalidInputError("cannot compose channels of different dimension")
        return channel_from_superop(self.superop @ other.superop, validate=False)

    def conjugate_output(self, u) -> "Channel":
        """Channel ``rho -> U Lambda(rho) U^dagger``."""
        u = _check_unitary(u, self.dim)
        return unitary_channel(u).compose(self)

    def bloch(self) -> BlochAffine:
        return bloch_from_channel(self)

    def kraus(self, rank_tol: float = 1e-9) -> list[np.ndarray]:
        return kraus_from_channel(self, rank_tol)

    def __repr__(self) -> str:
        return f"Channel(dim={self.dim})"


def _check_unitary(u, d: int) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.shape != (d, d):
        raise InvalidInputError(f"unitary must be {d}x{d}, got {u.shape}")
    defect = np.max(np.abs(u.conj().T @ u - np.eye(d)))
    if defect > 1e-12 * max(1.0, d):
        raise InvalidInputError(f"matrix is not unitary (defect {defect:.2e})")
    return u


def choi_from_action(action: Callable[[np.ndarray], np.ndarray], d: int) -> np.ndarray:
    """Normalized Choi matrix of a linear map given by its action on matrices."""
    j = np.zeros((d, d, d, d), dtype=complex)
    for i in range(d):
        for k in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, k] = 1.0
            j[i, :, k, :] = action(e)
    return j.reshape(d * d, d * d) / d


def channel_from_superop(s, validate: bool = True) -> Channel:
    s = np.asarray(s, dtype=complex)
    d = int(round(np.sqrt(s.shape[0])))
    if s.shape != (d * d, d * d):
        raise InvalidInputError(f"superoperator shape {s.shape} is not (d^2, d^2)")
    choi = s.reshape(d, d, d, d).transpose(2, 0, 3, 1).reshape(d * d, d * d) / d
    return Channel(choi, validate=validate)


def channel_from_kraus(ops: Sequence) -> Channel:
    """Channel ``rho -> sum_k K_k rho K_k^dagger``."""
    ops = [np.asarray(k, dtype=complex) for k in ops]
    if not ops:
        raise InvalidInputError("need at least one Kraus operator")
    d = ops[0].shape[0]
    if any(k.shape != (d, d) for k in ops):
        raise InvalidInputError("Kraus operators must all be square of equal size")
    completeness = sum(k.conj().T @ k for k in ops)
    defect = np.max(np.abs(completeness - np.eye(d)))
    if defect > 1e-10:
        raise InvalidInputError(f"Kraus operators violate sum K^dag K = I (defect {defect:.2e})")
    # J = (1/d) sum_k vec(K^T) vec(K^T)^dagger
    vecs = np.stack([k.T.reshape(-1) for k in ops], axis=1)
    return Channel(vecs @ vecs.conj().T / d)


def kraus_from_channel(c: Channel, rank_tol: float = 1e-9) -> list[np.ndarray]:
    """Canonical Kraus operators from the Choi eigendecomposition.

    Eigenvalues at or below ``rank_tol`` are dropped, so the list length is the
    numerical Kraus rank.
    """
    d = c.dim
    w, v = np.linalg.eigh(c.choi)
    keep = np.flatnonzero(w > rank_tol)[::-1]
    return [np.sqrt(d * w[k]) * v[:, k].reshape(d, d).T for k in keep]


def identity_channel(d: int = 2) -> Channel:
    return unitary_channel(np.eye(d))


def unitary_channel(u) -> Channel:
    u = np.asarray(u, dtype=complex)
    u = _check_unitary(u, u.shape[0])
    return channel_from_kraus([u])


def apply_channel(c: Channel, rho) -> np.ndarray:
    return c.apply(rho)


def bloch_from_channel(c: Channel) -> BlochAffine:
    """Affine Bloch form ``(r, T)`` with ``T_ij = Tr(s_i Lambda(s_j)) / 2``."""
    if c.dim != 2:
        raise UnsupportedDimensionError(f"Bloch representation needs d = 2, got d = {c.dim}")
    ptm = 0.5 * np.real(_PAULI_VEC.conj().T @ c.superop @ _PAULI_VEC)
    return BlochAffine(ptm[1:, 0], ptm[1:, 1:])


def channel_from_bloch(b: BlochAffine | tuple, validate: bool = True) -> Channel:
    if not isinstance(b, BlochAffine):
        b = BlochAffine(*b)
    s = 0.5 * _PAULI_VEC @ b.transfer_matrix() @ _PAULI_VEC.conj().T
    return channel_from_superop(s, validate=validate)


def pauli_channel(lam, r=(0.0, 0.0, 0.0)) -> Channel:
    """Qubit channel with Bloch form ``(r, diag(lam))``.

    Raises :class:`CPTPError` carrying the most negative Choi eigenvalue when
    the parameters do not define a channel.
    """
    lam = np.asarray(lam, dtype=float).reshape(3)
    return channel_from_bloch(BlochAffine(np.asarray(r, dtype=float), np.diag(lam)))


def dephasing_map(rho, basis: Basis) -> np.ndarray:
    """Keep only the diagonal of ``rho`` in ``basis``."""
    rho = np.asarray(rho)
    if rho.shape != (basis.dim, basis.dim):
        raise InvalidInputError("state and basis dimensions differ")
    diag = np.diag(np.diag(basis.to_basis(rho)))
    return basis.from_basis(diag)


def classical_channel(m, basis: Basis) -> Channel:
    """Embed a column-stochastic matrix as a channel acting on populations in ``basis``.

    ``rho -> sum_ij M_ij |e_i><e_j| rho |e_j><e_i|``.
    """
    m = as_stochastic(m)
    d = basis.dim
    if m.shape != (d, d):
        raise InvalidInputError(f"stochastic matrix is {m.shape}, basis dimension is {d}")
    e = basis.vectors
    proj = basis.projectors()

    def action(x):
        pops = np.einsum("ai,ab,bi->i", e.conj(), x, e)
        out = m @ pops
        return sum(out[i] * proj[i] for i in range(d))

    return Channel(choi_from_action(action, d))


def generalized_classical_channel(m, basis: Basis, u) -> Channel:
    """``rho -> U Lambda_cl(rho) U^dagger``."""
    u = _check_unitary(u, basis.dim)
    return classical_channel(m, basis).conjugate_output(u)


def is_dio(c: Channel, basis: Basis, tol: float = 1e-9) -> Verdict:
    """Whether ``c`` commutes with the dephasing map of ``basis``.

    Linearity makes the check on the matrix units E_ij exhaustive.
    """
    d = c.dim
    if basis.dim != d:
        raise InvalidInputError("channel and basis dimensions differ")
    worst, worst_ij = 0.0, (0, 0)
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1.0
            diff = c.apply(dephasing_map(e, basis)) - dephasing_map(c.apply(e), basis)
            val = nx.trace_norm(diff)
            if val > worst:
                worst, worst_ij = val, (i, j)
    status = Status.PASS if worst <= tol else Status.FAIL
    witness = {"matrix_unit": list(worst_ij), "residual": worst} if status is Status.FAIL else None
    return Verdict("dio", status, worst, tol, witness_point=witness)


def l1_coherence(rho, basis: Basis) -> float:
    """Sum of absolute off-diagonal entries of ``rho`` in ``basis``."""
    a = basis.to_basis(np.asarray(rho))
    return float(np.sum(np.abs(a)) - np.sum(np.abs(np.diag(a))))
