"""Dense linear algebra and calculus helpers shared by the rest of the package.

Everything here is a pure function of its inputs. Tolerances live in a single
module-level :class:`Tolerances` instance which can be replaced with
:func:`configure` (the CLI does this from flags and environment variables).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import simpson

from .errors import InvalidInputError

__all__ = [
    "Tolerances",
    "TOL",
    "configure",
    "TimeGrid",
    "hermitian_eig",
    "svd",
    "polar_orthogonal",
    "trace_norm",
    "operator_norm",
    "central_diff",
    "grid_gradient",
    "quadrature",
    "PAULI",
    "IDENTITY2",
]


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds used across the package.

    Attributes
    ----------
    hermitian : float
        Max entrywise deviation from Hermiticity.
    reconstruction : float
        Max-norm residual allowed for factorizations.
    derivative_step : float
        Finite-difference step for analytically sampled maps.
    eig : float
        Slack for derivative-positivity tests (scaled by ``max|T|`` in the
        qubit checks). Env var ``BACKFLOW_TOL_EIG``.
    cptp : float
        Most negative Choi eigenvalue still accepted as completely positive.
        Env var ``BACKFLOW_TOL_CPTP``.
    """

    hermitian: float = 1e-12
    reconstruction: float = 1e-10
    derivative_step: float = 1e-5
    eig: float = 1e-8
    cptp: float = 1e-9

    @classmethod
    def from_env(cls) -> "Tolerances":
        kw = {}
        for field_name, var in (("eig", "BACKFLOW_TOL_EIG"), ("cptp", "BACKFLOW_TOL_CPTP")):
            raw = os.environ.get(var)
            if raw:
                try:
                    kw[field_name] = float(raw)
                except ValueError as exc:
                    raise InvalidInputError(f"{var}={raw!r} is not a number") from exc
        return cls(**kw)


TOL = Tolerances.from_env()


def configure(**overrides: float) -> Tolerances:
    """Replace selected tolerances globally and return the new set."""
    global TOL
    TOL = replace(TOL, **overrides)
    return TOL


PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
IDENTITY2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling of an observation interval ``[t_start, t_end]``."""

    t_start: float
    t_end: float
    n_samples: int

    def __post_init__(self):
        if int(self.n_samples) != self.n_samples or self.n_samples < 3:
            raise InvalidInputError(f"n_samples must be an integer >= 3, got {self.n_samples}")
        if not (np.isfinite(self.t_start) and np.isfinite(self.t_end)):
            raise InvalidInputError("grid bounds must be finite")
        if not self.t_end > self.t_start:
            raise InvalidInputError(
                f"grid must be strictly increasing: t_start={self.t_start}, t_end={self.t_end}"
            )
        object.__setattr__(self, "t_start", float(self.t_start))
        object.__setattr__(self, "t_end", float(self.t_end))
        object.__setattr__(self, "n_samples", int(self.n_samples))

    @property
    def step(self) -> float:
        return (self.t_end - self.t_start) / (self.n_samples - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n_samples)

    def __len__(self) -> int:
        return self.n_samples

    def index_of(self, t: float, rtol: float = 1e-9) -> int | None:
        """Index of the grid point equal to ``t`` (up to ``rtol * step``), else None."""
        k = int(round((t - self.t_start) / self.step))
        if 0 <= k < self.n_samples and abs(self.times[k] - t) <= rtol * self.step:
            return k
        return None

    def contains(self, t: float) -> bool:
        slack = 1e-12 * max(1.0, abs(self.t_start), abs(self.t_end))
        return self.t_start - slack <= t <= self.t_end + slack

    def to_dict(self) -> dict:
        return {"t_start": self.t_start, "t_end": self.t_end, "n_samples": self.n_samples}


def _max_hermitian_defect(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def hermitian_eig(a, tol: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix.

    Returns eigenvalues in ascending order and the matching orthonormal
    eigenvectors as columns. Inputs further than ``tol`` from Hermitian are
    rejected rather than silently symmetrized.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {a.shape}")
    tol = TOL.hermitian if tol is None else tol
    defect = _max_hermitian_defect(a)
    if defect > tol:
        raise InvalidInputError(f"matrix is not Hermitian (max |A - A^H| = {defect:.3e})")
    return np.linalg.eigh(0.5 * (a + a.conj().T))


def svd(a) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(U, s, V)`` with ``A = U diag(s) V^H`` and ``s`` descending."""
    u, s, vh = np.linalg.svd(np.asarray(a), full_matrices=True)
    return u, s, vh.conj().T


def polar_orthogonal(t, proper: bool = False) -> np.ndarray:
    """Orthogonal factor ``O = U V^T`` of the polar decomposition ``T = O P``.

    Maximizes ``Tr(O^T T)`` over orthogonal ``O``; the maximum equals the
    trace norm of ``T``. For singular ``T`` the factor is not unique. With
    ``proper=True`` the free directions (zero singular values) are flipped so
    that ``det O = +1`` when possible, which leaves ``Tr(O^T T)`` unchanged.
    """
    t = np.asarray(t, dtype=float)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise InvalidInputError(f"polar factor needs a square matrix, got shape {t.shape}")
    u, s, v = svd(t)
    o = u @ v.T
    if proper and np.linalg.det(o) < 0:
        scale = s[0] if s.size and s[0] > 0 else 1.0
        null = np.flatnonzero(s <= 1e-12 * scale)
        if null.size:
            u = u.copy()
            u[:, null[-1]] *= -1
            o = u @ v.T
    return o


def trace_norm(a) -> float:
    """Sum of singular values."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.sum(np.linalg.svd(a, compute_uv=False)))


def operator_norm(a) -> float:
    """Largest singular value."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.svd(a, compute_uv=False)[0])


def central_diff(
    f: Callable[[float], np.ndarray],
    t: float,
    h: float,
    lower: float | None = None,
    upper: float | None = None,
) -> np.ndarray:
    """Second-order finite-difference derivative of ``f`` at ``t``.

    ``f`` is only evaluated inside ``[lower, upper]``; when ``t - h`` or
    ``t + h`` would leave that window a one-sided second-order stencil is
    used instead.
    """
    if h <= 0:
        raise InvalidInputError("step must be positive")
    lo = -np.inf if lower is None else lower
    hi = np.inf if upper is None else upper
    if not lo <= t <= hi:
        raise InvalidInputError(f"t={t} lies outside [{lo}, {hi}]")
    if t - h >= lo and t + h <= hi:
        return (np.asarray(f(t + h)) - np.asarray(f(t - h))) / (2 * h)
    if t + 2 * h <= hi:
        return (-3 * np.asarray(f(t)) + 4 * np.asarray(f(t + h)) - np.asarray(f(t + 2 * h))) / (2 * h)
    if t - 2 * h >= lo:
        return (3 * np.asarray(f(t)) - 4 * np.asarray(f(t - h)) + np.asarray(f(t - 2 * h))) / (2 * h)
    raise InvalidInputError(f"window [{lo}, {hi}] is too narrow for step {h}")


def grid_gradient(samples: np.ndarray, h: float) -> np.ndarray:
    """Derivative of samples tabulated on a uniform grid (axis 0).

    Central differences inside, one-sided second-order stencils at both ends.
    """
    samples = np.asarray(samples)
    if samples.shape[0] < 3:
        raise InvalidInputError("need at least 3 samples")
    return np.gradient(samples, h, axis=0, edge_order=2)


def quadrature(
    g: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    n: int = 64,
    breakpoints: Sequence[float] = (),
) -> float:
    """Composite Simpson integral of ``g`` over ``[a, b]``.

    ``g`` must accept an array of abscissae. The interval is split at every
    breakpoint inside ``(a, b)`` and each piece gets ``n`` panels (rounded up
    to even), so piecewise-polynomial integrands up to cubic order are
    integrated exactly when their kinks are listed.
    """
    if a > b:
        raise InvalidInputError(f"quadrature bounds reversed: a={a} > b={b}")
    if n < 2:
        raise InvalidInputError("need at least 2 panels")
    if a == b:
        return 0.0
    n += n % 2
    edges = [a, *sorted(x for x in breakpoints if a < x < b), b]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        x = np.linspace(lo, hi, n + 1)
        total += float(simpson(np.asarray(g(x), dtype=float) * np.ones_like(x), x=x))
    return total
