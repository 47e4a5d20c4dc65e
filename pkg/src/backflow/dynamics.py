"""Time-parametrized channel families: containers, generators, mixtures and the worked examples."""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import bisect

from . import numerics as nx
from .channels import (
    Basis,
    BlochAffine,
    Channel,
    bloch_from_channel,
    channel_from_superop,
    classical_channel,
    identity_channel,
    pauli_channel,
)
from .errors import InvalidInputError, UnsupportedDimensionError
from .numerics import PAULI, TimeGrid

__all__ = [
    "DynamicalMap",
    "GKLSGenerator",
    "MixtureSpec",
    "PolynomialRate",
    "mix",
    "evolve_from_generator",
    "static_map",
    "depolarizing_lambda",
    "depolarizing_map",
    "depolarizing_example",
    "depolarizing_example_rate",
    "classical_example_spec",
    "gamma_a",
    "gamma_b",
    "pauli_rates_map",
    "pauli_example",
    "pauli_example_spec",
    "pauli_mixture_lambda",
    "pauli_threshold_closed_form",
    "pauli_threshold_bisect",
    "extremal_example",
    "extremal_parameters",
    "trace_distance_series",
    "bloch_T_derivative",
    "derivative_samples",
    "identity_unitary",
    "identity_map",
    "classical_map",
    "classical_example_matrix",
    "depolarizing_lambda_derivative",
    "DerivativeSamples",
]

ANALYTIC = "analytic"
TABULATED = "tabulated"


class DynamicalMap:
    """A family of channels ``t -> Lambda_t`` observed on a :class:`TimeGrid`.

    Analytic maps can be sampled at any time (finite differences use the
    step ``TOL.derivative_step`` around grid points). Tabulated maps exist only
    on their grid points and refuse anything else; derivatives then use the
    grid step.

    Parameters
    ----------
    dim : int
        Hilbert-space dimension.
    sampler : callable
        ``t -> Channel``.
    grid : TimeGrid
    kind : {"analytic", "tabulated"}
    name : str
        Label used in reports.
    bloch_sampler : callable, optional
        ``t -> BlochAffine`` shortcut for qubit maps whose Bloch form is known
        in closed form. Must agree with ``sampler``.
    """

    def __init__(
        self,
        dim: int,
        sampler: Callable[[float], Channel],
        grid: TimeGrid,
        kind: str = ANALYTIC,
        name: str = "map",
        bloch_sampler: Callable[[float], BlochAffine] | None = None,
        params: dict | None = None,
    ):
        if kind not in (ANALYTIC, TABULATED):
            raise InvalidInputError(f"unknown map kind {kind!r}")
        self.dim = int(dim)
        self.sampler = sampler
        self.grid = grid
        self.kind = kind
        self.name = name
        self.bloch_sampler = bloch_sampler
        self.params = dict(params or {})
        self._grid_channels: list[Channel] | None = None
        self._bloch_memo: dict[float, BlochAffine] = {}
        self._lock = threading.Lock()

    @classmethod
    def from_channels(cls, channels: Sequence[Channel], grid: TimeGrid, name: str = "tabulated",
                      params: dict | None = None) -> "DynamicalMap":
        channels = list(channels)
        if len(channels) != grid.n_samples:
            raise InvalidInputError(
                f"{len(channels)} channels given for a grid of {grid.n_samples} points"
            )
        dims = {c.dim for c in channels}
        if len(dims) != 1:
            raise InvalidInputError("all channels must share one dimension")

        def sampler(t):
            k = grid.index_of(t)
            if k is None:
                raise InvalidInputError(f"tabulated map is undefined off-grid (t={t})")
            return channels[k]

        dm = cls(dims.pop(), sampler, grid, TABULATED, name, params=params)
        dm._grid_channels = channels
        return dm

    @classmethod
    def from_bloch_table(cls, r, T, grid: TimeGrid, name: str = "bloch-affine-table",
                         validate: bool = True) -> "DynamicalMap":
        from .channels import channel_from_bloch

        r = np.asarray(r, dtype=float)
        T = np.asarray(T, dtype=float)
        if r.shape != (grid.n_samples, 3) or T.shape != (grid.n_samples, 3, 3):
            raise InvalidInputError(
                f"Bloch table must have shapes ({grid.n_samples}, 3) and ({grid.n_samples}, 3, 3), "
                f"got {r.shape} and {T.shape}"
            )
        chans = [channel_from_bloch(BlochAffine(r[k], T[k]), validate=validate) for k in range(len(r))]
        return cls.from_channels(chans, grid, name=name)

    # -- sampling -----------------------------------------------------------------
    @property
    def is_analytic(self) -> bool:
        return self.kind == ANALYTIC

    @property
    def derivative_step(self) -> float:
        return nx.TOL.derivative_step if self.is_analytic else self.grid.step

    def channel(self, t: float) -> Channel:
        if self.kind == TABULATED and self.grid.index_of(t) is None:
            raise InvalidInputError(f"tabulated map {self.name!r} is undefined off-grid (t={t})")
        return self.sampler(float(t))

    __call__ = channel

    def bloch(self, t: float) -> BlochAffine:
        if self.dim != 2:
            raise UnsupportedDimensionError("Bloch form requires a qubit map")
        t = float(t)
        hit = self._bloch_memo.get(t)
        if hit is not None:
            return hit
        if self.bloch_sampler is not None and self.is_analytic:
            b = self.bloch_sampler(t)
        else:
            b = bloch_from_channel(self.channel(t))
        with self._lock:
            if len(self._bloch_memo) > 200_000:
                self._bloch_memo.clear()
            self._bloch_memo[t] = b
        return b

    def grid_channels(self) -> list[Channel]:
        """Channels at every grid point, validated once and cached."""
        if self._grid_channels is None:
            with self._lock:
                if self._grid_channels is None:
                    self._grid_channels = [self.sampler(float(t)) for t in self.grid.times]
        return self._grid_channels

    validate = grid_channels

    def on(self, grid: TimeGrid) -> "DynamicalMap":
        """Same family observed on another grid.

        Tabulated maps only accept grids whose points are all existing samples.
        """
        if self.is_analytic:
            return DynamicalMap(self.dim, self.sampler, grid, ANALYTIC, self.name,
                                self.bloch_sampler, self.params)
        idx = [self.grid.index_of(t) for t in grid.times]
        if any(k is None for k in idx):
            raise InvalidInputError("tabulated maps cannot be resampled off their grid")
        chans = self.grid_channels()
        return DynamicalMap.from_channels([chans[k] for k in idx], grid, self.name, self.params)

    def map_channels(self, fn: Callable[[Channel], Channel], name: str | None = None) -> "DynamicalMap":
        """New family ``t -> fn(Lambda_t)`` with the same grid and kind."""
        name = name or self.name
        if self.is_analytic:
            return DynamicalMap(self.dim, lambda t: fn(self.sampler(t)), self.grid, ANALYTIC, name)
        return DynamicalMap.from_channels([fn(c) for c in self.grid_channels()], self.grid, name)

    def describe(self) -> dict:
        return {"name": self.name, "kind": self.kind, "dim": self.dim, "params": self.params}

    def __repr__(self) -> str:
        return f"DynamicalMap({self.name!r}, dim={self.dim}, kind={self.kind}, grid={self.grid})"


def static_map(channel: Channel, grid: TimeGrid, name: str = "static") -> DynamicalMap:
    """Time-independent family ``Lambda_t = channel``."""
    bloch = channel.bloch() if channel.dim == 2 else None
    return DynamicalMap(channel.dim, lambda t: channel, grid, ANALYTIC, name,
                        (lambda t: bloch) if bloch is not None else None)


def identity_unitary(d: int = 2) -> Callable[[float], np.ndarray]:
    eye = np.eye(d, dtype=complex)
    return lambda t: eye


# -- finite differences over a grid -----------------------------------------------------

@dataclass
class DerivativeSamples:
    """Samples of ``f`` and of its time derivative at every grid point.

    ``left``/``right`` are one-sided second-order estimates; they coincide with
    ``central`` for tabulated maps and at grid ends.
    """

    times: np.ndarray
    values: np.ndarray
    central: np.ndarray
    left: np.ndarray
    right: np.ndarray


def derivative_samples(dmap: DynamicalMap, f: Callable[[float], np.ndarray]) -> DerivativeSamples:
    """Differentiate ``t -> f(t)`` (a quantity built from ``dmap``) on its grid."""
    times = dmap.grid.times
    if not dmap.is_analytic:
        vals = np.array([f(t) for t in times])
        d = nx.grid_gradient(vals, dmap.grid.step)
        return DerivativeSamples(times, vals, d, d, d)
    h = nx.TOL.derivative_step
    lo, hi = dmap.grid.t_start, dmap.grid.t_end
    vals, cen, left, right = [], [], [], []
    for t in times:
        f0 = np.asarray(f(t), dtype=float)
        vals.append(f0)
        has_l = t - 2 * h >= lo
        has_r = t + 2 * h <= hi
        fm1 = np.asarray(f(t - h)) if has_l else None
        fm2 = np.asarray(f(t - 2 * h)) if has_l else None
        fp1 = np.asarray(f(t + h)) if has_r else None
        fp2 = np.asarray(f(t + 2 * h)) if has_r else None
        lft = (3 * f0 - 4 * fm1 + fm2) / (2 * h) if has_l else None
        rgt = (-3 * f0 + 4 * fp1 - fp2) / (2 * h) if has_r else None
        if has_l and has_r:
            c = (fp1 - fm1) / (2 * h)
        else:
            c = lft if lft is not None else rgt
            if c is None:
                raise InvalidInputError("grid interval is shorter than the derivative stencil")
        cen.append(c)
        left.append(lft if lft is not None else c)
        right.append(rgt if rgt is not None else c)
    return DerivativeSamples(times, np.array(vals), np.array(cen), np.array(left), np.array(right))


def _gram(dmap: DynamicalMap) -> Callable[[float], np.ndarray]:
    def g(t):
        T = dmap.bloch(t).T
        return T.T @ T
    return g


def bloch_T_derivative(dmap: DynamicalMap, t: float) -> tuple[np.ndarray, np.ndarray]:
    """``T(t)`` and ``d/dt (T^T T)`` for a qubit map.

    Analytic maps use a central difference with the configured step;
    tabulated maps differentiate along the grid. At either end of the grid a
    one-sided second-order stencil is used and a warning is emitted.
    """
    if dmap.dim != 2:
        raise UnsupportedDimensionError("Bloch derivative requires a qubit map")
    lo, hi = dmap.grid.t_start, dmap.grid.t_end
    if not dmap.grid.contains(t):
        raise InvalidInputError(f"t={t} outside the grid [{lo}, {hi}]")
    g = _gram(dmap)
    if dmap.is_analytic:
        h = nx.TOL.derivative_step
        if t - h < lo or t + h > hi:
            warnings.warn(f"t={t} is at the grid boundary; using a one-sided stencil", stacklevel=2)
        x = nx.central_diff(g, t, h, lo, hi)
    else:
        k = dmap.grid.index_of(t)
        if k is None:
            raise InvalidInputError(f"tabulated map is undefined off-grid (t={t})")
        if k in (0, dmap.grid.n_samples - 1):
            warnings.warn(f"t={t} is at the grid boundary; using a one-sided stencil", stacklevel=2)
        vals = np.array([g(s) for s in dmap.grid.times[max(0, k - 2): k + 3]])
        offset = k - max(0, k - 2)
        x = nx.grid_gradient(vals, dmap.grid.step)[offset]
    return dmap.bloch(t).T, 0.5 * (x + x.T)


def trace_distance_series(dmap: DynamicalMap, rho1, rho2) -> np.ndarray:
    """``||Lambda_t(rho1 - rho2)||_1`` at every grid point."""
    diff = np.asarray(rho1, dtype=complex) - np.asarray(rho2, dtype=complex)
    if diff.shape != (dmap.dim, dmap.dim):
        raise InvalidInputError("states do not match the map dimension")
    return np.array([nx.trace_norm(c.apply(diff)) for c in dmap.grid_channels()])


# -- mixtures -------------------------------------------------------------------------

@dataclass
class MixtureSpec:
    """Time-independent convex combination of dynamical maps.

    ``bases`` and ``unitaries`` optionally annotate each component with the
    basis it is claimed to be elementary in and the frame unitary ``U(t)``.
    """

    weights: Sequence[float]
    components: Sequence[DynamicalMap]
    bases: Sequence[Basis | None] | None = None
    unitaries: Sequence[Callable[[float], np.ndarray] | None] | None = None
    name: str = "mixture"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or len(w) != len(self.components) or len(w) == 0:
            raise InvalidInputError("need one weight per component")
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise InvalidInputError(f"weights must be a probability vector, got {w.tolist()}")
        self.weights = w
        for attr in ("bases", "unitaries"):
            ann = getattr(self, attr)
            if ann is not None and len(ann) != len(self.components):
                raise InvalidInputError(f"{attr} must have one entry per component")


def mix(spec: MixtureSpec) -> DynamicalMap:
    """Choi-space convex combination ``sum_i p_i Lambda^i_t``."""
    comps = list(spec.components)
    d = comps[0].dim
    grid = comps[0].grid
    if any(c.dim != d for c in comps):
        raise InvalidInputError("mixture components must share the dimension")
    if any(c.grid != grid for c in comps):
        raise InvalidInputError("mixture components must share the time grid")
    w = spec.weights

    def combine(chans):
        return Channel(sum(p * c.choi for p, c in zip(w, chans)), validate=False)

    if all(c.is_analytic for c in comps):
        def sampler(t):
            return combine([c.sampler(t) for c in comps]).validate()

        def mixed_bloch(t):
            parts = [c.bloch_sampler(t) for c in comps]
            return BlochAffine(sum(p * b.r for p, b in zip(w, parts)),
                               sum(p * b.T for p, b in zip(w, parts)))

        has_bloch = d == 2 and all(c.bloch_sampler is not None for c in comps)
        return DynamicalMap(d, sampler, grid, ANALYTIC, spec.name, mixed_bloch if has_bloch else None,
                            {"weights": w.tolist(), "components": [c.name for c in comps]})
    per_comp = [c.grid_channels() for c in comps]
    chans = [combine(cs).validate() for cs in zip(*per_comp)]
    return DynamicalMap.from_channels(chans, grid, spec.name,
                                      {"weights": w.tolist(), "components": [c.name for c in comps]})


# -- GKLS generators ----------------------------------------------------------------------

@dataclass
class GKLSGenerator:
    """``L_t(rho) = sum_i g_i(t) (L_i rho L_i^+ - {L_i^+ L_i, rho}/2)``.

    Rates are in the standard form above. :meth:`pauli` accepts rates written
    as ``sum_i gamma_i(t) (s_i rho s_i - rho)/2`` instead.
    """

    jumps: Sequence[np.ndarray]
    rates: Sequence[Callable[[float], float]]
    hamiltonian: np.ndarray | None = None
    dim: int = field(init=False)

    def __post_init__(self):
        self.jumps = [np.asarray(j, dtype=complex) for j in self.jumps]
        if len(self.jumps) != len(self.rates):
            raise InvalidInputError("need one rate function per jump operator")
        if not self.jumps and self.hamiltonian is None:
            raise InvalidInputError("empty generator: give jumps or a Hamiltonian")
        shapes = {j.shape for j in self.jumps}
        if self.hamiltonian is not None:
            self.hamiltonian = np.asarray(self.hamiltonian, dtype=complex)
            shapes.add(self.hamiltonian.shape)
        if len(shapes) != 1:
            raise InvalidInputError("jump operators must share a square shape")
        shape = shapes.pop()
        if len(shape) != 2 or shape[0] != shape[1]:
            raise InvalidInputError("jump operators must be square")
        self.dim = shape[0]
        eye = np.eye(self.dim)
        self._dissipators = []
        for j in self.jumps:
            jj = j.conj().T @ j
            self._dissipators.append(
                np.kron(j, j.conj()) - 0.5 * np.kron(jj, eye) - 0.5 * np.kron(eye, jj.T)
            )
        if self.hamiltonian is not None:
            h = self.hamiltonian
            self._coherent = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
        else:
            self._coherent = np.zeros((self.dim ** 2, self.dim ** 2), dtype=complex)

    @classmethod
    def pauli(cls, rates: Sequence[Callable[[float], float]]) -> "GKLSGenerator":
        rates = list(rates)
        if len(rates) != 3:
            raise InvalidInputError("need three Pauli rates")
        return cls(list(PAULI), [(lambda t, g=g: 0.5 * g(t)) for g in rates])

    def superop(self, t: float) -> np.ndarray:
        out = self._coherent.copy()
        for g, dis in zip(self.rates, self._dissipators):
            out = out + float(g(t)) * dis
        return out

    def apply(self, t: float, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        return (self.superop(t) @ rho.reshape(-1)).reshape(self.dim, self.dim)


def evolve_from_generator(gen: GKLSGenerator, grid: TimeGrid, max_step: float = 1e-3,
                          name: str = "gkls") -> DynamicalMap:
    """Integrate ``dS/dt = L_t S`` from ``S(0) = Id`` with classical RK4.

    Returns a tabulated map on ``grid``. A warning is issued (and the map
    still returned) if a sample has a Choi eigenvalue below -1e-6.
    """
    if grid.t_start < 0:
        raise InvalidInputError("generator evolution starts at t = 0; grid must lie in t >= 0")
    d2 = gen.dim ** 2
    s = np.eye(d2, dtype=complex)

    def advance(s, t_from, t_to):
        if t_to <= t_from:
            return s
        n = max(1, math.ceil((t_to - t_from) / max_step))
        dt = (t_to - t_from) / n
        t = t_from
        for _ in range(n):
            k1 = gen.superop(t) @ s
            lm = gen.superop(t + dt / 2)
            k2 = lm @ (s + dt / 2 * k1)
            k3 = lm @ (s + dt / 2 * k2)
            k4 = gen.superop(t + dt) @ (s + dt * k3)
            s = s + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += dt
        return s

    chans = []
    t_prev = 0.0
    worst = np.inf
    for t in grid.times:
        s = advance(s, t_prev, t)
        t_prev = t
        c = channel_from_superop(s, validate=False)
        worst = min(worst, c.min_choi_eigenvalue)
        chans.append(c)
    if worst < -1e-6:
        warnings.warn(
            f"integrated map leaves the CPTP set (most negative Choi eigenvalue {worst:.3e})",
            stacklevel=2,
        )
    return DynamicalMap.from_channels(chans, grid, name=name,
                                      params={"min_choi_eigenvalue": worst, "max_step": max_step})


# -- Example: depolarizing family with classical decomposition -------------------------------

def depolarizing_lambda(t, epsilon: float = 0.01, t0: float = 1.0):
    """Contraction factor: quadratic decay on [0, t0), damped cosine afterwards."""
    t = np.asarray(t, dtype=float)
    before = (4 + epsilon) / (6 * t0 ** 2) * (t - t0) ** 2 + (2 - epsilon) / 6
    after = 1 / 6 + (1 - epsilon) / 6 * np.cos(t - t0)
    out = np.where(t < t0, before, after)
    return float(out) if out.ndim == 0 else out


def depolarizing_lambda_derivative(t, epsilon: float = 0.01, t0: float = 1.0):
    t = np.asarray(t, dtype=float)
    before = 2 * (4 + epsilon) / (6 * t0 ** 2) * (t - t0)
    after = -(1 - epsilon) / 6 * np.sin(t - t0)
    out = np.where(t < t0, before, after)
    return float(out) if out.ndim == 0 else out


def depolarizing_map(lam: Callable[[float], float], grid: TimeGrid, name: str = "depolarizing",
                     params: dict | None = None) -> DynamicalMap:
    """``rho -> lam(t) rho + (1 - lam(t)) I/2``."""
    def bloch(t):
        return BlochAffine(np.zeros(3), lam(t) * np.eye(3))

    def sampler(t):
        l = lam(t)
        return pauli_channel((l, l, l))

    return DynamicalMap(2, sampler, grid, ANALYTIC, name, bloch, params)


def _default_grid(t_start, t_end, n=1001):
    return TimeGrid(t_start, t_end, n)


def depolarizing_example(epsilon: float = 0.01, t0: float = 1.0,
                         grid: TimeGrid | None = None) -> DynamicalMap:
    if epsilon <= 0:
        raise InvalidInputError("epsilon must be positive")
    if t0 <= 0:
        raise InvalidInputError("t0 must be positive")
    grid = grid or _default_grid(0.0, t0 + 2 * np.pi)
    return depolarizing_map(lambda t: depolarizing_lambda(t, epsilon, t0), grid,
                            name="ex1-depolarizing", params={"epsilon": epsilon, "t0": t0})


def depolarizing_example_rate(epsilon: float = 0.01, t0: float = 1.0) -> Callable[[float], float]:
    """Rate gamma(t) of ``sum_i gamma (s_i rho s_i - rho)/2`` reproducing the quadratic branch.

    A Bloch component decays at rate ``gamma`` under each of the two Pauli
    terms orthogonal to it, so ``lambda'/lambda = -2 gamma``; valid on [0, t0).
    """
    def rate(t):
        return -depolarizing_lambda_derivative(t, epsilon, t0) / (2 * depolarizing_lambda(t, epsilon, t0))
    return rate


def classical_example_matrix(t, epsilon: float = 0.01, t0: float = 1.0) -> np.ndarray:
    p = 0.75 + (1 - epsilon) / 4 * np.cos(t - t0)
    return np.array([[p, 1 - p], [1 - p, p]])


def classical_map(matrix: Callable[[float], np.ndarray], basis: Basis, grid: TimeGrid,
                  name: str = "classical", unitary: Callable[[float], np.ndarray] | None = None,
                  params: dict | None = None) -> DynamicalMap:
    """Family of (generalized) classical channels from a stochastic-matrix function."""
    def sampler(t):
        c = classical_channel(matrix(t), basis)
        if unitary is not None:
            c = c.conjugate_output(unitary(t))
        return c

    return DynamicalMap(basis.dim, sampler, grid, ANALYTIC, name, params=params)


def classical_example_spec(epsilon: float = 0.01, t0: float = 1.0,
                           grid: TimeGrid | None = None) -> MixtureSpec:
    """Three classical maps (eigenbases of s1, s2, s3) sharing one bistochastic matrix.

    Their equal mixture coincides with :func:`depolarizing_example` for t >= t0.
    """
    grid = grid or _default_grid(t0, t0 + 2 * np.pi)
    comps, bases = [], []
    for k in (1, 2, 3):
        b = Basis.pauli(k)
        comps.append(classical_map(lambda t: classical_example_matrix(t, epsilon, t0), b, grid,
                                   name=f"ex1-classical-{k}", params={"epsilon": epsilon, "t0": t0}))
        bases.append(b)
    return MixtureSpec([1 / 3] * 3, comps, bases, [identity_unitary()] * 3, name="ex1-mixture")


# -- Example: Pauli maps from piecewise-polynomial rates ----------------------------------------

class PolynomialRate:
    """Sum of windowed polynomials ``sum_p 1[a_p <= t <= b_p] poly_p(t)``.

    Each piece is integrated separately over its window, so jumps at window
    edges never leak into neighbouring quadrature panels.
    """

    def __init__(self, pieces: Sequence[tuple[tuple[float, float] | None, Sequence[float]]]):
        self.pieces = [(None if w is None else (float(w[0]), float(w[1])),
                        np.asarray(c, dtype=float)) for w, c in pieces]
        for w, _ in self.pieces:
            if w is not None and not w[0] <= w[1]:
                raise InvalidInputError(f"rate window {w} is reversed")
        self._cache: dict[float, float] = {}
        self._lock = threading.Lock()

    @property
    def breakpoints(self) -> list[float]:
        return sorted({x for w, _ in self.pieces if w is not None for x in w})

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for w, c in self.pieces:
            val = np.polynomial.polynomial.polyval(t, c)
            if w is not None:
                val = np.where((t >= w[0]) & (t <= w[1]), val, 0.0)
            out = out + val
        return float(out) if out.ndim == 0 else out

    def integral(self, t: float, panels: int = 8) -> float:
        """``int_0^t rate``, by Simpson quadrature piece by piece."""
        t = float(t)
        cached = self._cache.get(t)
        if cached is not None:
            return cached
        lo, hi, sign = (0.0, t, 1.0) if t >= 0 else (t, 0.0, -1.0)
        total = 0.0
        for w, c in self.pieces:
            a, b = (lo, hi) if w is None else (max(lo, w[0]), min(hi, w[1]))
            if b > a:
                total += nx.quadrature(lambda x, c=c: np.polynomial.polynomial.polyval(x, c), a, b, panels)
        total *= sign
        with self._lock:
            if len(self._cache) > 100_000:
                self._cache.clear()
            self._cache[t] = total
        return total

    def to_dict(self) -> dict:
        return {"pieces": [{"on": None if w is None else list(w), "poly": c.tolist()}
                           for w, c in self.pieces]}


def gamma_a() -> PolynomialRate:
    """``2 t^2 - 6 t + 4``: negative exactly on (1, 2)."""
    return PolynomialRate([(None, (4.0, -6.0, 2.0))])


def gamma_b(epsilon: float) -> PolynomialRate:
    """``epsilon - gamma_a`` on [1, 2], zero elsewhere."""
    return PolynomialRate([((1.0, 2.0), (epsilon - 4.0, 6.0, -2.0))])


def _pauli_lambdas(rates, t) -> np.ndarray:
    big = [g.integral(t) for g in rates]
    return np.array([math.exp(-big[1] - big[2]), math.exp(-big[2] - big[0]), math.exp(-big[0] - big[1])])


def pauli_rates_map(rates: Sequence[PolynomialRate], grid: TimeGrid, name: str = "pauli-rates",
                    params: dict | None = None) -> DynamicalMap:
    """Pauli channels with ``lambda_i = exp(-Gamma_j - Gamma_k)`` over cyclic (i, j, k)."""
    rates = list(rates)
    if len(rates) != 3:
        raise InvalidInputError("need three rate functions")

    def bloch(t):
        return BlochAffine(np.zeros(3), np.diag(_pauli_lambdas(rates, t)))

    def sampler(t):
        return pauli_channel(_pauli_lambdas(rates, t))

    return DynamicalMap(2, sampler, grid, ANALYTIC, name, bloch, params)


def _check_epsilon(epsilon):
    if not epsilon > 0:
        raise InvalidInputError("epsilon must be positive")


def pauli_example(k: int, epsilon: float = 0.05, grid: TimeGrid | None = None,
                  ga: PolynomialRate | None = None, gb: PolynomialRate | None = None) -> DynamicalMap:
    """Component ``k``: rate ``gamma_b`` on axis ``k``, ``gamma_a`` on the other two."""
    if k not in (1, 2, 3):
        raise InvalidInputError("component index must be 1, 2 or 3")
    _check_epsilon(epsilon)
    grid = grid or _default_grid(0.0, 3.0)
    ga = ga or gamma_a()
    gb = gb or gamma_b(epsilon)
    rates = [gb if i == k else ga for i in (1, 2, 3)]
    return pauli_rates_map(rates, grid, name=f"ex2-pauli-{k}", params={"k": k, "epsilon": epsilon})


def pauli_example_spec(epsilon: float = 0.05, grid: TimeGrid | None = None) -> MixtureSpec:
    grid = grid or _default_grid(0.0, 3.0)
    ga, gb = gamma_a(), gamma_b(epsilon)
    comps = [pauli_example(k, epsilon, grid, ga, gb) for k in (1, 2, 3)]
    return MixtureSpec([1 / 3] * 3, comps, [Basis.pauli(k) for k in (1, 2, 3)],
                       [identity_unitary()] * 3, name="ex2-mixture")


def pauli_mixture_lambda(t: float, epsilon: float) -> float:
    """Isotropic contraction of the equal mixture, computed through quadrature."""
    comp = _pauli_lambdas([gamma_b(epsilon), gamma_a(), gamma_a()], t)
    return (comp[0] + 2 * comp[1]) / 3


def pauli_threshold_closed_form() -> float:
    """Largest epsilon for which the mixture has lambda(1) < lambda(2)."""
    e = math.exp
    return -math.log(0.5 * e(5 / 3) * (e(-10 / 3) + 2 * e(-5 / 3) - e(-8 / 3)))


def pauli_threshold_bisect(lo: float = 1e-6, hi: float = 1.0, xtol: float = 1e-12) -> float:
    """Bisection on the sign of ``lambda(2) - lambda(1)`` as a function of epsilon."""
    def gap(eps):
        return pauli_mixture_lambda(2.0, eps) - pauli_mixture_lambda(1.0, eps)

    return float(bisect(gap, lo, hi, xtol=xtol))


# -- Example: extremal amplitude-damping-like family ---------------------------------------------

def extremal_parameters(t: float) -> tuple[np.ndarray, np.ndarray]:
    """``(lambda, r)`` with ``l1 = l2 = 1/2 + sin(t)/4``, ``l3 = l1 l2``, ``r3 = 1 - l3``."""
    a = 0.5 + 0.25 * math.sin(t)
    lam = np.array([a, a, a * a])
    return lam, np.array([0.0, 0.0, 1.0 - a * a])


def extremal_example(grid: TimeGrid | None = None) -> DynamicalMap:
    grid = grid or TimeGrid(1e-3, np.pi / 2, 1001)

    def bloch(t):
        lam, r = extremal_parameters(t)
        return BlochAffine(r, np.diag(lam))

    def sampler(t):
        lam, r = extremal_parameters(t)
        return pauli_channel(lam, r)

    return DynamicalMap(2, sampler, grid, ANALYTIC, "ex3-extremal", bloch)


def identity_map(grid: TimeGrid, d: int = 2) -> DynamicalMap:
    return static_map(identity_channel(d), grid, name="identity")
