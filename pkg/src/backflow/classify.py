"""Markovianity and memory-type checks on sampled dynamical maps.

Every verdict is a statement about the grid points only: "the inequality
holds at every sample, within the stated tolerance". Qubit checks are exact
reformulations in Bloch coordinates; for d > 2 the checks sample directions and
are tagged ``method="sampled"``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import numerics as nx
from .channels import Basis, Channel, is_dio
from .dynamics import DerivativeSamples, DynamicalMap, derivative_samples
from .errors import InvalidInputError, UnsupportedDimensionError
from .numerics import IDENTITY2, PAULI
from .verdict import Status, Verdict, worst_index

__all__ = [
    "check_blp",
    "check_cp_divisible",
    "check_elementary",
    "elementary_screen",
    "check_block_diagonal_elementary",
    "check_coherence_monotone",
    "check_dio_composition",
    "frame_completing",
    "eq12_margin",
    "projected_margin",
]

SAMPLED_PAIRS = 200
CONTAINMENT_TOL = 1e-9
CPDIV_TOL = 1e-8
CONDITION_LIMIT = 1e10


def frame_completing(n, angle: float = 0.0) -> np.ndarray:
    """Orthogonal matrix ``R`` (det +1) whose third column is the unit vector ``n``.

    ``angle`` rotates the first two columns inside the plane orthogonal to ``n``;
    any choice is a valid completion.
    """
    n = np.asarray(n, dtype=float)
    n = n / np.linalg.norm(n)
    helper = np.eye(3)[int(np.argmin(np.abs(n)))]
    u = helper - (helper @ n) * n
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    c, s = np.cos(angle), np.sin(angle)
    u, v = c * u + s * v, -s * u + c * v
    return np.column_stack([u, v, n])


def eq12_margin(m: np.ndarray) -> float:
    """``M11 + M22 + sqrt((M11 - M22)^2 + (M12 + M21)^2)`` for a 2x2 matrix."""
    m = np.asarray(m, dtype=float)
    return float(m[0, 0] + m[1, 1] + np.hypot(m[0, 0] - m[1, 1], m[0, 1] + m[1, 0]))


def projected_margin(x: np.ndarray, n, frame: np.ndarray | None = None) -> float:
    """Twice the largest eigenvalue of ``x`` restricted to the plane orthogonal to ``n``."""
    r = frame_completing(n) if frame is None else frame
    block = (r.T @ x @ r)[:2, :2]
    return float(2 * np.linalg.eigvalsh(0.5 * (block + block.T))[-1])


def _sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _qubit_tol(dmap: DynamicalMap) -> float:
    norms = [nx.operator_norm(dmap.bloch(t).T) for t in dmap.grid.times]
    return nx.TOL.eig * max(norms)


def _grid_verdict(name: str, dmap: DynamicalMap, central: np.ndarray, left: np.ndarray,
                  right: np.ndarray, tol: float, witness: Callable[[int], dict],
                  method: str = "exact", details: dict | None = None) -> Verdict:
    """Fold per-point derivative margins into a verdict.

    A point fails when both one-sided estimates exceed ``tol``; when they
    disagree by more than ``tol`` across the threshold (a kink) the point is
    indeterminate; otherwise the central estimate decides.
    """
    over_l, over_r = left > tol, right > tol
    kink = (over_l != over_r) & (np.abs(left - right) > tol)
    point_fail = (over_l & over_r) | (~kink & (central > tol))
    point_indet = kink & ~point_fail
    margin = float(np.max(central))
    details = dict(details or {})
    times = dmap.grid.times
    if point_fail.any():
        masked = np.where(point_fail, central, -np.inf)
        k = worst_index(masked)
        status, wp = Status.FAIL, witness(k)
    elif point_indet.any():
        status, wp = Status.INDETERMINATE, None
        details["indeterminate_times"] = times[point_indet].tolist()
    else:
        status, wp = Status.PASS, None
    details.setdefault("worst_time", float(times[worst_index(central)]))
    return Verdict(name, status, margin, tol, wp, dmap.grid, method, times, central, details)


def _random_states(rng, d, k):
    z = rng.normal(size=(k, d)) + 1j * rng.normal(size=(k, d))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return np.einsum("ka,kb->kab", z, z.conj())


def _sampled_check(name: str, dmap: DynamicalMap, directions: np.ndarray) -> Verdict:
    def f(t):
        c = dmap.channel(t)
        return np.array([nx.trace_norm(c.apply(y)) for y in directions])

    ds = derivative_samples(dmap, f)
    scale = max(1.0, float(np.max(ds.values)))
    tol = nx.TOL.eig * scale
    cen, lft, rgt = (np.max(a, axis=1) for a in (ds.central, ds.left, ds.right))

    def witness(k):
        j = int(np.argmax(ds.central[k]))
        return {"time": float(ds.times[k]), "direction": directions[j]}

    return _grid_verdict(name, dmap, cen, lft, rgt, tol, witness, method="sampled",
                         details={"samples": len(directions)})


# -- BLP ---------------------------------------------------------------------------------

def check_blp(dmap: DynamicalMap, samples: int = SAMPLED_PAIRS, seed: int = 0) -> Verdict:
    """No information backflow: ``d/dt ||Lambda_t(rho1 - rho2)||_1 <= 0`` for all pairs.

    For qubits ``||Lambda_t(rho1 - rho2)||_1 = |T(t) dm|``, so the condition is
    that ``X(t) = d/dt T^T T`` is negative semidefinite at every grid point.
    The failure witness carries the Bloch direction with the largest growth.
    """
    dmap.validate()
    if dmap.dim == 2:
        def gram(t):
            T = dmap.bloch(t).T
            return T.T @ T

        ds = derivative_samples(dmap, gram)
        lam = [np.linalg.eigvalsh(_sym(a))[:, -1] for a in (ds.central, ds.left, ds.right)]

        def witness(k):
            w, v = np.linalg.eigh(_sym(ds.central[k]))
            return {"time": float(ds.times[k]), "direction": v[:, -1], "rate": float(w[-1])}

        return _grid_verdict("blp", dmap, *lam, _qubit_tol(dmap), witness)
    rng = np.random.default_rng(seed)
    states = _random_states(rng, dmap.dim, 2 * samples)
    return _sampled_check("blp", dmap, states[:samples] - states[samples:])


# -- CP-divisibility ----------------------------------------------------------------------

def check_cp_divisible(dmap: DynamicalMap) -> Verdict:
    """Complete positivity of the one-step propagators ``V = S(t_{k+1}) S(t_k)^{-1}``.

    Steps whose ``S(t_k)`` has condition number above 1e10 are indeterminate.
    Composition of CP one-step propagators gives every coarser propagator, so
    checking adjacent pairs suffices on the grid.
    """
    chans = dmap.validate()
    sups = [c.superop for c in chans]
    n = len(sups) - 1
    min_eigs = np.full(n, np.nan)
    tp = np.zeros(n)
    indet = []
    vecs = {}
    for k in range(n):
        cond = np.linalg.cond(sups[k])
        if not np.isfinite(cond) or cond > CONDITION_LIMIT:
            indet.append(k)
            continue
        v = np.linalg.solve(sups[k].T, sups[k + 1].T).T
        prop = Channel(_propagator_choi(v), validate=False)
        w, u = np.linalg.eigh(prop.choi)
        min_eigs[k] = w[0]
        vecs[k] = u[:, 0]
        tp[k] = prop.trace_defect()
    step_margin = -min_eigs
    times = dmap.grid.times[:-1]
    bad = (step_margin > CPDIV_TOL) | (tp > CPDIV_TOL)
    finite = np.where(np.isnan(step_margin), -np.inf, step_margin)
    margin = float(np.max(finite)) if n else 0.0
    details = {"max_trace_defect": float(np.max(tp)) if n else 0.0}
    if bad.any():
        k = worst_index(np.where(bad, finite, -np.inf))
        wp = {"time": float(times[k]), "next_time": float(dmap.grid.times[k + 1]),
              "min_choi_eigenvalue": float(min_eigs[k]), "eigenvector": vecs[k],
              "trace_defect": float(tp[k])}
        status = Status.FAIL
    elif indet:
        status, wp = Status.INDETERMINATE, None
        details["ill_conditioned_times"] = times[indet].tolist()
    else:
        status, wp = Status.PASS, None
    return Verdict("cpdiv", status, margin, CPDIV_TOL, wp, dmap.grid, "exact", times,
                   step_margin, details)


def _propagator_choi(v: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(v.shape[0])))
    return v.reshape(d, d, d, d).transpose(2, 0, 3, 1).reshape(d * d, d * d) / d


# -- elementary maps --------------------------------------------------------------------

def _plane_gram(dmap: DynamicalMap, frame: np.ndarray) -> DerivativeSamples:
    def f(t):
        a = (dmap.bloch(t).T @ frame)[:, :2]
        return a.T @ a

    return derivative_samples(dmap, f)


def check_elementary(dmap: DynamicalMap, basis: Basis, frame: np.ndarray | None = None,
                     samples: int = SAMPLED_PAIRS, seed: int = 0) -> Verdict:
    """Trace distance of pairs with equal diagonals in ``basis`` never grows.

    Qubits: with ``n`` the Bloch axis of ``basis`` and ``A(t)`` the first two
    columns of ``T(t) R`` (``R`` any orthogonal frame with third column ``n``),
    the per-point margin is the closed-form maximum over the plane,
    ``M11 + M22 + sqrt((M11 - M22)^2 + (M12 + M21)^2)`` with
    ``M = d/dt A^T A``.
    """
    if basis.dim != dmap.dim:
        raise InvalidInputError("basis and map dimensions differ")
    dmap.validate()
    if dmap.dim == 2:
        n = basis.axis
        r = frame_completing(n) if frame is None else np.asarray(frame, dtype=float)
        if np.max(np.abs(r[:, 2] - n)) > 1e-9 or np.max(np.abs(r.T @ r - np.eye(3))) > 1e-9:
            raise InvalidInputError("frame must be orthogonal with third column equal to the basis axis")
        ds = _plane_gram(dmap, r)
        vals = [np.array([eq12_margin(m) for m in arr]) for arr in (ds.central, ds.left, ds.right)]

        def witness(k):
            m = _sym(ds.central[k])
            w, v = np.linalg.eigh(m)
            return {"time": float(ds.times[k]), "direction": r[:, :2] @ v[:, -1],
                    "rate": float(w[-1])}

        return _grid_verdict("elementary", dmap, *vals, _qubit_tol(dmap), witness,
                             details={"basis_axis": n})
    rng = np.random.default_rng(seed)
    d = dmap.dim
    h = rng.normal(size=(samples, d, d)) + 1j * rng.normal(size=(samples, d, d))
    h = h + np.conj(np.swapaxes(h, 1, 2))
    idx = np.arange(d)
    h[:, idx, idx] = 0.0
    dirs = np.array([basis.from_basis(y) for y in h])
    return _sampled_check("elementary", dmap, dirs)


def elementary_screen(dmap: DynamicalMap, basis: Basis, tol: float = 1e-10) -> tuple[Verdict, Verdict]:
    """Cheap necessary and sufficient tests on the singular values of ``A(t)``.

    necessary: the larger singular value never increases along the grid;
    sufficient: the larger singular value at ``t`` never exceeds the smaller
    one at any earlier ``s``.
    """
    if dmap.dim != 2:
        raise UnsupportedDimensionError("the singular-value screen is qubit-only")
    r = frame_completing(basis.axis)
    sv = np.array([np.linalg.svd((dmap.bloch(t).T @ r)[:, :2], compute_uv=False)
                   for t in dmap.grid.times])
    big, small = sv[:, 0], sv[:, 1]
    times = dmap.grid.times
    nec = np.diff(big)
    running_min = np.minimum.accumulate(small)[:-1]
    suf = big[1:] - running_min

    def verdict(name, vals):
        k = worst_index(vals)
        margin = float(vals[k])
        if margin > tol:
            return Verdict(name, Status.FAIL, margin, tol,
                           {"time": float(times[k + 1]), "previous_time": float(times[k])},
                           dmap.grid, "exact", times[1:], vals)
        return Verdict(name, Status.PASS, margin, tol, None, dmap.grid, "exact", times[1:], vals)

    return verdict("elementary-necessary", nec), verdict("elementary-sufficient", suf)


def _unit_ops(basis: Basis):
    d = basis.dim
    for i in range(d):
        for j in range(d):
            yield i, j, np.outer(basis.vectors[:, i], basis.vectors[:, j].conj())


def _containment_residuals(c: Channel, basis: Basis, diagonal_only: bool) -> tuple[float, tuple]:
    worst, where = 0.0, (0, 0)
    for i, j, e in _unit_ops(basis):
        if diagonal_only and i != j:
            continue
        out = basis.to_basis(c.apply(e))
        if i == j:
            bad = out - np.diag(np.diag(out))
        else:
            bad = np.diag(np.diag(out))
        val = nx.trace_norm(bad)
        if val > worst:
            worst, where = val, (i, j)
    return worst, where


def check_block_diagonal_elementary(dmap: DynamicalMap, basis: Basis,
                                    unitary: Callable[[float], np.ndarray],
                                    diagonal_only: bool = False) -> Verdict:
    """Elementary, and ``U(t) Lambda_t(.) U(t)^+`` respects diag/off-diag blocks in ``basis``.

    With ``diagonal_only`` only diagonal-to-diagonal containment is required
    (the "diagonal elementary" class). ``U(t)`` is supplied, not searched for.
    The margin is the worse of the two slacks (value minus tolerance).
    """
    name = "diagonal-elementary" if diagonal_only else "block-elementary"
    elem = check_elementary(dmap, basis)
    times = dmap.grid.times
    res = np.zeros(len(times))
    where = []
    for k, (t, c) in enumerate(zip(times, dmap.grid_channels())):
        u = np.asarray(unitary(t), dtype=complex)
        if u.shape != (dmap.dim, dmap.dim) or np.max(np.abs(u.conj().T @ u - np.eye(dmap.dim))) > 1e-12:
            raise InvalidInputError(f"U(t) is not unitary at t={t}")
        res[k], ij = _containment_residuals(c.conjugate_output(u), basis, diagonal_only)
        where.append(ij)
    k = worst_index(res)
    cont_slack = float(res[k]) - CONTAINMENT_TOL
    elem_slack = elem.margin - elem.tolerance
    margin = max(cont_slack, elem_slack)
    details = {"elementary": elem, "containment_residual": float(res[k])}
    if cont_slack > 0:
        wp = {"time": float(times[k]), "matrix_unit": list(where[k]), "residual": float(res[k])}
        status = Status.FAIL
    elif elem.status is Status.FAIL:
        status, wp = Status.FAIL, elem.witness_point
    else:
        status, wp = elem.status, None
    return Verdict(name, status, margin, 0.0, wp, dmap.grid, elem.method, times,
                   res - CONTAINMENT_TOL, details)


def check_coherence_monotone(dmap: DynamicalMap, basis: Basis,
                             unitary: Callable[[float], np.ndarray]) -> Verdict:
    """l1-coherence of ``U(t) Lambda_t(rho) U(t)^+`` never grows, for every input state.

    For maps that are block-diagonal in ``basis`` the off-diagonal entry of the
    output is linear in the input's coherence vector ``(m1, m2)``. The four
    states ``(I +- s1)/2`` and ``(I +- s2)/2`` (written in ``basis``) recover that
    2x2 linear map ``K(t)``; ``C_l1 = 2 |K m|``, so monotonicity for all inputs is
    ``d/dt 4 K^T K <= 0``. The per-point margin is its largest eigenvalue.
    """
    if dmap.dim != 2:
        raise UnsupportedDimensionError("coherence criterion is qubit-only")
    dmap.validate()
    probes = [basis.from_basis((IDENTITY2 + sgn * PAULI[a]) / 2) for a in (0, 1) for sgn in (1, -1)]

    def kmat(t):
        c = dmap.channel(t)
        u = np.asarray(unitary(t), dtype=complex)
        cols = []
        for a in (0, 1):
            outs = []
            for sgn in (0, 1):
                rho = c.apply(probes[2 * a + sgn])
                off = basis.to_basis(u @ rho @ u.conj().T)[0, 1]
                outs.append(np.array([off.real, off.imag]))
            cols.append((outs[0] - outs[1]) / 2)
        k = np.column_stack(cols)
        return 4 * k.T @ k

    ds = derivative_samples(dmap, kmat)
    vals = [np.linalg.eigvalsh(_sym(a))[:, -1] for a in (ds.central, ds.left, ds.right)]

    def witness(k):
        w, v = np.linalg.eigh(_sym(ds.central[k]))
        m = v[:, -1]
        state = basis.from_basis((IDENTITY2 + m[0] * PAULI[0] + m[1] * PAULI[1]) / 2)
        return {"time": float(ds.times[k]), "state": state, "rate": float(w[-1])}

    return _grid_verdict("coherence", dmap, *vals, _qubit_tol(dmap), witness)


def check_dio_composition(dmap: DynamicalMap, basis: Basis, omega: Channel) -> Verdict:
    """Elementary check of ``t -> Lambda_t o Omega`` for a dephasing-covariant ``Omega``."""
    dio = is_dio(omega, basis)
    if not dio.passed:
        raise InvalidInputError(f"Omega is not DIO in the given basis (residual {dio.margin:.2e})")
    composed = dmap.map_channels(lambda c: c.compose(omega).validate(), name=f"{dmap.name}*omega")
    v = check_elementary(composed, basis)
    v.name = "dio-composition"
    return v
