"""Backflow certificates and checks of claimed mixture decompositions."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channels import Basis, Channel
from .classify import (
    CONTAINMENT_TOL,
    check_blp,
    check_block_diagonal_elementary,
    check_elementary,
    frame_completing,
)
from .dynamics import DynamicalMap, MixtureSpec
from .errors import InvalidInputError, UnsupportedDimensionError
from .numerics import TimeGrid
from .verdict import Status, Verdict, _jsonable, worst_index
from .witness import refute_type0

__all__ = [
    "Certificate",
    "is_extremal",
    "fibonacci_sphere",
    "plane_increase",
    "strong_backflow_certificate",
    "weak_backflow_verdict",
    "verify_decomposition",
    "DECOMPOSITION_TYPES",
]

KRAUS_RANK_TOL = 1e-9
EXTREMAL_PASS = 1e-8
EXTREMAL_FAIL = 1e-10
STRONG_TOL = 1e-9
DECOMPOSITION_TYPES = ("0", "I", "II", "strong-none")


@dataclass
class Certificate:
    """Outcome of a backflow certification: ``kind`` is "weak", "strong" or "none"."""

    kind: str
    times: tuple[float, float] | None = None
    margin: float | None = None
    direction: np.ndarray | None = None
    extremality: tuple[Verdict, Verdict] | None = None
    verdicts: dict[str, Verdict] = field(default_factory=dict)
    grid: TimeGrid | None = None
    sphere_size: int | None = None
    details: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.kind != "none"

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.times is not None:
            out["times"] = list(self.times)
        if self.margin is not None:
            out["margin"] = self.margin
        if self.direction is not None:
            out["direction"] = self.direction
        if self.extremality is not None:
            out["extremality"] = [v.to_dict() for v in self.extremality]
        if self.verdicts:
            out["verdicts"] = {k: v.to_dict() for k, v in self.verdicts.items()}
        if self.grid is not None:
            out["grid"] = self.grid.to_dict()
        if self.sphere_size is not None:
            out["sphere_size"] = self.sphere_size
        if self.details:
            out["details"] = self.details
        return _jsonable(out)


def is_extremal(c: Channel) -> Verdict:
    """Extreme point of the channel set: the products ``K_i^+ K_j`` are linearly independent.

    The margin is the ratio of the smallest to the largest singular value of
    the Gram matrix of the products. Above 1e-8 passes, below 1e-10 fails and
    the band in between is indeterminate.
    """
    ops = c.kraus(KRAUS_RANK_TOL)
    r, d = len(ops), c.dim
    if r * r > d * d:
        return Verdict("extremal", Status.FAIL, 0.0, EXTREMAL_PASS,
                       {"kraus_rank": r, "reason": f"{r * r} products in a {d * d}-dimensional space"},
                       details={"kraus_rank": r})
    prods = np.array([(a.conj().T @ b).reshape(-1) for a in ops for b in ops])
    gram = prods.conj() @ prods.T
    sv = np.linalg.svd(gram, compute_uv=False)
    ratio = float(sv[-1] / sv[0])
    details = {"kraus_rank": r, "gram_singular_values": sv}
    if ratio > EXTREMAL_PASS:
        return Verdict("extremal", Status.PASS, ratio, EXTREMAL_PASS, details=details)
    if ratio < EXTREMAL_FAIL:
        return Verdict("extremal", Status.FAIL, ratio, EXTREMAL_PASS,
                       {"kraus_rank": r, "gram_ratio": ratio}, details=details)
    return Verdict("extremal", Status.INDETERMINATE, ratio, EXTREMAL_PASS, details=details)


def fibonacci_sphere(n: int) -> np.ndarray:
    """``n`` nearly uniform unit vectors (golden-angle spiral), shape ``(n, 3)``."""
    if n < 1:
        raise InvalidInputError("sphere grid needs at least one point")
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    phi = np.pi * (3 - np.sqrt(5)) * k
    rho = np.sqrt(1 - z * z)
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def plane_increase(delta: np.ndarray, n) -> float:
    """Largest eigenvalue of the quadratic form ``delta`` on the plane orthogonal to ``n``."""
    r = frame_completing(n)
    block = (r.T @ delta @ r)[:2, :2]
    return float(np.linalg.eigvalsh(0.5 * (block + block.T))[-1])


def strong_backflow_certificate(dmap: DynamicalMap, s: float, w: float,
                                basis_grid_size: int = 500, workers: int | None = None) -> Certificate:
    """Certify that no time-independent mixture of elementary maps reproduces ``dmap``.

    Requires ``Lambda_s`` and ``Lambda_w`` to be extreme points (a mixture must
    then use the same channel in every component at those times) and, for
    every basis axis ``n`` on a Fibonacci sphere grid, a pair of states with
    equal diagonals whose distinguishability strictly grows from ``s`` to
    ``w``. That growth is the largest eigenvalue ``D(n)`` of
    ``T(w)^T T(w) - T(s)^T T(s)`` on the plane orthogonal to ``n``.

    Only the two time slices enter, so the same argument covers mixtures
    whose weights vary in time but put full weight on one component at
    ``s`` and ``w``. Nothing is claimed about intermediate times.
    """
    if dmap.dim != 2:
        raise UnsupportedDimensionError("strong certificates are implemented for qubits only")
    if not s < w:
        raise InvalidInputError(f"need s < w, got s={s}, w={w}")
    ext = (is_extremal(dmap.channel(s)), is_extremal(dmap.channel(w)))
    ts, tw = dmap.bloch(s).T, dmap.bloch(w).T
    delta = tw.T @ tw - ts.T @ ts
    dirs = fibonacci_sphere(basis_grid_size)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = np.array(list(pool.map(lambda n: plane_increase(delta, n), dirs)))
    else:
        vals = np.array([plane_increase(delta, n) for n in dirs])
    k = worst_index(-vals)
    margin = float(vals[k])
    kind = "strong" if all(v.passed for v in ext) and margin > STRONG_TOL else "none"
    return Certificate(kind, (float(s), float(w)), margin, dirs[k], ext, grid=dmap.grid,
                       sphere_size=basis_grid_size,
                       details={"tolerance": STRONG_TOL, "direction_index": k})


def weak_backflow_verdict(dmap: DynamicalMap, interval: TimeGrid | None = None) -> Certificate:
    """Weak backflow: BLP fails and the family is not a mixture of generalized classical maps."""
    if dmap.dim != 2:
        raise UnsupportedDimensionError("weak certificates are implemented for qubits only")
    m = dmap if interval is None else dmap.on(interval)
    blp = check_blp(m)
    t0 = refute_type0(m)
    kind = "weak" if blp.failed and t0.failed else "none"
    return Certificate(kind, verdicts={"blp": blp, "type0": t0}, grid=m.grid)


def _generalized_classical_residuals(comp: DynamicalMap, basis: Basis, unitary) -> np.ndarray:
    """Per grid point: worst trace norm of off-diagonal leakage after undoing ``U(t)``."""
    d = comp.dim
    res = np.zeros(comp.grid.n_samples)
    for k, (t, c) in enumerate(zip(comp.grid.times, comp.grid_channels())):
        u = np.asarray(unitary(t), dtype=complex)
        c = c.conjugate_output(u.conj().T)
        worst = 0.0
        for i in range(d):
            for j in range(d):
                e = np.outer(basis.vectors[:, i], basis.vectors[:, j].conj())
                out = basis.to_basis(c.apply(e))
                bad = out - np.diag(np.diag(out)) if i == j else out
                worst = max(worst, float(np.sum(np.linalg.svd(bad, compute_uv=False))))
        res[k] = worst
    return res


def _component_verdict(comp: DynamicalMap, basis: Basis, unitary, claimed: str) -> Verdict:
    if claimed == "strong-none":
        return check_elementary(comp, basis)
    if claimed in ("I", "II"):
        return check_block_diagonal_elementary(comp, basis, unitary, diagonal_only=claimed == "II")
    res = _generalized_classical_residuals(comp, basis, unitary)
    k = worst_index(res)
    slack = float(res[k]) - CONTAINMENT_TOL
    times = comp.grid.times
    if slack > 0:
        return Verdict("generalized-classical", Status.FAIL, slack, 0.0,
                       {"time": float(times[k]), "residual": float(res[k])}, comp.grid,
                       "exact", times, res - CONTAINMENT_TOL)
    return Verdict("generalized-classical", Status.PASS, slack, 0.0, None, comp.grid, "exact",
                   times, res - CONTAINMENT_TOL)


def verify_decomposition(spec: MixtureSpec, interval: TimeGrid | None, claimed_type: str) -> Verdict:
    """Check a claimed decomposition component by component.

    ``claimed_type``:
    ``"strong-none"``, each component elementary in its basis;
    ``"II"``, diagonal elementary; ``"I"``, block-diagonal elementary;
    ``"0"``, generalized classical, meaning ``U(t)^+ Lambda_t(.) U(t)`` maps
    diagonal to diagonal and annihilates off-diagonals.
    Weights in a :class:`MixtureSpec` are constants, so the time-independence
    requirement holds by construction. No search is performed.
    """
    claimed = str(claimed_type)
    if claimed not in DECOMPOSITION_TYPES:
        raise InvalidInputError(f"claimed type must be one of {DECOMPOSITION_TYPES}, got {claimed!r}")
    n = len(spec.components)
    bases = spec.bases
    if bases is None or any(b is None for b in bases):
        raise InvalidInputError("every component needs a basis annotation")
    unitaries = spec.unitaries
    if claimed != "strong-none" and (unitaries is None or any(u is None for u in unitaries)):
        raise InvalidInputError(f"type {claimed} needs a U(t) annotation for every component")
    parts = []
    for i in range(n):
        comp = spec.components[i] if interval is None else spec.components[i].on(interval)
        u = None if unitaries is None else unitaries[i]
        parts.append(_component_verdict(comp, bases[i], u, claimed))
    slacks = np.array([v.margin - v.tolerance for v in parts])
    details = {"claimed_type": claimed, "weights": spec.weights, "components": parts}
    failed = [i for i, v in enumerate(parts) if v.failed]
    grid = interval if interval is not None else spec.components[0].grid
    if failed:
        i = failed[0]
        wp = {"component": i, "name": spec.components[i].name, "witness": parts[i].witness_point}
        return Verdict("decomposition", Status.FAIL, float(np.max(slacks)), 0.0, wp, grid,
                       details=details)
    status = Status.INDETERMINATE if any(v.status is Status.INDETERMINATE for v in parts) else Status.PASS
    return Verdict("decomposition", status, float(np.max(slacks)), 0.0, None, grid, details=details)
