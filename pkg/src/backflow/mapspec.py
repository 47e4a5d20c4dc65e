"""JSON map specifications: schema validation and construction of dynamical maps."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

import jsonschema
import numpy as np
from scipy.linalg import expm

from .channels import Basis, classical_channel, pauli_channel
from .dynamics import (
    DynamicalMap,
    GKLSGenerator,
    MixtureSpec,
    PolynomialRate,
    classical_example_spec,
    classical_map,
    depolarizing_example,
    depolarizing_map,
    evolve_from_generator,
    extremal_example,
    identity_map,
    identity_unitary,
    mix,
    pauli_example,
    pauli_example_spec,
    pauli_rates_map,
)
from .errors import InvalidInputError
from .numerics import TimeGrid

__all__ = ["MapBundle", "load_schema", "validate_spec", "build_map", "load_map", "parse_basis",
           "DEFAULT_SAMPLES"]

DEFAULT_SAMPLES = 1001


@dataclass
class MapBundle:
    """A built map plus the annotations that some checks need."""

    dmap: DynamicalMap
    spec: dict
    unitary: Callable[[float], np.ndarray] = field(default_factory=identity_unitary)
    decomposition: MixtureSpec | None = None
    bases: list[Basis] = field(default_factory=list)
    strong_times: tuple[float, float] | None = None


def load_schema() -> dict:
    text = resources.files("backflow").joinpath("mapspec.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate_spec(spec: dict) -> None:
    """Raise :class:`InvalidInputError` listing every schema violation with its JSON path."""
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(spec), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            path = "/".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"{path}: {e.message}")
        raise InvalidInputError("map spec violates the schema:\n  " + "\n  ".join(lines))


def parse_basis(value, d: int = 2) -> Basis:
    """``"x"``, ``"y"``, ``"z"``, ``"computational"``, a Bloch axis, or ``"a,b,c"``."""
    if isinstance(value, str):
        key = value.strip().lower()
        if key in ("x", "y", "z"):
            return Basis.pauli("xyz".index(key) + 1)
        if key == "computational":
            return Basis.computational(d)
        try:
            value = [float(v) for v in key.split(",")]
        except ValueError:
            raise InvalidInputError(f"unrecognized basis {value!r}") from None
    axis = np.asarray(value, dtype=float)
    if axis.shape != (3,) or not np.linalg.norm(axis) > 0:
        raise InvalidInputError(f"basis axis must be a nonzero 3-vector, got {value!r}")
    return Basis.from_axis(axis / np.linalg.norm(axis))


def _grid(spec: dict, default: TimeGrid | None = None) -> TimeGrid:
    g = spec.get("grid")
    if g is None:
        if default is None:
            raise InvalidInputError("grid is required")
        return default
    try:
        return TimeGrid(float(g["t_start"]), float(g["t_end"]), int(g.get("n_samples", DEFAULT_SAMPLES)))
    except ValueError as exc:
        raise InvalidInputError(f"grid: {exc}") from None


def _complex_matrix(value) -> np.ndarray:
    if isinstance(value, dict):
        m = np.asarray(value["re"], dtype=float) + 1j * np.asarray(value["im"], dtype=float)
    else:
        m = np.asarray(value, dtype=float).astype(complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {m.shape}")
    return m


def _analytic_piece(desc: dict) -> Callable[[float], float]:
    if "cos" in desc and "poly" in desc:
        raise InvalidInputError("a function piece is either 'poly' or 'cos', not both")
    if "cos" in desc:
        c = desc["cos"]
        off, amp = float(c.get("offset", 0.0)), float(c.get("amplitude", 1.0))
        freq, phase = float(c.get("frequency", 1.0)), float(c.get("phase", 0.0))
        return lambda t: off + amp * math.cos(freq * t + phase)
    if "poly" in desc:
        coef = np.asarray(desc["poly"], dtype=float)
        shift = float(desc.get("shift", 0.0))
        return lambda t: float(np.polynomial.polynomial.polyval(t - shift, coef))
    raise InvalidInputError("function piece needs 'poly' or 'cos'")


def _function(desc, grid: TimeGrid) -> tuple[Callable[[float], float], bool]:
    """Descriptor to ``(f, tabulated)``; tabulated functions exist on grid points only."""
    if isinstance(desc, (int, float)):
        return (lambda t, v=float(desc): v), False
    if isinstance(desc, list):
        vals = np.asarray(desc, dtype=float)
        if len(vals) != grid.n_samples:
            raise InvalidInputError(f"table has {len(vals)} entries for a grid of {grid.n_samples} points")

        def table(t):
            k = grid.index_of(t)
            if k is None:
                raise InvalidInputError(f"tabulated function is undefined off-grid (t={t})")
            return float(vals[k])

        return table, True
    if "pieces" in desc:
        parts = []
        for p in desc["pieces"]:
            on = p.get("on")
            if on is not None and not on[0] <= on[1]:
                raise InvalidInputError(f"piece window {on} is reversed")
            parts.append((on, _analytic_piece({k: v for k, v in p.items() if k != "on"})))

        def piecewise(t):
            return sum(f(t) for on, f in parts if on is None or on[0] <= t <= on[1])

        return piecewise, False
    return _analytic_piece(desc), False


def _polynomial_rate(desc) -> PolynomialRate:
    if isinstance(desc, (int, float)):
        return PolynomialRate([(None, [float(desc)])])
    if "poly" in desc:
        return PolynomialRate([(None, desc["poly"])])
    return PolynomialRate([(p.get("on"), p["poly"]) for p in desc["pieces"]])


def _tabulate(grid: TimeGrid, make: Callable[[float], object], name: str) -> DynamicalMap:
    return DynamicalMap.from_channels([make(float(t)) for t in grid.times], grid, name)


def _build_depolarizing(spec, grid, name):
    lam, tab = _function(spec["lambda"], grid)
    if tab:
        return MapBundle(_tabulate(grid, lambda t: pauli_channel([lam(t)] * 3), name), spec)
    return MapBundle(depolarizing_map(lam, grid, name=name), spec)


def _build_pauli_rates(spec, grid, name):
    rates = [_polynomial_rate(r) for r in spec["rates"]]
    return MapBundle(pauli_rates_map(rates, grid, name=name, params={"rates": [r.to_dict() for r in rates]}),
                     spec)


def _build_bloch_table(spec, grid, name):
    return MapBundle(DynamicalMap.from_bloch_table(spec["r"], spec["T"], grid, name), spec)


def _build_classical(spec, grid, name):
    rows = spec["matrix"]
    d = len(rows)
    if any(len(row) != d for row in rows):
        raise InvalidInputError("classical matrix must be square")
    basis = parse_basis(spec.get("basis", "computational"), d)
    if basis.dim != d:
        raise InvalidInputError(f"basis dimension {basis.dim} does not match matrix size {d}")
    entries = [[_function(x, grid) for x in row] for row in rows]
    tabulated = any(tab for row in entries for _, tab in row)

    def matrix(t):
        return np.array([[f(t) for f, _ in row] for row in entries])

    unitary = identity_unitary(d)
    if spec["kind"] == "gcl":
        h = _complex_matrix(spec["hamiltonian"])
        if h.shape != (d, d) or np.max(np.abs(h - h.conj().T)) > 1e-12:
            raise InvalidInputError("hamiltonian must be a Hermitian matrix matching the basis dimension")
        unitary = lambda t: expm(-1j * h * t)  # noqa: E731
    if tabulated:
        def make(t):
            c = classical_channel(matrix(t), basis)
            return c.conjugate_output(unitary(t)) if spec["kind"] == "gcl" else c

        dmap = _tabulate(grid, make, name)
    else:
        dmap = classical_map(matrix, basis, grid, name,
                             unitary if spec["kind"] == "gcl" else None)
    return MapBundle(dmap, spec, unitary=unitary, bases=[basis])


def _build_gkls(spec, grid, name):
    jumps = [_complex_matrix(j) for j in spec["jumps"]]
    rates = [_function(r, grid)[0] for r in spec["rates"]]
    h = _complex_matrix(spec["hamiltonian"]) if "hamiltonian" in spec else None
    gen = GKLSGenerator(jumps, rates, h)
    return MapBundle(evolve_from_generator(gen, grid, float(spec.get("max_step", 1e-3)), name), spec)


def _build_mixture(spec, grid, name):
    comps = spec["components"]
    if len(comps) != len(spec["weights"]):
        raise InvalidInputError("mixture needs one weight per component")
    bundles = []
    for i, c in enumerate(comps):
        if "grid" in c:
            raise InvalidInputError(f"components/{i}: components inherit the mixture grid")
        if c.get("kind") in ("mixture", "builtin"):
            raise InvalidInputError(f"components/{i}: nested {c.get('kind')} components are not supported")
        validate_spec({**c, "grid": spec["grid"]})
        bundles.append(_dispatch({**c, "grid": spec["grid"]}, grid))
    if "bases" in spec:
        if len(spec["bases"]) != len(comps):
            raise InvalidInputError("bases must have one entry per component")
        bases = [parse_basis(b, bundles[0].dmap.dim) for b in spec["bases"]]
    elif all(b.bases for b in bundles):
        bases = [b.bases[0] for b in bundles]
    else:
        bases = None
    ms = MixtureSpec(spec["weights"], [b.dmap for b in bundles], bases,
                     [b.unitary for b in bundles], name=name)
    return MapBundle(mix(ms), spec, decomposition=ms, bases=list(bases or []))


def _build_builtin(spec, name):
    which = spec["name"]
    eps = spec.get("epsilon")
    if which == "ex1":
        eps = 0.01 if eps is None else float(eps)
        t0 = float(spec.get("t0", 1.0))
        grid = _grid(spec, TimeGrid(0.0, t0 + 2 * math.pi, DEFAULT_SAMPLES))
        comp = spec.get("component", "depolarizing")
        if comp not in ("depolarizing", "mixture"):
            raise InvalidInputError("ex1 component must be 'depolarizing' or 'mixture'")
        decomposition = classical_example_spec(eps, t0, grid)
        dmap = depolarizing_example(eps, t0, grid) if comp == "depolarizing" else mix(decomposition)
        return MapBundle(dmap, spec, decomposition=decomposition, bases=list(decomposition.bases))
    if which == "ex2":
        eps = 0.05 if eps is None else float(eps)
        grid = _grid(spec, TimeGrid(0.0, 3.0, DEFAULT_SAMPLES))
        comp = spec.get("component", "mixture")
        decomposition = pauli_example_spec(eps, grid)
        if comp == "mixture":
            return MapBundle(mix(decomposition), spec, decomposition=decomposition,
                             bases=list(decomposition.bases))
        if comp not in (1, 2, 3):
            raise InvalidInputError("ex2 component must be 'mixture', 1, 2 or 3")
        return MapBundle(pauli_example(comp, eps, grid), spec, bases=[Basis.pauli(comp)])
    if which == "ex3":
        grid = _grid(spec, TimeGrid(1e-3, math.pi / 2, DEFAULT_SAMPLES))
        return MapBundle(extremal_example(grid), spec, strong_times=(math.pi / 6, math.pi / 3))
    grid = _grid(spec, TimeGrid(0.0, 1.0, DEFAULT_SAMPLES))
    return MapBundle(identity_map(grid), spec)


_BUILDERS = {
    "depolarizing": _build_depolarizing,
    "pauli-rates": _build_pauli_rates,
    "bloch-affine-table": _build_bloch_table,
    "classical": _build_classical,
    "gcl": _build_classical,
    "gkls": _build_gkls,
    "mixture": _build_mixture,
}


def _dispatch(spec: dict, grid: TimeGrid) -> MapBundle:
    name = spec.get("name", spec["kind"])
    return _BUILDERS[spec["kind"]](spec, grid, name)


def build_map(spec: dict) -> MapBundle:
    """Validate ``spec`` against the schema and build the map it describes."""
    validate_spec(spec)
    if spec["kind"] == "builtin":
        bundle = _build_builtin(spec, spec["name"])
    else:
        bundle = _dispatch(spec, _grid(spec))
    bundle.dmap.validate()
    return bundle


def load_map(path) -> MapBundle:
    """Read a JSON spec file and build the map; JSON syntax errors report line and column."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(spec, dict):
        raise InvalidInputError(f"{path}: top level must be a JSON object")
    return build_map(spec)
