"""Command-line interface: ``backflow classify | example | witness``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from . import numerics as nx
from .certify import (
    is_extremal,
    strong_backflow_certificate,
    verify_decomposition,
    weak_backflow_verdict,
)
from .channels import Channel
from .classify import (
    check_blp,
    check_block_diagonal_elementary,
    check_coherence_monotone,
    check_cp_divisible,
    check_elementary,
)
from .dynamics import (
    DynamicalMap,
    classical_example_spec,
    depolarizing_map,
    depolarizing_lambda,
    gamma_a,
    mix,
    pauli_mixture_lambda,
    pauli_threshold_bisect,
    pauli_threshold_closed_form,
    trace_distance_series,
)
from .errors import CPTPError, InvalidInputError, UnsupportedDimensionError
from .mapspec import MapBundle, build_map, load_map, parse_basis
from .numerics import IDENTITY2, PAULI, TimeGrid
from .verdict import Status, Verdict, _jsonable
from .witness import TwoQubitBloch, choi_state, optimal_witness, refute_type0, witness_value, x_functional

CHECKS = ("blp", "cpdiv", "elementary", "block-elementary", "coherence", "witness", "weak", "strong",
          "decomposition")
DEFAULT_CHECKS = ("blp", "cpdiv", "elementary", "witness", "weak")
EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


# -- helpers -----------------------------------------------------------------------------

def _threads() -> int:
    try:
        return max(1, int(os.environ.get("BACKFLOW_THREADS", "1")))
    except ValueError:
        raise InvalidInputError("BACKFLOW_THREADS must be an integer") from None


def restrict(dmap: DynamicalMap, a: float, b: float, samples: int | None = None) -> DynamicalMap:
    """The same family on ``[a, b]``; tabulated maps keep their own grid points."""
    if not a < b:
        raise InvalidInputError(f"interval must satisfy a < b, got [{a}, {b}]")
    if dmap.is_analytic:
        return dmap.on(TimeGrid(a, b, samples or dmap.grid.n_samples))
    times = dmap.grid.times
    slack = 1e-9 * max(1.0, abs(a), abs(b))
    idx = np.flatnonzero((times >= a - slack) & (times <= b + slack))
    if len(idx) < 3:
        raise InvalidInputError(f"fewer than 3 grid points of {dmap.name!r} lie in [{a}, {b}]")
    return dmap.on(TimeGrid(float(times[idx[0]]), float(times[idx[-1]]), len(idx)))


def _merge(name: str, parts: list[tuple[str, Verdict]]) -> dict:
    """One report entry for a check run in several bases."""
    statuses = [v.status for _, v in parts]
    if Status.FAIL in statuses:
        status = Status.FAIL
    elif Status.INDETERMINATE in statuses:
        status = Status.INDETERMINATE
    else:
        status = Status.PASS
    worst = max(parts, key=lambda p: p[1].margin - p[1].tolerance)
    failing = next((p for p in parts if p[1].failed), None)
    return {
        "name": name,
        "status": status.value,
        "margin": worst[1].margin,
        "tolerance": worst[1].tolerance,
        "witness_point": None if failing is None else {"basis": failing[0], **failing[1].witness_point},
        "per_basis": [{"basis": label, **v.to_dict()} for label, v in parts],
    }


def _not_applicable(name: str, reason: str) -> dict:
    return {"name": name, "status": "not-applicable", "reason": reason}


class _Run:
    """Runs requested checks on one map and keeps the verdicts for the series file."""

    def __init__(self, bundle: MapBundle, dmap: DynamicalMap, bases: list[str], claimed_type: str,
                 strong_times: tuple[float, float] | None, sphere: int):
        self.bundle = bundle
        self.dmap = dmap
        self.bases = bases
        self.claimed_type = claimed_type
        self.strong_times = strong_times
        self.sphere = sphere
        self.verdicts: dict[str, list[tuple[str, Verdict]]] = {}

    def _per_basis(self, name, fn):
        parts = [(label, fn(parse_basis(label, self.dmap.dim))) for label in self.bases]
        self.verdicts[name] = parts
        return _merge(name, parts)

    def run(self, name: str) -> dict:
        d = self.dmap
        try:
            if name == "blp":
                v = check_blp(d)
            elif name == "cpdiv":
                v = check_cp_divisible(d)
            elif name == "elementary":
                return self._per_basis(name, lambda b: check_elementary(d, b))
            elif name == "block-elementary":
                return self._per_basis(name, lambda b: check_block_diagonal_elementary(d, b, self.bundle.unitary))
            elif name == "coherence":
                return self._per_basis(name, lambda b: check_coherence_monotone(d, b, self.bundle.unitary))
            elif name == "witness":
                v = refute_type0(d)
            elif name == "weak":
                cert = weak_backflow_verdict(d)
                return {"name": name, "status": cert.kind, **cert.to_dict()}
            elif name == "strong":
                span = d.grid.t_end - d.grid.t_start
                s, w = self.strong_times or (d.grid.t_start + span / 3, d.grid.t_start + 2 * span / 3)
                cert = strong_backflow_certificate(d, s, w, self.sphere)
                return {"name": name, "status": cert.kind, **cert.to_dict()}
            elif name == "decomposition":
                ms = self.bundle.decomposition
                if ms is None:
                    return _not_applicable(name, "map spec carries no mixture decomposition")
                v = verify_decomposition(ms, d.grid, self.claimed_type)
                out = v.to_dict()
                out["details"]["mixture_max_choi_distance"] = _choi_distance(mix(ms).on(d.grid), d)
                return out
            else:
                raise InvalidInputError(f"unknown check {name!r}")
        except UnsupportedDimensionError as exc:
            return _not_applicable(name, str(exc))
        self.verdicts[name] = [("", v)]
        return {**v.to_dict(), "name": name}


def _choi_distance(a: DynamicalMap, b: DynamicalMap) -> float:
    return float(max(np.max(np.abs(x.choi - y.choi)) for x, y in zip(a.grid_channels(), b.grid_channels())))


def run_checks(bundle: MapBundle, dmap: DynamicalMap, checks: list[str], bases: list[str],
               claimed_type: str = "strong-none", strong_times=None, sphere: int = 500,
               timing: bool = False) -> tuple[list[dict], _Run]:
    runner = _Run(bundle, dmap, bases, claimed_type, strong_times, sphere)
    dmap.validate()

    def task(name):
        start = time.perf_counter()
        entry = runner.run(name)
        if timing:
            entry["wall_time_s"] = time.perf_counter() - start
        return entry

    workers = _threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(task, checks))
    else:
        entries = [task(c) for c in checks]
    return entries, runner


def build_report(bundle: MapBundle, dmap: DynamicalMap, entries: list[dict], extra: dict | None = None) -> dict:
    report = {
        "tool": "backflow",
        "version": __version__,
        "map": {"spec": bundle.spec, **dmap.describe()},
        "grid": dmap.grid.to_dict(),
        "tolerances": asdict(nx.TOL),
        "checks": entries,
    }
    if extra:
        report.update(extra)
    return _jsonable(report)


def write_json(obj: dict, path) -> None:
    text = json.dumps(obj, indent=2, allow_nan=False) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def write_series(runner: _Run, path) -> None:
    """CSV with one row per grid point; quantities missing at a point are left empty."""
    dmap = runner.dmap
    times = dmap.grid.times
    n = len(times)
    cols: list[tuple[str, np.ndarray]] = [("t [time units of the map]", times)]
    for name in ("blp", "cpdiv", "elementary", "block-elementary", "coherence"):
        for label, v in runner.verdicts.get(name, []):
            if v.margins is None:
                continue
            vals = np.full(n, np.nan)
            vals[:len(v.margins)] = v.margins
            suffix = f"[{label}]" if label else ""
            cols.append((f"{name}_margin{suffix} [dimensionless]", vals))
    if dmap.dim == 2:
        xs = np.array([x_functional(choi_state(c)) for c in dmap.grid_channels()])
        cols.append(("X [dimensionless]", xs))
        direction = np.array([0.0, 0.0, 1.0])
        blp = runner.verdicts.get("blp")
        if blp and blp[0][1].failed:
            direction = np.asarray(blp[0][1].witness_point["direction"], dtype=float)
        op = sum(direction[i] * PAULI[i] for i in range(3))
        rho1, rho2 = (IDENTITY2 + op) / 2, (IDENTITY2 - op) / 2
        label = ",".join(f"{x:.6g}" for x in direction)
        cols.append((f"trace_distance[{label}] [dimensionless]", trace_distance_series(dmap, rho1, rho2)))
    else:
        e = np.eye(dmap.dim)
        cols.append(("trace_distance[0,1] [dimensionless]",
                     trace_distance_series(dmap, np.outer(e[0], e[0]), np.outer(e[1], e[1]))))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([c for c, _ in cols])
        for k in range(n):
            writer.writerow(["" if not np.isfinite(v[k]) else repr(float(v[k])) for _, v in cols])


# -- subcommands ---------------------------------------------------------------------------

def _parse_checks(text: str) -> list[str]:
    if text == "all":
        return list(CHECKS)
    items = [c.strip() for c in text.split(",") if c.strip()]
    unknown = [c for c in items if c not in CHECKS]
    if unknown:
        raise InvalidInputError(f"unknown checks {unknown}; choose from {', '.join(CHECKS)} or 'all'")
    seen = []
    for c in items:
        if c not in seen:
            seen.append(c)
    return seen


def _default_bases(bundle: MapBundle) -> list[str]:
    if bundle.dmap.dim != 2:
        return ["computational"]
    return ["z"]


def cmd_classify(args) -> int:
    bundle = load_map(args.map)
    dmap = bundle.dmap
    if args.interval:
        dmap = restrict(dmap, args.interval[0], args.interval[1], args.samples)
    elif args.samples and dmap.is_analytic:
        dmap = dmap.on(TimeGrid(dmap.grid.t_start, dmap.grid.t_end, args.samples))
    checks = _parse_checks(args.checks)
    bases = args.basis or _default_bases(bundle)
    strong = tuple(args.strong_times) if args.strong_times else bundle.strong_times
    entries, runner = run_checks(bundle, dmap, checks, bases, args.claimed_type, strong,
                                 args.sphere, args.timing)
    write_json(build_report(bundle, dmap, entries), args.out)
    if args.series:
        write_series(runner, args.series)
    return EXIT_OK


def _example_ex1(eps: float, t0: float, timing: bool) -> tuple[dict, MapBundle, DynamicalMap, list, _Run, dict]:
    spec = {"kind": "builtin", "name": "ex1", "epsilon": eps, "t0": t0,
            "grid": {"t_start": 0.0, "t_end": t0 + 2 * math.pi, "n_samples": 1001}}
    bundle = build_map(spec)
    dmap = bundle.dmap
    entries, runner = run_checks(bundle, dmap, ["blp", "cpdiv", "witness", "weak"], ["z"], timing=timing)
    late = TimeGrid(t0, t0 + 2 * math.pi, 1001)
    ms = classical_example_spec(eps, t0, late)
    target = depolarizing_map(lambda t: 1 / 6 + (1 - eps) / 6 * math.cos(t - t0), late)
    regimes = {
        "cpdiv_before_t0": check_cp_divisible(restrict(dmap, 0.0, t0 - t0 / 800, 800)).to_dict(),
        "blp_late": check_blp(restrict(dmap, t0 + math.pi + 0.1, t0 + 2 * math.pi)).to_dict(),
        "blp_early": check_blp(restrict(dmap, 0.0, t0 + math.pi - 0.1)).to_dict(),
    }
    statements = {
        "mixture_max_choi_distance": _choi_distance(mix(ms), target),
        "decomposition_type0": verify_decomposition(ms, late, "0").to_dict(),
        "regimes": regimes,
        "lambda_at_t0": depolarizing_lambda(t0, eps, t0),
        "weak_after_t0": weak_backflow_verdict(dmap.on(late)).to_dict(),
    }
    return spec, bundle, dmap, entries, runner, statements


def _example_ex2(eps: float, timing: bool):
    spec = {"kind": "builtin", "name": "ex2", "epsilon": eps,
            "grid": {"t_start": 0.0, "t_end": 3.0, "n_samples": 1001}}
    bundle = build_map(spec)
    dmap = bundle.dmap
    entries, runner = run_checks(bundle, dmap, ["blp", "elementary", "decomposition"], ["x", "y", "z"],
                                 timing=timing)
    ga = gamma_a()
    lam1, lam2 = pauli_mixture_lambda(1.0, eps), pauli_mixture_lambda(2.0, eps)
    comps = {}
    for k, (comp, basis) in enumerate(zip(bundle.decomposition.components, bundle.decomposition.bases), 1):
        comps[f"component_{k}"] = {"elementary": check_elementary(comp, basis).to_dict(),
                                   "blp": check_blp(comp).to_dict()}
    statements = {
        "lambda_1": lam1,
        "lambda_2": lam2,
        "lambda_1_less_than_lambda_2": lam1 < lam2,
        "threshold_closed_form": pauli_threshold_closed_form(),
        "threshold_bisection": pauli_threshold_bisect(),
        "Gamma_a_1": ga.integral(1.0),
        "Gamma_a_2": ga.integral(2.0),
        "components": comps,
    }
    return spec, bundle, dmap, entries, runner, statements


def _example_ex3(timing: bool):
    spec = {"kind": "builtin", "name": "ex3", "grid": {"t_start": 1e-3, "t_end": math.pi / 2, "n_samples": 1001}}
    bundle = build_map(spec)
    dmap = bundle.dmap
    entries, runner = run_checks(bundle, dmap, ["blp", "witness", "strong"], ["z"],
                                 strong_times=bundle.strong_times, timing=timing)
    inner = restrict(dmap, 0.1, math.pi / 2 - 0.1)
    xs = np.array([x_functional(choi_state(c)) for c in dmap.grid_channels()])
    closed = 2 + np.sin(dmap.grid.times) / 2
    statements = {
        "weak_on_inner_interval": weak_backflow_verdict(inner).to_dict(),
        "x_curve_max_deviation": float(np.max(np.abs(xs - closed))),
        "extremality": {f"{t:.6f}": is_extremal(dmap.channel(t)).to_dict()
                        for t in (math.pi / 6, math.pi / 4, math.pi / 3)},
    }
    return spec, bundle, dmap, entries, runner, statements


def cmd_example(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.name == "ex1":
        eps = 0.01 if args.epsilon is None else args.epsilon
        t0 = 1.0 if args.t0 is None else args.t0
        result = _example_ex1(eps, t0, args.timing)
    elif args.name == "ex2":
        result = _example_ex2(0.05 if args.epsilon is None else args.epsilon, args.timing)
    else:
        result = _example_ex3(args.timing)
    spec, bundle, dmap, entries, runner, statements = result
    write_json(_jsonable(spec), out / "map.json")
    write_json(build_report(bundle, dmap, entries, {"example": {"name": args.name, **statements}}),
               out / "report.json")
    write_series(runner, out / "series.csv")
    return EXIT_OK


def _read_json(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _choi_from_file(path) -> TwoQubitBloch:
    data = _read_json(path)
    if "bloch" in data:
        b = data["bloch"]
        return TwoQubitBloch(b.get("r", [0, 0, 0]), b["s"], b["T"])
    if "choi" not in data:
        raise InvalidInputError(f"{path}: expected a 'choi' matrix or 'bloch' data")
    m = data["choi"]
    rho = (np.asarray(m["re"], dtype=float) + 1j * np.asarray(m["im"], dtype=float)
           if isinstance(m, dict) else np.asarray(m, dtype=float))
    if rho.shape != (4, 4):
        raise UnsupportedDimensionError(f"{path}: witness analysis needs a 4x4 two-qubit state, got {rho.shape}")
    return TwoQubitBloch.from_density(rho)


def cmd_witness(args) -> int:
    if args.choi:
        rho = _choi_from_file(args.choi)
        source = {"choi": str(args.choi)}
    else:
        if args.time is None:
            raise InvalidInputError("--map needs --time")
        bundle = load_map(args.map)
        if bundle.dmap.dim != 2:
            raise UnsupportedDimensionError("witness analysis is defined for qubit maps only")
        c: Channel = bundle.dmap.channel(args.time)
        rho = choi_state(c)
        source = {"map": bundle.spec, "time": args.time}
    x = x_functional(rho)
    report = {"tool": "backflow", "version": __version__, "source": source, "state": rho.to_dict(),
              "x": x, "type0_refuted": x > 1 + 1e-9}
    if np.linalg.norm(rho.s) < 1e-12 and np.max(np.abs(rho.T)) < 1e-12:
        report["optimal_witness"] = None
        report["witness_value"] = None
    else:
        w = optimal_witness(rho)
        report["optimal_witness"] = w.to_dict()
        report["witness_value"] = witness_value(w, rho)
    write_json(_jsonable(report), args.out)
    return EXIT_OK


# -- entry point -----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="backflow", description="Memory and backflow diagnostics for quantum dynamical maps.")
    p.add_argument("--version", action="version", version=f"backflow {__version__}")
    p.add_argument("--tol-eig", type=float, help="relative tolerance for derivative eigenvalue tests")
    p.add_argument("--tol-cptp", type=float, help="tolerance for Choi positivity and trace preservation")
    p.add_argument("--timing", action="store_true", help="record wall time per check (reports stop being byte-identical)")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", help="run checks on a map specification")
    c.add_argument("--map", required=True, help="map spec JSON file")
    c.add_argument("--checks", default=",".join(DEFAULT_CHECKS),
                   help=f"comma-separated subset of {', '.join(CHECKS)}, or 'all'")
    c.add_argument("--basis", action="append", help="x, y, z, computational or an axis 'a,b,c' (repeatable)")
    c.add_argument("--interval", nargs=2, type=float, metavar=("A", "B"))
    c.add_argument("--samples", type=int, help="grid points for analytic maps")
    c.add_argument("--claimed-type", default="strong-none", choices=["0", "I", "II", "strong-none"])
    c.add_argument("--strong-times", nargs=2, type=float, metavar=("S", "W"))
    c.add_argument("--sphere", type=int, default=500, help="directions on the basis sphere for the strong check")
    c.add_argument("--out", default="-", help="report path ('-' for stdout)")
    c.add_argument("--series", help="CSV time-series output path")
    c.set_defaults(func=cmd_classify)

    e = sub.add_parser("example", help="reproduce a built-in example")
    e.add_argument("name", choices=["ex1", "ex2", "ex3"])
    e.add_argument("--epsilon", type=float)
    e.add_argument("--t0", type=float)
    e.add_argument("--out", required=True, help="output directory")
    e.set_defaults(func=cmd_example)

    w = sub.add_parser("witness", help="X functional and optimal witness of a Choi state")
    src = w.add_mutually_exclusive_group(required=True)
    src.add_argument("--choi", help="JSON file with a 4x4 'choi' matrix or 'bloch' data")
    src.add_argument("--map", help="map spec JSON file (with --time)")
    w.add_argument("--time", type=float)
    w.add_argument("--out", default="-")
    w.set_defaults(func=cmd_witness)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in (("eig", args.tol_eig), ("cptp", args.tol_cptp)) if v is not None}
    previous = nx.TOL
    try:
        if overrides:
            nx.configure(**overrides)
        return args.func(args)
    except CPTPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    finally:
        nx.TOL = previous


if __name__ == "__main__":
    sys.exit(main())
