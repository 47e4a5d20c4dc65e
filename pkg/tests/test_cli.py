import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from backflow import __version__
from backflow import numerics as nx
from backflow.cli import main

GRID = {"t_start": 0.0, "t_end": 2.0, "n_samples": 101}
WAVY = {"kind": "depolarizing", "grid": GRID,
        "lambda": {"cos": {"offset": 0.5, "amplitude": 0.3, "frequency": 3.0}}}


def _write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(p)


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_classify_default_checks(tmp_path, capsys):
    code, out, _ = _run(["classify", "--map", _write(tmp_path, "m.json", WAVY)], capsys)
    assert code == 0
    report = json.loads(out)
    status = {c["name"]: c["status"] for c in report["checks"]}
    assert status == {"blp": "fail", "cpdiv": "fail", "elementary": "fail", "witness": "fail", "weak": "weak"}
    assert report["grid"] == GRID
    assert report["map"]["spec"] == WAVY
    assert "wall_time_s" not in report["checks"][0]


def test_classify_all_checks_on_identity(tmp_path, capsys):
    spec = {"kind": "builtin", "name": "identity", "grid": {"t_start": 0.0, "t_end": 1.0, "n_samples": 21}}
    code, out, _ = _run(["classify", "--map", _write(tmp_path, "m.json", spec), "--checks", "all",
                         "--basis", "z", "--basis", "1,1,0", "--sphere", "50"], capsys)
    assert code == 0
    checks = {c["name"]: c for c in json.loads(out)["checks"]}
    assert set(checks) == {"blp", "cpdiv", "elementary", "block-elementary", "coherence", "witness",
                           "weak", "strong", "decomposition"}
    assert checks["blp"]["status"] == "pass"
    assert checks["witness"]["status"] == "fail"
    assert checks["weak"]["status"] == "none"
    assert checks["strong"]["status"] == "none"
    assert checks["decomposition"]["status"] == "not-applicable"
    assert [p["basis"] for p in checks["elementary"]["per_basis"]] == ["z", "1,1,0"]


def test_classify_interval_and_series(tmp_path, capsys):
    series = tmp_path / "s.csv"
    report_path = tmp_path / "r.json"
    code, _, _ = _run(["classify", "--map", _write(tmp_path, "m.json", WAVY), "--interval", "0.5", "1.5",
                       "--samples", "51", "--out", str(report_path), "--series", str(series)], capsys)
    assert code == 0
    report = json.loads(report_path.read_text())
    assert report["grid"] == {"t_start": 0.5, "t_end": 1.5, "n_samples": 51}
    with open(series, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    assert len(body) == 51
    assert header[0].startswith("t [")
    assert all("[" in h for h in header)
    assert any(h.startswith("X ") for h in header)
    assert float(body[0][0]) == 0.5
    # values are exact reprs, so they round-trip
    lam = [0.5 + 0.3 * math.cos(3 * float(r[0])) for r in body]
    td = [float(r[-1]) for r in body]
    assert np.allclose(td, 2 * np.abs(lam), atol=1e-12)


def test_classify_is_deterministic_across_threads(tmp_path, monkeypatch, capsys):
    path = _write(tmp_path, "m.json", WAVY)
    outs = []
    for threads in ("1", "4"):
        monkeypatch.setenv("BACKFLOW_THREADS", threads)
        code, out, _ = _run(["classify", "--map", path, "--checks", "all", "--sphere", "40"], capsys)
        assert code == 0
        outs.append(out)
    assert outs[0] == outs[1]


def test_timing_is_opt_in(tmp_path, capsys):
    code, out, _ = _run(["--timing", "classify", "--map", _write(tmp_path, "m.json", WAVY),
                         "--checks", "blp"], capsys)
    assert code == 0 and "wall_time_s" in json.loads(out)["checks"][0]


def test_tolerance_flags_are_scoped(tmp_path, capsys):
    before = nx.TOL
    code, out, _ = _run(["--tol-eig", "1e-6", "classify", "--map", _write(tmp_path, "m.json", WAVY),
                         "--checks", "blp"], capsys)
    assert code == 0
    assert json.loads(out)["tolerances"]["eig"] == 1e-6
    assert nx.TOL is before


def test_decomposition_check_on_builtin(tmp_path, capsys):
    spec = {"kind": "builtin", "name": "ex1",
            "grid": {"t_start": 1.0, "t_end": 1.0 + 2 * math.pi, "n_samples": 201}}
    code, out, _ = _run(["classify", "--map", _write(tmp_path, "m.json", spec), "--checks",
                         "decomposition,witness,weak", "--claimed-type", "0"], capsys)
    assert code == 0
    checks = {c["name"]: c for c in json.loads(out)["checks"]}
    assert checks["decomposition"]["status"] == "pass"
    assert checks["decomposition"]["details"]["mixture_max_choi_distance"] < 1e-12
    assert checks["witness"]["status"] == "pass"
    assert checks["weak"]["status"] == "none"


@pytest.mark.parametrize("spec, code", [
    ({"kind": "depolarizing", "grid": GRID, "lambda": 2.0}, 3),
    ({"kind": "depolarizing", "lambda": 0.5}, 2),
    ('{"kind": "depolarizing",\n  "grid": ]', 2),
])
def test_classify_exit_codes(tmp_path, capsys, spec, code):
    got, _, err = _run(["classify", "--map", _write(tmp_path, "m.json", spec)], capsys)
    assert got == code
    assert err.startswith("error:")


def test_missing_file_and_unknown_check(tmp_path, capsys):
    assert _run(["classify", "--map", str(tmp_path / "none.json")], capsys)[0] == 2
    path = _write(tmp_path, "m.json", WAVY)
    code, _, err = _run(["classify", "--map", path, "--checks", "blp,bogus"], capsys)
    assert code == 2 and "bogus" in err


def test_unknown_example_is_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["example", "ex9", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_example_ex3(tmp_path, capsys):
    assert main(["example", "ex3", "--out", str(tmp_path)]) == 0
    assert {p.name for p in tmp_path.iterdir()} == {"map.json", "report.json", "series.csv"}
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["example"]["name"] == "ex3"
    strong = next(c for c in report["checks"] if c["name"] == "strong")
    assert strong["status"] == "strong"
    spec = json.loads((tmp_path / "map.json").read_text())
    assert spec["kind"] == "builtin"
    with open(tmp_path / "series.csv", newline="") as fh:
        assert len(list(csv.reader(fh))) == report["grid"]["n_samples"] + 1


@pytest.mark.slow
def test_example_ex1_and_ex2(tmp_path, capsys):
    assert main(["example", "ex1", "--out", str(tmp_path / "a")]) == 0
    ex1 = json.loads((tmp_path / "a" / "report.json").read_text())["example"]
    assert ex1["lambda_at_t0"] == pytest.approx((2 - 0.01) / 6)
    assert main(["example", "ex2", "--epsilon", "0.05", "--out", str(tmp_path / "b")]) == 0
    ex2 = json.loads((tmp_path / "b" / "report.json").read_text())["example"]
    assert json.dumps(ex2)  # plain JSON, no NaN


def test_witness_from_choi_file(tmp_path, capsys):
    phi = np.array([1, 0, 0, 1]) / math.sqrt(2)
    path = _write(tmp_path, "c.json", {"choi": np.outer(phi, phi).tolist()})
    code, out, _ = _run(["witness", "--choi", path], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["x"] == pytest.approx(3)
    assert rep["type0_refuted"] is True
    assert rep["witness_value"] == pytest.approx(-0.5)


def test_witness_from_bloch_and_map(tmp_path, capsys):
    path = _write(tmp_path, "b.json", {"bloch": {"s": [0, 0, 0], "T": [[0] * 3] * 3}})
    code, out, _ = _run(["witness", "--choi", path], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["x"] == 0 and rep["optimal_witness"] is None
    spec = {"kind": "builtin", "name": "ex3"}
    code, out, _ = _run(["witness", "--map", _write(tmp_path, "m.json", spec), "--time", str(math.pi / 2)],
                        capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["x"] == pytest.approx(2.5)
    assert rep["optimal_witness"]["s_w"] == pytest.approx([0, 0, -1])
    assert rep["witness_value"] == pytest.approx(-0.375)


def test_witness_input_errors(tmp_path, capsys):
    path = _write(tmp_path, "c.json", {"choi": np.eye(9).tolist()})
    assert _run(["witness", "--choi", path], capsys)[0] == 2
    spec = _write(tmp_path, "m.json", WAVY)
    assert _run(["witness", "--map", spec], capsys)[0] == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "backflow", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout
