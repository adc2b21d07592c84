import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from stabcert import instances as I
from stabcert.certificates import CATALOG
from stabcert.cli import main
from stabcert.model import instance_to_dict, qp_snapshot
from stabcert.report import analyze, dumps, load_schema

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data"
DATA_FILES = sorted(p for p in DATA.glob("*.json") if p.name != "not_stationary.json")


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def _write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj), encoding="utf-8")
    return p


# -- report contents ---------------------------------------------------------

def test_report_for_2d_saddle():
    rep = analyze(I.saddle_2d(), I.saddle_2d_points()["upper"])
    assert rep["case"] == "BoundaryPositive" and abs(rep["lambda"] - 8) <= 1e-12
    assert abs(rep["qp"]["det_abs"] - 63 / 8) <= 1e-12 * 63 / 8
    assert rep["verdicts"]["lipschitz_like"] == "yes"
    assert rep["verdicts"]["robinson_stable"] == "yes"
    assert rep["d"] == 2 * 4 + 2 * 2 + 1


def test_report_for_3d_circle_point():
    rep = analyze(I.saddle_3d(), I.saddle_3d_circle_point(0.0))
    assert rep["verdicts"]["lipschitz_like"] == "no"
    assert rep["verdicts"]["robinson_stable"] == "unknown"
    assert rep["verdicts"]["coderivative"] is None


@pytest.mark.parametrize("path", DATA_FILES, ids=lambda p: p.stem)
def test_reports_validate_against_schema(path, capsys):
    code, out, _ = _run(capsys, "--input", path)
    assert code == 0
    rep = json.loads(out)
    jsonschema.validate(rep, load_schema())
    for c in rep["conditions"]:
        assert c["condition_id"] in CATALOG


def test_readme_lists_every_condition_id():
    text = (ROOT / "README.md").read_text(encoding="utf-8")
    missing = [cid for cid in CATALOG if f"`{cid}`" not in text]
    assert not missing


def test_seventeen_digit_floats():
    text = dumps({"x": math.sqrt(63) / 8, "y": [0.1], "z": 8.0, "k": 3, "nan": None})
    assert "0.99215674164922152" in text and "0.10000000000000001" in text
    back = json.loads(text)
    assert back["x"] == math.sqrt(63) / 8 and back["y"] == [0.1] and back["z"] == 8


def test_dumps_writes_non_finite_as_null():
    # an infeasible reference point has an infinite residual
    assert json.loads(dumps({"x": math.inf, "y": math.nan})) == {"x": None, "y": None}


# -- analyze command ---------------------------------------------------------

def test_analyze_is_deterministic(capsys, tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    assert _run(capsys, "--input", DATA / "saddle_2d_upper.json", "--out", a)[0] == 0
    assert _run(capsys, "--input", DATA / "saddle_2d_upper.json", "--out", b)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_exit_code_not_stationary(capsys):
    code, out, err = _run(capsys, "--input", DATA / "not_stationary.json")
    assert code == 2
    body = json.loads(out)
    assert body["error"] == "not_stationary" and body["residual"] == pytest.approx(1.0)
    assert "residual" in err


def test_exit_code_mfcq(capsys, tmp_path):
    path = _write(tmp_path, "mfcq.json", {"D": [[1, 0], [0, 1]], "c": [0, 0],
                                          "A": [[1, 0], [0, 1]], "b": [0, 0], "alpha": 0.0,
                                          "x_bar": [0, 0]})
    code, out, _ = _run(capsys, "--input", path)
    assert code == 3 and json.loads(out)["error"] == "mfcq_violated"


def test_exit_code_bad_json(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"D": [[1]],\n  "c": [0,]\n}', encoding="utf-8")
    code, _, err = _run(capsys, "--input", path)
    assert code == 1 and "line 2" in err and "column" in err


def test_exit_code_missing_file_and_dimension(capsys, tmp_path):
    assert _run(capsys, "--input", tmp_path / "nope.json")[0] == 1
    path = _write(tmp_path, "dim.json", {"D": [[1, 0], [0, 1]], "c": [0], "A": [[1, 0], [0, 1]],
                                         "b": [0, 0], "alpha": -1, "x_bar": [0, 0]})
    assert _run(capsys, "--input", path)[0] == 1
    path = _write(tmp_path, "nox.json", {"D": [[1]], "c": [0], "A": [[1]], "b": [0], "alpha": -1})
    assert _run(capsys, "--input", path)[0] == 1


def test_analyze_snapshot_input(capsys, tmp_path):
    s = qp_snapshot(I.saddle_2d(), I.saddle_2d_points()["upper"])
    snap = {k: (getattr(s, k).tolist() if hasattr(getattr(s, k), "tolist") else getattr(s, k))
            for k in ("x_bar", "grad_f0", "hess_xx_f0", "F_value", "grad_x_F", "hess_xx_F",
                      "hess_wx_f0", "grad_w_F", "hess_wx_F")}
    path = _write(tmp_path, "snap.json", {"snapshot": snap, "alpha": -0.5})
    code, out, _ = _run(capsys, "--input", path)
    rep = json.loads(out)
    assert code == 0 and rep["qp"] is None
    assert rep["verdicts"]["lipschitz_like"] == "yes" and rep["verdicts"]["robinson_stable"] == "yes"
    jsonschema.validate(rep, load_schema())


def test_tolerance_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("STABCERT_TOL", "1e-6")
    code, out, _ = _run(capsys, "--input", DATA / "saddle_2d_upper.json")
    assert code == 0 and json.loads(out)["tolerance"]["tol"] == 1e-6
    code, out, _ = _run(capsys, "--input", DATA / "saddle_2d_upper.json", "--tol", "1e-7")
    assert json.loads(out)["tolerance"]["tol"] == 1e-7
    monkeypatch.setenv("STABCERT_TOL", "loose")
    assert _run(capsys, "--input", DATA / "saddle_2d_upper.json")[0] == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "stabcert.cli", "--input",
                           str(DATA / "saddle_3d_pole.json")], capture_output=True, text=True)
    assert proc.returncode == 0
    rep = json.loads(proc.stdout)
    assert rep["lambda"] == 1 and rep["qp"]["det"] == pytest.approx(-49.0)


# -- verify commands ---------------------------------------------------------

def test_verify_robinson_csv(capsys, tmp_path):
    csv_a, csv_b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["--input", DATA / "saddle_2d_upper.json", "--command", "verify-robinson",
            "--samples", 25, "--seed", 3]
    code, out, _ = _run(capsys, *args, "--csv", csv_a)
    assert code == 0
    summary = json.loads(out)
    assert summary["seed"] == 3 and summary["radius_x"] == 1e-2 and summary["radius_w"] == 1e-2
    assert math.isfinite(summary["max_ratio"]) and "divergence_flag" in summary
    assert not summary["best_effort"]
    rows = list(csv.DictReader(io.StringIO(csv_a.read_text())))
    assert any(r["skipped_reason"] == "" for r in rows)
    _run(capsys, *args, "--csv", csv_b)
    assert csv_a.read_bytes() == csv_b.read_bytes()


def test_verify_lipschitz_runs(capsys):
    code, out, _ = _run(capsys, "--input", DATA / "saddle_2d_upper.json", "--command",
                        "verify-lipschitz", "--samples", 10, "--radius-x", 0.05)
    assert code == 0 and json.loads(out)["command"] == "verify-lipschitz"


def test_verify_rejects_zero_samples(capsys):
    code, _, err = _run(capsys, "--input", DATA / "saddle_2d_upper.json", "--command",
                        "verify-robinson", "--samples", 0)
    assert code == 1 and "samples" in err


def test_verify_best_effort_flag(capsys, tmp_path):
    inst = {"D": [[1, 0], [0, 1]], "c": [0, 0], "A": [[1, 0], [0, -1]], "b": [0, 0],
            "alpha": -0.5, "x_bar": [0, 0]}
    path = _write(tmp_path, "indef.json", inst)
    with pytest.warns(UserWarning, match="best-effort"):
        code, out, _ = _run(capsys, "--input", path, "--command", "verify-robinson",
                            "--samples", 3, "--seed", 1)
    assert code == 0 and json.loads(out)["best_effort"] is True


# -- sweep -------------------------------------------------------------------

def _sweep(capsys, *extra):
    code, out, _ = _run(capsys, "--input", DATA / "saddle_2d_upper.json", "--command", "sweep",
                        *extra)
    assert code == 0
    return list(csv.DictReader(io.StringIO(out)))


def test_sweep_tilt_eleven_steps(capsys):
    rows = _sweep(capsys, "--ray", "c:0", "--steps", 11)
    ts = sorted({float(r["t"]) for r in rows})
    assert len(ts) == 11 and ts[0] == 0.0 and ts[-1] == pytest.approx(0.1)
    for t in ts:
        assert any(float(r["t"]) == t and r["x"] for r in rows)


def test_sweep_single_step_matches_analyze(capsys):
    rows = _sweep(capsys, "--steps", 1)
    rep = analyze(I.saddle_2d(), I.saddle_2d_points()["upper"])
    first = rows[0]
    assert float(first["t"]) == 0.0 and float(first["distance_to_x_bar"]) == 0.0
    v = rep["verdicts"]
    assert (first["case"], first["lipschitz_like"], first["robinson_stable"],
            first["strong_regular"]) == (rep["case"], v["lipschitz_like"], v["robinson_stable"],
                                         v["strong_regular"])


def test_sweep_zero_ray_rows_identical(capsys):
    d = 2 * 4 + 2 * 2 + 1
    rows = _sweep(capsys, "--ray", ",".join(["0"] * d), "--steps", 5)
    body = {tuple(v for k, v in r.items() if k != "t") for r in rows}
    per_t = len(rows) // 5
    assert len(rows) == 5 * per_t and len(body) == per_t


@pytest.mark.parametrize("ray", ["q:0", "c:9", "1,2,3"])
def test_sweep_bad_ray(capsys, ray):
    code, _, _ = _run(capsys, "--input", DATA / "saddle_2d_upper.json", "--command", "sweep",
                      "--ray", ray)
    assert code == 1


def test_sweep_family_instance(capsys, tmp_path):
    path = _write(tmp_path, "circle.json", instance_to_dict(I.saddle_3d(),
                                                            I.saddle_3d_circle_point(0.0)))
    code, out, _ = _run(capsys, "--input", path, "--command", "sweep", "--steps", 2)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and rows[0]["lipschitz_like"] == "no"
    x = np.array([float(v) for v in rows[0]["x"].split(";")])
    assert np.allclose(x, I.saddle_3d_circle_point(0.0), atol=1e-12)
