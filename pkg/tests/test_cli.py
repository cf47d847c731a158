import json
import subprocess
import sys

import numpy as np
import pytest

from convex_billiards import errors, io
from convex_billiards.cli import RunConfig, main

from oracles import A, B, FOCAL_C0


def _domain(tmp_path, name, spec):
    p = tmp_path / f"{name}.json"
    p.write_text(json.dumps(spec))
    return str(p)


@pytest.fixture
def circle_file(tmp_path):
    return _domain(tmp_path, "circle", {"kind": "circle", "R": 1.0})


@pytest.fixture
def ellipse_file(tmp_path):
    return _domain(tmp_path, "ellipse", {"kind": "ellipse", "a": A, "b": B})


def test_orbit_square(circle_file, tmp_path):
    out = tmp_path / "o"
    assert main(["orbit", "--domain", circle_file, "--theta0", str(np.pi / 4),
                 "--n", "8", "--out", str(out)]) == 0
    o = io.read_csv(out / "orbit.csv")
    assert o["n"].size == 8
    assert np.allclose(np.diff(o["s"] + o["lift"] * 2 * np.pi), np.pi / 2, atol=1e-12)
    assert np.allclose(o["x"][:4], o["x"][4:], atol=1e-12)
    assert o["lift"][-1] == 1


def test_orbit_focal(ellipse_file, tmp_path):
    out = tmp_path / "o"
    # leave the right vertex towards the left focus
    theta0 = np.pi - np.arctan2(0.0, 1.0 + FOCAL_C0) - np.pi / 2
    assert main(["orbit", "--domain", ellipse_file, "--theta0", str(theta0 + 0.0),
                 "--n", "6", "--out", str(out)]) == 0
    o = io.read_csv(out / "orbit.csv")
    pts = np.c_[o["x"], o["y"]]
    for k in range(5):
        focus = np.array([-FOCAL_C0, 0.0]) if k % 2 == 0 else np.array([FOCAL_C0, 0.0])
        d, r = pts[k + 1] - pts[k], focus - pts[k]
        assert abs(d[0] * r[1] - d[1] * r[0]) < 1e-8


def test_grazing_exit(circle_file, tmp_path, capsys):
    assert main(["orbit", "--domain", circle_file, "--theta0", "0", "--out",
                 str(tmp_path)]) == 2
    assert "grazing state rejected" in capsys.readouterr().err


def test_analyze_ellipse(ellipse_file, tmp_path):
    out = tmp_path / "a"
    assert main(["analyze", "--domain", ellipse_file, "--grid", "512", "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["schema"] == "billiard-report/1"
    lt = rep["loop_table"]
    assert max(lt[k] for k in ("D1", "D2", "D3", "D4", "D5")) < 1e-6
    assert rep["candidate"]["a"] == pytest.approx(A, abs=1e-6)
    assert rep["candidate"]["b"] == pytest.approx(B, abs=1e-6)
    assert "foliation" in rep["hypotheses"]
    for name in ("loop_table.csv", "loop_table.json", "criterion.csv", "elliptic_graph.csv"):
        assert (out / name).exists()


def test_analyze_circle_reports_candidate_error(circle_file, tmp_path):
    out = tmp_path / "a"
    assert main(["analyze", "--domain", circle_file, "--grid", "256", "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["candidate_error"]["type"] == "FocalSegmentCrossing"


def test_analyze_sweep_failure_exit(tmp_path, capsys):
    d = _domain(tmp_path, "strong", {"kind": "perturbed",
                                     "base": {"kind": "ellipse", "a": A, "b": B},
                                     "terms": [[3, 0.05, 0.0]]})
    assert main(["analyze", "--domain", d, "--grid", "64", "--out", str(tmp_path)]) == 3
    assert "MultipleSolutions" in capsys.readouterr().err


def test_non_convex_exit(tmp_path):
    d = _domain(tmp_path, "bad", {"kind": "perturbed",
                                  "base": {"kind": "ellipse", "a": A, "b": B},
                                  "terms": [[3, 0.2, 0.0]]})
    assert main(["analyze", "--domain", d, "--out", str(tmp_path)]) == 6


def test_aubry_circle_constant_curve(circle_file, tmp_path):
    out = tmp_path / "m"
    assert main(["aubry", "--domain", circle_file, "--grid", "64", "--q", "4",
                 "--dp-grid", "128", "--out", str(out)]) == 0
    m = io.read_csv(out / "M_1_4.csv")
    assert np.ptp(m["M"]) < 1e-8


def test_aubry_alpha_samples(tmp_path):
    d = _domain(tmp_path, "unit", {"kind": "circle", "R": 1 / (2 * np.pi)})
    assert main(["aubry", "--domain", d, "--grid", "256", "--c-range", "-0.1", "0.1", "3",
                 "--out", str(tmp_path)]) == 0
    rows = json.loads((tmp_path / "alpha.json").read_text())["samples"]
    assert len(rows) == 3 and all(r["converged"] for r in rows)
    assert rows[1]["alpha"] == pytest.approx(1 / np.pi, abs=1e-3)


@pytest.mark.slow
def test_aubry_probe_ellipse(ellipse_file, tmp_path):
    assert main(["aubry", "--domain", ellipse_file, "--probe", "4", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "foliation.json").read_text())
    assert rep["verdict"] == "consistent with C0-integrability"


def test_aubry_bad_gcd_and_missing_args(circle_file, tmp_path):
    assert main(["aubry", "--domain", circle_file, "--p", "2", "--q", "4",
                 "--out", str(tmp_path)]) == 2
    assert main(["aubry", "--domain", circle_file, "--out", str(tmp_path)]) == 2
    assert main(["analyze", "--out", str(tmp_path)]) == 2
    assert main(["analyze", "--domain", circle_file, "--grid", "100",
                 "--out", str(tmp_path)]) == 2


def test_interp_check_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["interp-check", "--samples", "50", "--seed", "3", "--out", str(out)]) == 0
    ta, tb = (a / "interp_check.json").read_bytes(), (b / "interp_check.json").read_bytes()
    assert ta == tb
    assert json.loads(ta)["failures"] == 0


def test_analyze_is_byte_identical(ellipse_file, tmp_path):
    for name in ("x", "y"):
        main(["analyze", "--domain", ellipse_file, "--grid", "256", "--out", str(tmp_path / name)])
    assert (tmp_path / "x" / "report.json").read_bytes() == \
        (tmp_path / "y" / "report.json").read_bytes()


def test_run_config_validation(tmp_path):
    with pytest.raises(errors.InvalidInput):
        RunConfig(None, 48, tmp_path, 0)
    with pytest.raises(errors.InvalidInput):
        RunConfig(None, 64, tmp_path, 0, {"alpha": 0.0})


def test_exit_codes_documented():
    classes = [c for c in vars(errors).values()
               if isinstance(c, type) and issubclass(c, errors.BilliardError)]
    codes = {c.__name__: c.exit_code for c in classes}
    assert all(v != 0 for v in codes.values())
    # GrazingState is a refinement of InvalidInput and shares its code
    distinct = {k: v for k, v in codes.items() if k != "GrazingState"}
    assert len(set(distinct.values())) == len(distinct)


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "convex_billiards.cli", "--version"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()
