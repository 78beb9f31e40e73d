"""End-to-end CLI tests via subprocess."""

import json
import subprocess
import sys
from pathlib import Path

import pytest

import stopbound as sb


def run_cli(*args: str) -> subprocess.CompletedProcess:
    cmd = [sys.executable, "-m", "stopbound.cli", *args]
    return subprocess.run(cmd, capture_output=True, text=True)


def test_help():
    cp = run_cli("--help")
    assert cp.returncode == 0
    assert "slice" in cp.stdout and "verify" in cp.stdout


def test_pkg_main_entry():
    cp = subprocess.run(
        [sys.executable, "-m", "stopbound", "--help"], capture_output=True, text=True
    )
    assert cp.returncode == 0


def test_missing_required_flag_exits_2(tmp_path):
    cp = run_cli("slice", "--preset", "dist_to_integer", "--out", str(tmp_path / "x.csv"))
    assert cp.returncode == 2


def test_unknown_preset_exits_2(tmp_path):
    cp = run_cli(
        "slice", "--preset", "nope", "--t", "1", "--x-min=-1", "--x-max", "1",
        "--out", str(tmp_path / "x.csv"),
    )
    assert cp.returncode == 2


def test_slice_csv_and_determinism(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    args = (
        "slice", "--preset", "dist_to_integer", "--t", "1",
        "--x-min=-3/2", "--x-max", "3/2", "--points", "61",
    )
    cp1 = run_cli(*args, "--out", str(out1))
    assert cp1.returncode == 0, cp1.stderr
    cp2 = run_cli(*args, "--out", str(out2))
    assert cp2.returncode == 0
    assert out1.read_bytes() == out2.read_bytes()
    lines = out1.read_text().strip().splitlines()
    assert lines[0] == "x,V,g,err_est"
    assert len(lines) == 62
    x0, v0, g0, _ = lines[1].split(",")
    assert float(x0) == -1.5
    assert float(v0) == pytest.approx(-0.25, abs=1e-9)  # V(-1.5) = -dist^2 = -0.25
    assert float(g0) == pytest.approx(-2.25, abs=1e-12)


def test_slice_accepts_problem_file(tmp_path):
    prob = tmp_path / "prob.json"
    sb.save_problem(sb.get_preset("dist_to_integer"), prob)
    out = tmp_path / "s.csv"
    cp = run_cli(
        "slice", "--problem", str(prob), "--t", "2", "--x-min", "0",
        "--x-max", "1", "--points", "11", "--out", str(out),
    )
    assert cp.returncode == 0, cp.stderr
    assert out.exists()


def test_corrupt_problem_file_exits_2(tmp_path):
    prob = tmp_path / "bad.json"
    prob.write_text('{"jumps": [{"value": "1"}]}')
    cp = run_cli(
        "slice", "--problem", str(prob), "--t", "1", "--x-min", "0",
        "--x-max", "1", "--points", "3", "--out", str(tmp_path / "s.csv"),
    )
    assert cp.returncode == 2
    assert "error" in cp.stderr.lower()


def test_boundary_tilt_zero_column_equals_b(tmp_path):
    out = tmp_path / "b.csv"
    cp = run_cli(
        "boundary", "--preset", "dist_to_integer", "--t-min", "1", "--t-max", "3",
        "--steps", "3", "--x-lo=-1", "--x-hi", "0", "--tilt", "0",
        "--out", str(out),
    )
    assert cp.returncode == 0, cp.stderr
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "t,b,tilted"
    for row in lines[1:]:
        _, b, tilted = row.split(",")
        assert b == tilted
        assert float(b) == pytest.approx(-0.5, abs=1e-3)


def test_kinks_dist_cross_validation(tmp_path):
    out = tmp_path / "k.csv"
    cp = run_cli(
        "kinks", "--preset", "dist_to_integer", "--t", "1",
        "--x-min=-2.6", "--x-max=-0.6", "--dx", "1/50", "--m-max", "2",
        "--b-lo=-1", "--b-hi", "0", "--out", str(out),
    )
    assert cp.returncode == 0, cp.stderr
    assert "2 matched" in cp.stdout
    lines = out.read_text().strip().splitlines()
    rows = [line.split(",") for line in lines[1:]]
    both = [r for r in rows if r[4] == "both"]
    assert sorted(round(float(r[0]), 2) for r in both) == [-2.5, -1.5]
    probs = {round(float(r[0]), 2): float(r[6]) for r in both}
    assert probs[-1.5] == pytest.approx(0.5)
    assert probs[-2.5] == pytest.approx(0.25)


def test_kinks_gap_tol_below_floor_exits_3(tmp_path):
    cp = run_cli(
        "kinks", "--preset", "chow_robbins", "--t", "1",
        "--x-min=-0.62", "--x-max=-0.56", "--dx", "1/50",
        "--gap-tol", "1e-9", "--out", str(tmp_path / "k.csv"),
    )
    assert cp.returncode == 3
    assert "noise floor" in cp.stderr.lower()


def test_simulate_row(tmp_path):
    out = tmp_path / "mc.csv"
    cp = run_cli(
        "simulate", "--preset", "dist_to_integer", "--t", "1", "--x=-1.3",
        "--paths", "2000", "--cap", "200", "--seed", "9",
        "--truncation", "upper", "--out", str(out),
    )
    assert cp.returncode == 0, cp.stderr
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "t,x,mean,std_error,n_paths,n_truncated,seed"
    cells = lines[1].split(",")
    assert float(cells[2]) == pytest.approx(-0.09, abs=1e-9)
    assert cells[6] == "9"


def test_ladder_exhaustion_exits_4(tmp_path):
    cp = run_cli(
        "slice", "--preset", "chow_robbins", "--t", "1", "--x-min=-0.1",
        "--x-max", "0.1", "--points", "3", "--tol", "1e-14",
        "--max-doublings", "2", "--out", str(tmp_path / "s.csv"),
    )
    assert cp.returncode == 4
    assert "non-convergence" in cp.stderr


def test_verify_dist_passes(tmp_path):
    cp = run_cli("verify", "--preset", "dist_to_integer")
    assert cp.returncode == 0, cp.stdout + cp.stderr
    assert "PASS" in cp.stdout
    assert "FAIL" not in cp.stdout


def test_verify_sqrt_passes():
    cp = run_cli("verify", "--preset", "sqrt_threshold")
    assert cp.returncode == 0, cp.stdout + cp.stderr
    assert "FAIL" not in cp.stdout
