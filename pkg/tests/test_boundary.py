"""Boundary extraction, tilting, and scan tests."""

import numpy as np
import pytest

import stopbound as sb

SCHED = sb.HorizonSchedule(64, 12, 1e-5)
SCHED_COARSE = sb.HorizonSchedule(64, 12, 1e-4)


@pytest.fixture(scope="module")
def chow_curve():
    p = sb.get_preset("chow_robbins")
    return sb.boundary_curve(p, [1.0, 2.0, 3.0, 4.0, 5.0], (0.0, 1.0), 1e-4, SCHED)


@pytest.fixture(scope="module")
def dist_curve():
    p = sb.get_preset("dist_to_integer")
    return sb.boundary_curve(p, [1.0, 2.0, 3.0], (-1.0, 0.0), 1e-5, SCHED)


def test_dist_boundary_constant_minus_half(dist_curve):
    assert np.max(np.abs(dist_curve.bs + 0.5)) < 1e-4


def test_sqrt_boundary_at_sqrt_t():
    p = sb.get_preset("sqrt_threshold")
    curve = sb.boundary_curve(p, [1.0, 4.0, 9.0], (0.0, 1.5), 1e-5, SCHED)
    assert np.allclose(curve.bs, [1.0, 2.0, 3.0], atol=1e-3)


def test_chow_boundary_matches_published_values(chow_curve):
    # t=1,2,3 values 0.46, 0.78, 1.03 (published rounding)
    assert abs(chow_curve.bs[0] - 0.46) <= 0.01
    assert abs(chow_curve.bs[1] - 0.78) <= 0.01
    assert abs(chow_curve.bs[2] - 1.03) <= 0.01


def test_chow_boundary_nondecreasing_with_slowing_growth(chow_curve):
    bs = chow_curve.bs
    assert np.all(np.diff(bs) > -chow_curve.tol_x)
    increments = np.diff(bs)
    assert np.all(np.diff(increments) < chow_curve.tol_x)


def test_three_jump_boundary_nondecreasing():
    p = sb.get_preset("three_jump")
    curve = sb.boundary_curve(p, [2.0, 2.5, 3.0], (0.2, 1.2), 1e-4, SCHED_COARSE)
    assert np.all(np.diff(curve.bs) > -curve.tol_x)


def test_two_sided_threshold_property(chow_curve):
    # the bisection contract: V-g crosses tol_v within tol_x of the returned
    # point, measured with the same locked probe horizon the curve used
    from stopbound.solver import _value_window

    p = sb.get_preset("chow_robbins")
    sched = sb.HorizonSchedule(chow_curve.probe_T_start, 12, 1e-5)

    def phi(t, x):
        vals, _, _, _ = _value_window(
            p, t, x, range(0, 1), sched, "auto", 8.0, True, chow_curve.probe_rungs
        )
        return float(vals[0]) - p.gain.eval(t, x)

    for t, b in zip(chow_curve.ts, chow_curve.bs):
        assert phi(float(t), b - 2 * chow_curve.tol_x) > chow_curve.tol_v
        assert phi(float(t), b + 2 * chow_curve.tol_x) <= chow_curve.tol_v


def test_boundary_at_matches_curve(chow_curve):
    # independent anchor (different locked horizon) so agreement holds only
    # at the transient-band scale, not at tol_x
    p = sb.get_preset("chow_robbins")
    b = sb.boundary_at(p, 2.0, 0.0, 1.5, 1e-4, SCHED)
    assert b == pytest.approx(chow_curve.bs[1], abs=5e-3)


def test_boundary_at_rejects_bad_bracket():
    p = sb.get_preset("chow_robbins")
    with pytest.raises(sb.BracketError):
        sb.boundary_at(p, 1.0, 1.5, 2.0, 1e-4, SCHED_COARSE)  # both stopping


def test_b_at_interpolates_and_ranges(dist_curve):
    assert dist_curve.b_at(1.5) == pytest.approx(-0.5, abs=1e-4)
    assert dist_curve.covers(1.0, 3.0)
    assert not dist_curve.covers(1.0, 5.0)
    with pytest.raises(sb.OutOfRangeError):
        dist_curve.b_at(0.5)


def test_tilt_identity_and_metadata(chow_curve):
    t0 = sb.tilt(chow_curve, 0.0)
    assert np.array_equal(t0.values, chow_curve.bs)
    assert t0.c == 0.0
    t1 = sb.tilt(chow_curve, 0.55)
    assert np.allclose(t1.values, chow_curve.bs - 0.55 * chow_curve.ts)
    assert t1.tol_x == chow_curve.tol_x


def test_scan_constant_curve_empty(dist_curve):
    scan = sb.boundary_kink_scan(dist_curve, 1e-3)
    assert scan.entries == []
    assert "resolution-limited" in scan.label


def test_scan_rejects_below_noise_floor(dist_curve):
    floor = 2 * dist_curve.tol_x / np.min(np.diff(dist_curve.ts))
    with pytest.raises(sb.NoiseFloorError):
        sb.boundary_kink_scan(dist_curve, floor / 2)


def test_scan_finds_synthetic_break():
    ts = np.linspace(0.0, 1.0, 21)
    bs = np.where(ts < 0.5, ts, 0.5 + 2.0 * (ts - 0.5))  # slope 1 -> 2
    curve = sb.BoundaryCurve(ts, bs, tol_x=1e-9, tol_v=1e-9, problem_id="synthetic")
    scan = sb.boundary_kink_scan(curve, 0.5)
    assert len(scan.entries) == 1
    assert scan.entries[0].t == pytest.approx(0.5)
    assert scan.entries[0].gap == pytest.approx(1.0)
    # tilt invariance of slope gaps
    scan_t = sb.boundary_kink_scan(sb.tilt(curve, 0.3), 0.5)
    assert scan_t.entries[0].gap == pytest.approx(1.0)


def test_scan_coarse_chow_curve_no_false_positives(chow_curve):
    # unit-step resolution cannot resolve boundary kinks; a roomy tolerance
    # must flag nothing
    scan = sb.boundary_kink_scan(chow_curve, 0.2)
    assert scan.entries == []


def test_scan_needs_three_points():
    curve = sb.BoundaryCurve([1.0, 2.0], [0.0, 0.1], 1e-6, 1e-6, "x")
    with pytest.raises(ValueError):
        sb.boundary_kink_scan(curve, 1.0)


def test_boundary_csv_formats(tmp_path, dist_curve):
    plain = tmp_path / "b.csv"
    sb.write_boundary_csv(dist_curve, plain)
    lines = plain.read_text().strip().splitlines()
    assert lines[0] == "t,b"
    assert len(lines) == 4

    tilted = tmp_path / "bt.csv"
    sb.write_boundary_csv(dist_curve, tilted, tilt_c=0.0)
    lines = tilted.read_text().strip().splitlines()
    assert lines[0] == "t,b,tilted"
    for row in lines[1:]:
        _, b, tv = row.split(",")
        assert b == tv  # tilt 0 keeps the column equal to b


def test_scan_csv_format(tmp_path):
    ts = np.linspace(0.0, 1.0, 11)
    bs = np.abs(ts - 0.5)
    curve = sb.BoundaryCurve(ts, bs, 1e-9, 1e-9, "v")
    scan = sb.boundary_kink_scan(curve, 0.5)
    out = tmp_path / "scan.csv"
    sb.write_kink_scan_csv(scan, out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "t,left_slope,right_slope,gap"
    assert len(lines) == 2
    t, left, right, gap = map(float, lines[1].split(","))
    assert (t, left, right, gap) == (0.5, -1.0, 1.0, 2.0)
