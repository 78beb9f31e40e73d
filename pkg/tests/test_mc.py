"""Monte Carlo simulation tests: determinism, truncation, consistency."""

import numpy as np
import pytest

import stopbound as sb
from stopbound.mc import _path_generators

SCHED = sb.HorizonSchedule(64, 12, 1e-4)


@pytest.fixture(scope="module")
def dist_curve():
    p = sb.get_preset("dist_to_integer")
    return sb.boundary_curve(
        p, [1.0, 1000.0, 2002.0], (-1.0, 0.0), 1e-4, sb.HorizonSchedule(64, 12, 1e-5)
    )


@pytest.fixture(scope="module")
def chow_cov_curve():
    p = sb.get_preset("chow_robbins")
    return sb.coverage_curve(p, 1.0, 1001, bracket=(0.0, 1.0))


def test_immediate_stop_exact(dist_curve):
    p = sb.get_preset("dist_to_integer")
    r = sb.simulate_value(p, dist_curve, 1.0, -0.3, 1000, 100, seed=7)
    assert r.mean == p.gain.eval(1.0, -0.3)
    assert r.std_error == 0.0
    assert r.n_truncated == 0


def test_determinism_same_seed(dist_curve):
    p = sb.get_preset("dist_to_integer")
    a = sb.simulate_value(p, dist_curve, 1.0, -1.3, 5000, 500, seed=11)
    b = sb.simulate_value(p, dist_curve, 1.0, -1.3, 5000, 500, seed=11)
    assert a == b
    c = sb.simulate_value(p, dist_curve, 1.0, -1.3, 5000, 500, seed=12)
    assert c.n_truncated != a.n_truncated or c.mean != a.mean


def test_path_streams_independent_of_n_paths():
    g1 = _path_generators(99, 5)
    g2 = _path_generators(99, 50)
    for k in range(5):
        assert np.array_equal(g1[k].random(16), g2[k].random(16))


def test_truncation_monotone_in_cap(dist_curve):
    p = sb.get_preset("dist_to_integer")
    counts = [
        sb.simulate_value(p, dist_curve, 1.0, -1.3, 4000, cap, seed=3).n_truncated
        for cap in (50, 200, 800)
    ]
    assert counts[0] >= counts[1] >= counts[2]
    assert counts[0] > 0


def test_dist_upper_truncation_matches_closed_form(dist_curve):
    p = sb.get_preset("dist_to_integer")
    r = sb.simulate_value(
        p, dist_curve, 1.0, -1.3, 20000, 2000, seed=5, truncation="upper"
    )
    assert r.mean == pytest.approx(-0.09, abs=1e-12)
    assert r.std_error == pytest.approx(0.0, abs=1e-12)
    assert r.n_truncated > 0  # the certified bound is doing real work


def test_dist_gain_truncation_biases_down(dist_curve):
    # deep truncated excursions score -x^2, so the plain-gain estimate is
    # far below the true value; this is the documented failure mode that
    # the "upper" mode exists to control
    p = sb.get_preset("dist_to_integer")
    r = sb.simulate_value(p, dist_curve, 1.0, -1.3, 20000, 2000, seed=5)
    assert r.mean < -0.09 - 4 * 0.0  # strictly below
    assert r.mean < -1.0


def test_calibration_dist_upper_100_seeds(dist_curve):
    p = sb.get_preset("dist_to_integer")
    hits = 0
    for seed in range(100):
        r = sb.simulate_value(
            p, dist_curve, 1.0, -1.3, 2000, 500, seed=seed, truncation="upper"
        )
        if abs(r.mean - (-0.09)) <= 4 * r.std_error + 1e-12:
            hits += 1
    assert hits >= 99


def test_chow_consistency_with_solver(chow_cov_curve):
    p = sb.get_preset("chow_robbins")
    ref = sb.value_at(p, 1.0, 0.0, sb.HorizonSchedule(64, 12, 1e-5))
    r = sb.simulate_value(p, chow_cov_curve, 1.0, 0.0, 20000, 1000, seed=17)
    # lower-biased rule: generous downward allowance, tight upward one
    assert r.mean <= ref.value + 4 * r.std_error + 10 * ref.err_est
    assert r.mean >= ref.value - 4 * r.std_error - 0.01


def test_coverage_error(dist_curve):
    p = sb.get_preset("dist_to_integer")
    with pytest.raises(sb.CoverageError):
        sb.simulate_value(p, dist_curve, 1.0, -1.3, 100, 5000, seed=1)


def test_upper_mode_needs_certified_bound(chow_cov_curve):
    p = sb.get_preset("chow_robbins")
    with pytest.raises(sb.DomainError):
        sb.simulate_value(
            p, chow_cov_curve, 1.0, 0.0, 100, 50, seed=1, truncation="upper"
        )


def test_mc_csv_row(tmp_path, dist_curve):
    p = sb.get_preset("dist_to_integer")
    r = sb.simulate_value(p, dist_curve, 1.0, -1.3, 100, 50, seed=2)
    out = tmp_path / "mc.csv"
    sb.write_mc_csv(r, 1.0, -1.3, out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "t,x,mean,std_error,n_paths,n_truncated,seed"
    cells = lines[1].split(",")
    assert cells[0] == "1" and cells[1] == "-1.3"
    assert cells[4] == "100" and cells[6] == "2"
