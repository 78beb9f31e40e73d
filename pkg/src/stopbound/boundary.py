"""Stopping-boundary extraction, tilting, and non-smoothness scanning.

The boundary b(t) is located by bisection on the value gap V(t, x) - g(t, x):
stopping is declared where the gap falls to tol_v (a hard zero test would
misclassify, since V carries heuristic numerical error). Bisection is immune
to the kinks of V - g, unlike gradient methods. Every probe anchors its own
residue lattice, matching the convention that the walk can start anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._util import fmt12
from .errors import BracketError, NoiseFloorError, OutOfRangeError
from .model import ProblemSpec
from .solver import DEFAULT_CLIP_SIGMAS, HorizonSchedule, _value_window

TOL_V_FACTOR = 10.0
TOL_V_FLOOR = 1e-12


@dataclass
class BoundaryCurve:
    """b(t) on a strictly increasing t-grid.

    tol_x is the bisection half-width in x; tol_v the value-gap threshold
    used to declare stopping. Interpolation between grid points is linear.

    The curve is the boundary at the resolution of the locked probe horizon
    (probe_T_start doubled probe_rungs times): within a band of roughly the
    horizon's own value error divided by the local slope of V-g, finite-T
    values still equal the gain, so the extracted points sit that far inside
    the continuation region. Re-probing with a deeper horizon shifts the
    apparent boundary upward by up to that band width.
    """

    ts: np.ndarray
    bs: np.ndarray
    tol_x: float
    tol_v: float
    problem_id: str
    probe_T_start: int | None = None
    probe_rungs: int | None = None

    def __post_init__(self):
        self.ts = np.asarray(self.ts, dtype=np.float64)
        self.bs = np.asarray(self.bs, dtype=np.float64)
        if len(self.ts) < 1 or len(self.ts) != len(self.bs):
            raise ValueError("ts and bs must be equal-length, non-empty")
        if len(self.ts) > 1 and not np.all(np.diff(self.ts) > 0):
            raise ValueError("ts must be strictly increasing")

    @property
    def t_lo(self) -> float:
        return float(self.ts[0])

    @property
    def t_hi(self) -> float:
        return float(self.ts[-1])

    def b_at(self, t: float) -> float:
        """Linearly interpolated boundary position at time t."""
        if t < self.ts[0] - 1e-9 or t > self.ts[-1] + 1e-9:
            raise OutOfRangeError(
                f"t={t} outside boundary grid [{self.ts[0]}, {self.ts[-1]}]"
            )
        return float(np.interp(t, self.ts, self.bs))

    def covers(self, t_lo: float, t_hi: float) -> bool:
        return self.ts[0] <= t_lo + 1e-9 and self.ts[-1] >= t_hi - 1e-9


@dataclass
class TiltedBoundary:
    """Pointwise transform b(t) - c*t of a boundary curve."""

    ts: np.ndarray
    values: np.ndarray
    c: float
    tol_x: float


@dataclass
class KinkScanEntry:
    t: float
    left_slope: float
    right_slope: float

    @property
    def gap(self) -> float:
        return self.right_slope - self.left_slope


@dataclass
class KinkScanResult:
    """Grid points where one-sided secant slopes of the curve disagree.

    Exploratory output: boundary non-smoothness is conjectural and the scan
    is resolution-limited, so entries are evidence, never proof.
    """

    entries: list[KinkScanEntry]
    slope_gap_tol: float
    label: str = "conjectural, resolution-limited"


def _probe_factory(problem, t, schedule, terminal, clip_sigmas, rungs):
    def probe(x: float) -> float:
        vals, _, _, _ = _value_window(
            problem, t, x, range(0, 1), schedule, terminal, clip_sigmas,
            True, rungs,
        )
        return float(vals[0]) - problem.gain.eval(t, x)

    return probe


def _bisect(probe, x_lo, x_hi, tol_x, tol_v, t):
    phi_lo, phi_hi = probe(x_lo), probe(x_hi)
    if not (phi_lo > tol_v and phi_hi <= tol_v):
        raise BracketError(
            f"bracket [{x_lo}, {x_hi}] at t={t} does not straddle the boundary: "
            f"V-g = ({phi_lo:.3e}, {phi_hi:.3e}) vs tol_v={tol_v:.3e}"
        )
    while x_hi - x_lo > tol_x:
        mid = 0.5 * (x_lo + x_hi)
        if probe(mid) > tol_v:
            x_lo = mid
        else:
            x_hi = mid
    return 0.5 * (x_lo + x_hi)


def _expand_bracket(probe, x_lo, x_hi, tol_v, t, rounds=8):
    """Grow an invalid bracket outward until it straddles the boundary."""
    phi_lo, phi_hi = probe(x_lo), probe(x_hi)
    for _ in range(rounds):
        if phi_lo > tol_v and phi_hi <= tol_v:
            return x_lo, x_hi
        width = x_hi - x_lo
        if phi_lo <= tol_v:
            x_lo -= width
            phi_lo = probe(x_lo)
        elif phi_hi > tol_v:
            x_hi += width
            phi_hi = probe(x_hi)
    raise BracketError(
        f"no bracket found around [{x_lo}, {x_hi}] at t={t}: "
        f"V-g = ({phi_lo:.3e}, {phi_hi:.3e}) vs tol_v={tol_v:.3e}"
    )


def _anchor_ladder(problem, t, x, schedule, terminal, clip_sigmas, step_down=0.0):
    """Run the adaptive ladder once to fix the rung count and tol_v.

    With the gain terminal, a ladder anchored inside the stopping region
    converges instantly with a meaningless tiny gap; when step_down is given,
    such anchors walk down until the ladder sees genuine continuation value.
    """
    err, T_used, kind = 0.0, schedule.T_start, "gain"
    for _ in range(9):
        _, err, T_used, kind = _value_window(
            problem, t, x, range(0, 1), schedule, terminal, clip_sigmas, True
        )
        if kind != "gain" or err > 1e-11 or step_down <= 0.0:
            break
        x -= step_down
    rungs = max(1, int(round(math.log2(T_used / schedule.T_start))))
    tol_v = max(TOL_V_FACTOR * err, TOL_V_FLOOR)
    return rungs, tol_v, err


def boundary_at(
    problem: ProblemSpec,
    t: float,
    x_lo: float,
    x_hi: float,
    tol_x: float,
    schedule: HorizonSchedule,
    *,
    terminal="auto",
    clip_sigmas: float | None = DEFAULT_CLIP_SIGMAS,
) -> float:
    """Boundary position at time t by bisection on V - g <= tol_v.

    The bracket must satisfy V-g > tol_v at x_lo and <= tol_v at x_hi, where
    tol_v = 10 * err_est from a convergence ladder run at x_lo. All bisection
    probes reuse that ladder's locked horizon.
    """
    rungs, tol_v, _ = _anchor_ladder(problem, t, x_lo, schedule, terminal, clip_sigmas)
    probe = _probe_factory(problem, t, schedule, terminal, clip_sigmas, rungs)
    return _bisect(probe, x_lo, x_hi, tol_x, tol_v, t)


def boundary_curve(
    problem: ProblemSpec,
    t_grid,
    bracket: tuple[float, float],
    tol_x: float,
    schedule: HorizonSchedule,
    *,
    terminal="auto",
    clip_sigmas: float | None = DEFAULT_CLIP_SIGMAS,
) -> BoundaryCurve:
    """Extract b on a t-grid, warm-starting each bracket from its neighbor.

    The convergence ladder runs once, at the first grid point; all later
    probes lock that horizon and value-gap threshold so the systematic error
    varies smoothly along the curve (jumps in the locked horizon would alias
    into spurious slope breaks during kink scans).
    """
    ts = np.asarray(t_grid, dtype=np.float64)
    if len(ts) < 1 or (len(ts) > 1 and not np.all(np.diff(ts) > 0)):
        raise ValueError("t_grid must be non-empty and strictly increasing")
    x_lo0, x_hi0 = float(bracket[0]), float(bracket[1])

    rungs, tol_v, _ = _anchor_ladder(
        problem, float(ts[0]), x_lo0, schedule, terminal, clip_sigmas,
        step_down=max(x_hi0 - x_lo0, 0.5),
    )

    def solve_first() -> float:
        t0 = float(ts[0])
        probe = _probe_factory(problem, t0, schedule, terminal, clip_sigmas, rungs)
        lo, hi = _expand_bracket(probe, x_lo0, x_hi0, tol_v, t0)
        return _bisect(probe, lo, hi, tol_x, tol_v, t0)

    b_first = solve_first()
    bs = np.empty(len(ts))
    bs[0] = b_first

    base_halfwidth = max(8.0 * tol_x, 0.25 * (x_hi0 - x_lo0) / 8.0, 1e-4)

    def solve_warm(t: float, b_prev: float, halfwidth: float) -> float:
        probe = _probe_factory(problem, t, schedule, terminal, clip_sigmas, rungs)
        for _ in range(8):
            try:
                return _bisect(
                    probe, b_prev - halfwidth, b_prev + halfwidth, tol_x, tol_v, t
                )
            except BracketError:
                halfwidth *= 2.0
        raise BracketError(
            f"could not bracket boundary at t={t} near b={b_prev} "
            f"(final halfwidth {halfwidth})"
        )

    for k in range(1, len(ts)):
        # warm radius follows the curve's own increments, so widely spaced
        # grids at large t do not burn probes on bracket expansion
        radius = base_halfwidth
        if k >= 2:
            radius = max(base_halfwidth, 2.5 * abs(bs[k - 1] - bs[k - 2]))
        bs[k] = solve_warm(float(ts[k]), bs[k - 1], radius)

    return BoundaryCurve(
        ts=ts, bs=bs, tol_x=tol_x, tol_v=tol_v, problem_id=problem.key,
        probe_T_start=schedule.T_start, probe_rungs=rungs,
    )


def coverage_curve(
    problem: ProblemSpec,
    t: float,
    horizon: int,
    schedule: HorizonSchedule | None = None,
    *,
    bracket: tuple[float, float] = (-2.0, 2.0),
    tol_x: float = 1e-3,
    points_per_sqrt_t: float = 2.5,
) -> BoundaryCurve:
    """Boundary curve covering [t, t+horizon] for stopping-rule simulation.

    The grid is uniform in sqrt(t) (the boundary of the bundled problems
    flattens at that rate, balancing interpolation error). The default
    schedule tolerance is chosen so the locked probe horizon is a few
    thousand steps: far smaller and the probes cannot see the boundary at
    the far end of the range at all; the residual shortfall there only
    makes the simulated rule stop marginally early on the rare paths that
    survive that long.
    """
    if schedule is None:
        schedule = HorizonSchedule(T_start=64, max_doublings=12, tol=5e-5)
    s_lo, s_hi = math.sqrt(t), math.sqrt(t + horizon)
    n = max(8, int(points_per_sqrt_t * (s_hi - s_lo)) + 2)
    ts = np.unique(
        np.concatenate([[t], np.linspace(s_lo, s_hi, n) ** 2, [t + horizon]])
    )
    return boundary_curve(problem, ts, bracket, tol_x, schedule)


def tilt(curve: BoundaryCurve, c: float) -> TiltedBoundary:
    """Affine visualization transform t -> b(t) - c*t."""
    return TiltedBoundary(
        ts=curve.ts.copy(),
        values=curve.bs - c * curve.ts,
        c=float(c),
        tol_x=curve.tol_x,
    )


def boundary_kink_scan(curve, slope_gap_tol: float) -> KinkScanResult:
    """Report grid points whose one-sided secant slopes differ by more than
    slope_gap_tol. Accepts a BoundaryCurve or a TiltedBoundary (tilting shifts
    both secants equally, so slope gaps are tilt-invariant).
    """
    ts = np.asarray(curve.ts, dtype=np.float64)
    ys = np.asarray(getattr(curve, "values", getattr(curve, "bs", None)), dtype=np.float64)
    if len(ts) < 3:
        raise ValueError("kink scan needs at least 3 grid points")
    min_gap = float(np.min(np.diff(ts)))
    floor = 2.0 * curve.tol_x / min_gap
    if slope_gap_tol < floor:
        raise NoiseFloorError(
            f"slope_gap_tol {slope_gap_tol:.3e} below noise floor "
            f"2*tol_x/min_dt = {floor:.3e}"
        )
    left = np.diff(ys[:-1]) / np.diff(ts[:-1])
    right = np.diff(ys[1:]) / np.diff(ts[1:])
    entries = [
        KinkScanEntry(float(ts[i + 1]), float(left[i]), float(right[i]))
        for i in range(len(left))
        if abs(right[i] - left[i]) > slope_gap_tol
    ]
    return KinkScanResult(entries=entries, slope_gap_tol=slope_gap_tol)


def write_boundary_csv(
    curve: BoundaryCurve, path: str | Path, tilt_c: float | None = None
) -> None:
    """Boundary CSV: header t,b plus a tilted column when a tilt is requested."""
    if tilt_c is not None:
        lines = ["t,b,tilted"]
        for t, b in zip(curve.ts, curve.bs):
            lines.append(f"{fmt12(t)},{fmt12(b)},{fmt12(b - tilt_c * t)}")
    else:
        lines = ["t,b"]
        for t, b in zip(curve.ts, curve.bs):
            lines.append(f"{fmt12(t)},{fmt12(b)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_kink_scan_csv(result: KinkScanResult, path: str | Path) -> None:
    """Kink-scan CSV: header t,left_slope,right_slope,gap."""
    lines = ["t,left_slope,right_slope,gap"]
    for e in result.entries:
        lines.append(
            f"{fmt12(e.t)},{fmt12(e.left_slope)},{fmt12(e.right_slope)},{fmt12(e.gap)}"
        )
    Path(path).write_text("\n".join(lines) + "\n")
