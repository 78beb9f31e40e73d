"""Command-line interface: slice, boundary, kinks, verify, simulate.

Writes CSV artifacts reproducing the figure data of the four bundled
presets. All numeric flags accept decimal or rational 'p/q' notation.
Exit codes: 0 success, 2 usage or configuration error, 3 numerical
tolerance error, 4 non-convergence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import boundary as bnd
from . import kinks as knk
from . import mc as mcmod
from .errors import (
    BoundaryCoverageError,
    BracketError,
    DomainError,
    DuplicateAtomError,
    InvalidAtomError,
    NoConvergenceError,
    NoiseFloorError,
    OutOfRangeError,
    ProbSumError,
    RangeError,
    SignError,
)
from .model import ProblemSpec, get_preset, load_problem, parse_rational, preset_names
from .solver import HorizonSchedule, bellman_residual, value_at, value_slice, write_slice_csv

USAGE_EXIT = 2
TOLERANCE_EXIT = 3
NONCONVERGENCE_EXIT = 4


def _rational(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r} ({exc})")


def _num(text: str) -> float:
    return float(_rational(text))


def _resolve_problem(args) -> ProblemSpec:
    if args.problem is not None:
        return load_problem(args.problem)
    return get_preset(args.preset)


def _schedule(args) -> HorizonSchedule:
    return HorizonSchedule(
        T_start=args.horizon_start, max_doublings=args.max_doublings, tol=args.tol
    )


def _add_common(sub: argparse.ArgumentParser) -> None:
    src = sub.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=preset_names(), help="bundled problem")
    src.add_argument("--problem", type=Path, help="problem specification JSON file")
    sub.add_argument("--out", type=Path, required=True, help="output CSV path")
    sub.add_argument("--tol", type=_num, default=1e-5, help="doubling tolerance")
    sub.add_argument("--horizon-start", type=int, default=64)
    sub.add_argument("--max-doublings", type=int, default=12)
    sub.add_argument("--seed", type=int, default=20240901)


def _boundary_grid(problem, t_lo, t_hi, steps, bracket, schedule):
    ts = np.linspace(t_lo, t_hi, steps)
    return bnd.boundary_curve(problem, ts, bracket, 1e-4, schedule)


def cmd_slice(args) -> int:
    problem = _resolve_problem(args)
    sl = value_slice(
        problem, float(args.t), args.x_min, args.x_max, args.points, _schedule(args)
    )
    write_slice_csv(sl, args.out)
    print(f"wrote {args.out} ({args.points} points, err_est={sl.err_est:.3e})")
    return 0


def cmd_boundary(args) -> int:
    problem = _resolve_problem(args)
    schedule = _schedule(args)
    if args.steps < 1:
        raise ValueError("--steps must be >= 1")
    curve = _boundary_grid(
        problem, float(args.t_min), float(args.t_max), args.steps,
        (float(args.x_lo), float(args.x_hi)), schedule,
    )
    tilt_c = float(args.tilt) if args.tilt is not None else None
    bnd.write_boundary_csv(curve, args.out, tilt_c)
    print(f"wrote {args.out} ({args.steps} points, tol_v={curve.tol_v:.3e})")
    if args.scan_out is not None:
        target = bnd.tilt(curve, tilt_c) if tilt_c is not None else curve
        scan = bnd.boundary_kink_scan(target, args.slope_gap_tol)
        bnd.write_kink_scan_csv(scan, args.scan_out)
        print(
            f"wrote {args.scan_out} ({len(scan.entries)} slope breaks; "
            f"{scan.label})"
        )
    return 0


def cmd_kinks(args) -> int:
    problem = _resolve_problem(args)
    schedule = _schedule(args)
    t = float(args.t)
    x_lo, x_hi = float(args.x_min), float(args.x_max)

    n_points = int(round((x_hi - x_lo) / float(args.dx))) + 1
    sl = value_slice(problem, t, args.x_min, args.x_max, n_points, schedule)
    gap_tol = args.gap_tol
    if gap_tol is None:
        gap_tol = 2.0 * knk.DETECT_FLOOR_FACTOR * sl.err_est / sl.dx
    detected = knk.detect_kinks(sl, gap_tol)

    curve = bnd.boundary_curve(
        problem,
        np.asarray([t + m for m in range(args.m_max + 1)], dtype=float),
        (float(args.b_lo), float(args.b_hi)),
        1e-4,
        schedule,
    )
    predicted = knk.predict_kinks(problem, curve, t, (x_lo, x_hi), args.m_max)

    def gap_scale(kp: knk.KinkPoint) -> float:
        fit = knk.smooth_fit_check(problem, curve, t + kp.m, schedule)
        return max(fit.gap, 0.0)

    match_tol = args.match_tol if args.match_tol is not None else 2.0 * sl.dx
    report = knk.cross_validate(
        predicted, detected, match_tol, floor=gap_tol, gap_scale=gap_scale
    )
    knk.write_kinks_csv(report.merged, args.out)
    print(
        f"wrote {args.out}: {len(detected)} detected, {len(predicted)} predicted, "
        f"{len(report.matched)} matched, {len(report.below_floor)} below floor, "
        f"{len(report.unmatched)} unmatched"
    )
    if report.unmatched:
        for kp in report.unmatched:
            print(f"unmatched prediction at x={kp.x:.6f} (m={kp.m})", file=sys.stderr)
        return TOLERANCE_EXIT
    return 0


def cmd_simulate(args) -> int:
    problem = _resolve_problem(args)
    schedule = _schedule(args)
    curve = bnd.coverage_curve(problem, float(args.t), args.cap)
    result = mcmod.simulate_value(
        problem,
        curve,
        float(args.t),
        float(args.x),
        args.paths,
        args.cap,
        args.seed,
        truncation=args.truncation,
    )
    mcmod.write_mc_csv(result, float(args.t), float(args.x), args.out)
    print(
        f"wrote {args.out}: mean={result.mean:.6g} +- {result.std_error:.2g} "
        f"({result.n_truncated} truncated)"
    )
    return 0


def _verify_rows(problem: ProblemSpec, t: float, schedule, seed: int):
    """Preset-aware property checks; yields (name, measured, requirement, ok)."""
    rows = []

    def add(name, measured, requirement, ok):
        rows.append((name, measured, requirement, bool(ok)))

    gain = problem.gain.family
    if gain == "dist_to_integer":
        sl = value_slice(problem, t, -2, 2, 161, schedule)
        xs = sl.xs
        d = np.minimum(np.ceil(xs) - xs, xs - np.floor(xs))
        worst = float(np.max(np.abs(sl.values - (-d * d))))
        add("closed-form slice max error", f"{worst:.2e}", "<= 1e-6", worst <= 1e-6)
        curve = bnd.boundary_curve(
            problem, np.asarray([t, t + 1]), (-1.0, 0.0), 1e-5, schedule
        )
        b = curve.bs[0]
        add("boundary at -1/2", f"{b:.6f}", "|b+0.5| <= 1e-3", abs(b + 0.5) <= 1e-3)
        cov = bnd.coverage_curve(problem, t, 2000)
        mc = mcmod.simulate_value(
            problem, cov, t, -1.3, 20000, 2000, seed, truncation="upper"
        )
        err = abs(mc.mean - (-0.09))
        tol = 4 * mc.std_error + 1e-3
        add("MC vs closed form at x=-1.3", f"{err:.2e}", f"<= {tol:.2e}", err <= tol)
    elif gain == "sqrt_threshold":
        lo, hi = math.sqrt(t) - 2.0, math.sqrt(t) + 0.9
        sl = value_slice(problem, t, Fraction(lo).limit_denominator(10**6),
                         Fraction(hi).limit_denominator(10**6), 121, schedule)
        worst = float(np.max(np.abs(sl.values)))
        add("V identically zero", f"{worst:.2e}", "<= 1e-9", worst <= 1e-9)
        kinks = knk.detect_kinks(sl, max(1e-6, 8 * sl.err_est / sl.dx))
        add("detected kinks", str(len(kinks)), "empty", len(kinks) == 0)
        curve = bnd.boundary_curve(
            problem, np.asarray([t, t + 1]),
            (math.sqrt(t) - 1.0, math.sqrt(t) + 0.5), 1e-5, schedule,
        )
        b = curve.bs[0]
        add(
            "boundary at sqrt(t)", f"{b:.6f}",
            f"|b-{math.sqrt(t):.4f}| <= 1e-3", abs(b - math.sqrt(t)) <= 1e-3,
        )
        fit = knk.smooth_fit_check(problem, curve, t, schedule)
        add("smooth-fit gap", f"{fit.gap:.2e}", "|gap| <= 0.01", abs(fit.gap) <= 0.01)
    else:
        # chow_robbins-type gain (x/t): smooth fit must fail by ~1/t - 1/(t+1)
        curve = bnd.boundary_curve(
            problem, np.asarray([t, t + 1, t + 2]), (-1.0, 2.0), 1e-4, schedule
        )
        fit = knk.smooth_fit_check(problem, curve, t, schedule)
        gap_floor = 1.0 / t - 1.0 / (t + 1.0) - 0.04
        add(
            "smooth-fit gap", f"{fit.gap:.4f}",
            f">= {gap_floor:.4f}", fit.gap >= gap_floor,
        )
        add(
            "right slope = g'(t,b)", f"{fit.right_slope:.4f}",
            f"|.-{1/t:.4f}| <= 0.03", abs(fit.right_slope - 1.0 / t) <= 0.03,
        )
        b = curve.bs[0]
        hwin = float(problem.jumps.h)
        sl = value_slice(
            problem, t,
            Fraction(b - 2.0).limit_denominator(10**6),
            Fraction(b + float(problem.jumps.xi_star)).limit_denominator(10**6),
            81, schedule,
        )
        rep = knk.convexity_check(problem, sl, curve, eps_window=hwin)
        add(
            "convexity violations", f"{rep.max_violation:.2e}",
            f"<= {4 * rep.err_est:.2e}", rep.passed,
        )
        res, err = bellman_residual(problem, t, b - 1.0, schedule)
        add(
            "Bellman residual", f"{res:.2e}", f"<= {2 * err:.2e}", res <= 2 * err
        )
        cov = bnd.coverage_curve(problem, t, 2000)
        mc = mcmod.simulate_value(problem, cov, t, 0.0, 20000, 2000, seed)
        ref = value_at(problem, t, 0.0, schedule)
        err_mc = mc.mean - ref.value
        lo_tol = -(4 * mc.std_error + 0.01)
        hi_tol = 4 * mc.std_error + 10 * ref.err_est
        add(
            "MC vs solver at x=0", f"{err_mc:+.2e}",
            f"in [{lo_tol:.2e}, {hi_tol:.2e}]", lo_tol <= err_mc <= hi_tol,
        )
    return rows


def cmd_verify(args) -> int:
    problem = _resolve_problem(args)
    schedule = _schedule(args)
    t = float(args.t) if args.t is not None else 1.0
    rows = _verify_rows(problem, t, schedule, args.seed)
    width = max(len(r[0]) for r in rows)
    all_ok = True
    for name, measured, requirement, ok in rows:
        status = "PASS" if ok else "FAIL"
        print(f"{name:<{width}}  {measured:>12}  {requirement:<22}  {status}")
        all_ok &= ok
    return 0 if all_ok else TOLERANCE_EXIT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stopbound",
        description="Optimal stopping of random walks: values, boundaries, kinks.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("slice", help="sample V(t, .) on an x-grid to CSV")
    _add_common(p)
    p.add_argument("--t", type=_num, required=True)
    p.add_argument("--x-min", type=_rational, required=True)
    p.add_argument("--x-max", type=_rational, required=True)
    p.add_argument("--points", type=int, default=251)
    p.set_defaults(func=cmd_slice)

    p = subs.add_parser("boundary", help="extract b(t) on a t-grid to CSV")
    _add_common(p)
    p.add_argument("--t-min", type=_num, required=True)
    p.add_argument("--t-max", type=_num, required=True)
    p.add_argument("--steps", type=int, default=50, help="number of grid points")
    p.add_argument("--x-lo", type=_num, default=-2.0, help="bracket hint, low side")
    p.add_argument("--x-hi", type=_num, default=2.0, help="bracket hint, high side")
    p.add_argument("--tilt", type=_num, default=None, help="write b(t) - c*t column")
    p.add_argument("--scan-out", type=Path, default=None, help="slope-break CSV")
    p.add_argument("--slope-gap-tol", type=_num, default=1e-3)
    p.set_defaults(func=cmd_boundary)

    p = subs.add_parser("kinks", help="detect and predict kinks of V(t, .)")
    _add_common(p)
    p.add_argument("--t", type=_num, required=True)
    p.add_argument("--x-min", type=_rational, required=True)
    p.add_argument("--x-max", type=_rational, required=True)
    p.add_argument("--dx", type=_rational, default=Fraction(1, 100))
    p.add_argument("--m-max", type=int, default=2)
    p.add_argument("--gap-tol", type=_num, default=None)
    p.add_argument("--match-tol", type=_num, default=None)
    p.add_argument("--b-lo", type=_num, default=-2.0)
    p.add_argument("--b-hi", type=_num, default=2.0)
    p.set_defaults(func=cmd_kinks)

    p = subs.add_parser("verify", help="run the preset property suite")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=preset_names())
    src.add_argument("--problem", type=Path)
    p.add_argument("--t", type=_num, default=None)
    p.add_argument("--tol", type=_num, default=1e-5)
    p.add_argument("--horizon-start", type=int, default=64)
    p.add_argument("--max-doublings", type=int, default=12)
    p.add_argument("--seed", type=int, default=20240901)
    p.set_defaults(func=cmd_verify)

    p = subs.add_parser("simulate", help="Monte Carlo value under the boundary rule")
    _add_common(p)
    p.add_argument("--t", type=_num, required=True)
    p.add_argument("--x", type=_num, required=True)
    p.add_argument("--paths", type=int, default=100000)
    p.add_argument("--cap", type=int, default=2000)
    p.add_argument("--truncation", choices=("gain", "upper"), default="gain")
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        ProbSumError, SignError, DuplicateAtomError, InvalidAtomError,
        DomainError, ValueError, KeyError, OSError, json.JSONDecodeError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (
        NoiseFloorError, BracketError, RangeError, OutOfRangeError,
        BoundaryCoverageError,
    ) as exc:
        print(f"tolerance error: {exc}", file=sys.stderr)
        return TOLERANCE_EXIT
    except NoConvergenceError as exc:
        print(
            f"non-convergence: {exc} (best={exc.best_value:.6g}, "
            f"err_est={exc.err_est:.3g}, T={exc.T_used})",
            file=sys.stderr,
        )
        return NONCONVERGENCE_EXIT


if __name__ == "__main__":
    sys.exit(main())
