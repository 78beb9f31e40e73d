"""Monte Carlo cross-check: simulate the walk under a computed boundary rule.

Estimates E[g at the stopped state] for the rule "stop at the first step with
state >= b(current time)" (ties stop, matching the solver). Because the rule
uses the numerical boundary, the estimate is biased low when b is inexact;
consumers should compare with inequality-aware tolerances.

Reproducibility: path k draws from its own substream derived from (seed, k)
via SeedSequence spawn keys, so path k's walk is independent of n_paths and
of how the workload is sharded. Per-path values are reduced in path order.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._util import fmt12
from .errors import CoverageError, DomainError
from .model import ProblemSpec

_BLOCK_START = 64


@dataclass(frozen=True)
class McResult:
    mean: float
    std_error: float
    n_paths: int
    n_truncated: int
    horizon_cap: int
    seed: int


def _path_generators(seed: int, n_paths: int) -> list[np.random.Generator]:
    return [
        np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(k,))))
        for k in range(n_paths)
    ]


def simulate_value(
    problem: ProblemSpec,
    boundary,
    t: float,
    x: float,
    n_paths: int,
    horizon_cap: int,
    seed: int,
    *,
    truncation: str = "gain",
) -> McResult:
    """Simulate n_paths walks from (t, x) under the boundary stopping rule.

    Paths still running after horizon_cap steps are truncated and evaluated
    per `truncation`: "gain" scores g at the final state; "upper" scores the
    gain's certified dominating function there (available only for gains that
    carry one), which keeps the estimate inside [g, upper-bound] brackets for
    problems whose deep excursions make g(final) arbitrarily bad.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if horizon_cap < 1:
        raise ValueError("horizon_cap must be >= 1")
    if truncation not in ("gain", "upper"):
        raise ValueError(f"unknown truncation mode {truncation!r}")
    if truncation == "upper" and not problem.gain.has_upper_bound:
        raise DomainError(
            f"gain family {problem.gain.family!r} has no certified upper bound"
        )
    if not boundary.covers(t, t + horizon_cap):
        raise CoverageError(
            f"boundary [{boundary.t_lo}, {boundary.t_hi}] does not cover "
            f"[{t}, {t + horizon_cap}]"
        )

    h = float(problem.jumps.h)
    jumps_units = np.asarray(problem.jumps.int_jumps, dtype=np.int64)
    cum_probs = np.cumsum([float(q) for q in problem.jumps.probs])[:-1]
    b_levels = np.asarray([boundary.b_at(t + n) for n in range(horizon_cap + 1)])
    gains_t = np.asarray([t + n for n in range(horizon_cap + 1)])

    values = np.empty(n_paths, dtype=np.float64)
    truncated = np.zeros(n_paths, dtype=bool)

    if x >= b_levels[0]:
        values.fill(problem.gain.eval(t, x))
        mean = float(values.mean())
        return McResult(mean, 0.0, n_paths, 0, horizon_cap, seed)

    gens = _path_generators(seed, n_paths)
    active = np.arange(n_paths)
    positions = np.full(n_paths, float(x))
    offsets = np.zeros(n_paths, dtype=np.int64)  # lattice units from x
    step_done = 0
    block = _BLOCK_START
    while len(active) and step_done < horizon_cap:
        n_steps = min(block, horizon_cap - step_done)
        draws = np.empty((len(active), n_steps))
        for row, k in enumerate(active):
            draws[row] = gens[k].random(n_steps)
        incs = jumps_units[np.searchsorted(cum_probs, draws, side="right")]
        walk = offsets[active, None] + np.cumsum(incs, axis=1)
        pos = x + h * walk
        hit = pos >= b_levels[None, step_done + 1 : step_done + n_steps + 1]
        any_hit = hit.any(axis=1)
        first = np.argmax(hit, axis=1)

        done_rows = np.nonzero(any_hit)[0]
        if len(done_rows):
            stop_steps = step_done + first[done_rows] + 1
            stop_pos = pos[done_rows, first[done_rows]]
            values[active[done_rows]] = problem.gain.eval_points(
                gains_t[stop_steps], stop_pos
            )
        keep = ~any_hit
        offsets[active] = walk[:, -1]
        positions[active] = pos[:, -1]
        active = active[keep]
        step_done += n_steps
        block *= 2

    if len(active):
        truncated[active] = True
        t_end = float(gains_t[horizon_cap])
        finals = positions[active]
        if truncation == "upper":
            vals = problem.gain.upper_array(t_end, finals)
        else:
            vals = problem.gain.eval_array(t_end, finals)
        values[active] = vals

    mean = float(values.mean())
    if n_paths > 1:
        std_error = float(values.std(ddof=1) / np.sqrt(n_paths))
    else:
        std_error = 0.0
    return McResult(
        mean=mean,
        std_error=std_error,
        n_paths=n_paths,
        n_truncated=int(truncated.sum()),
        horizon_cap=horizon_cap,
        seed=seed,
    )


def write_mc_csv(result: McResult, t: float, x: float, path: str | Path) -> None:
    """Single-row CSV: t,x,mean,std_error,n_paths,n_truncated,seed."""
    lines = [
        "t,x,mean,std_error,n_paths,n_truncated,seed",
        ",".join(
            [
                fmt12(t),
                fmt12(x),
                fmt12(result.mean),
                fmt12(result.std_error),
                str(result.n_paths),
                str(result.n_truncated),
                str(result.seed),
            ]
        ),
    ]
    Path(path).write_text("\n".join(lines) + "\n")
