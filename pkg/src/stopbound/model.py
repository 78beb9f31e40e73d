"""Domain types for discrete-time stopping problems on random walks.

A problem couples a finitely supported rational jump law with a gain
function g(t, x). Keeping jumps rational makes the reachable set from any
start x exactly x + h*Z for a lattice step h, so "lands exactly on the
boundary" is decidable instead of a floating-point accident.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import (
    DomainError,
    DuplicateAtomError,
    InvalidAtomError,
    OutOfRangeError,
    ProbSumError,
    SignError,
)

# Exact rational scalar: canonical p/q with q > 0, gcd(|p|, q) = 1.
Rational = Fraction


def parse_rational(text: str | int | float | Fraction) -> Fraction:
    """Parse 'p/q', integer, or decimal notation into an exact Fraction."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, float):
        return Fraction(text)
    return Fraction(str(text).strip())


def format_rational(q: Fraction) -> str:
    """Render a Fraction as 'p/q' (or 'p' when the denominator is 1)."""
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class JumpAtom:
    """One support point of the step law: P(step = value) = prob."""

    value: Fraction
    prob: Fraction


@dataclass(frozen=True)
class JumpDistribution:
    """Finitely supported step law with derived lattice data.

    h is the greatest common rational divisor of the atom values, so every
    atom value equals int_jump * h exactly and every reachable state from x
    lies on x + h*Z. xi_star is the maximal upward jump.
    """

    atoms: tuple[JumpAtom, ...]
    h: Fraction
    int_jumps: tuple[int, ...]
    xi_star: Fraction
    mean: Fraction
    variance: Fraction

    @property
    def probs(self) -> tuple[Fraction, ...]:
        return tuple(a.prob for a in self.atoms)

    @property
    def values(self) -> tuple[Fraction, ...]:
        return tuple(a.value for a in self.atoms)


def make_distribution(atoms: Iterable[tuple]) -> JumpDistribution:
    """Build a canonical JumpDistribution from (value, prob) pairs.

    Raises ProbSumError, SignError, DuplicateAtomError, or InvalidAtomError
    when the pairs violate the step-law invariants. All arithmetic is exact.
    """
    pairs = [(parse_rational(v), parse_rational(p)) for v, p in atoms]
    if not pairs:
        raise InvalidAtomError("at least one atom is required")
    for v, p in pairs:
        if p <= 0:
            raise InvalidAtomError(f"atom ({v}, {p}) has nonpositive probability")
        if v == 0:
            raise InvalidAtomError("zero-valued jump atoms are not allowed")
    values = [v for v, _ in pairs]
    if len(set(values)) != len(values):
        raise DuplicateAtomError("atom values must be pairwise distinct")
    total = sum(p for _, p in pairs)
    if total != 1:
        raise ProbSumError(f"probabilities sum to {total}, expected 1")
    if not any(v < 0 for v in values) or not any(v > 0 for v in values):
        raise SignError("need at least one negative and one positive jump")

    pairs.sort(key=lambda vp: vp[0])
    den_lcm = math.lcm(*(v.denominator for v, _ in pairs))
    scaled = [v * den_lcm for v, _ in pairs]  # exact integers
    num_gcd = math.gcd(*(abs(int(s)) for s in scaled))
    h = Fraction(num_gcd, den_lcm)
    int_jumps = tuple(int(v / h) for v, _ in pairs)
    mean = sum((v * p for v, p in pairs), start=Fraction(0))
    variance = sum((v * v * p for v, p in pairs), start=Fraction(0)) - mean * mean
    return JumpDistribution(
        atoms=tuple(JumpAtom(v, p) for v, p in pairs),
        h=h,
        int_jumps=int_jumps,
        xi_star=pairs[-1][0],
        mean=mean,
        variance=variance,
    )


GAIN_FAMILIES = ("chow_robbins", "dist_to_integer", "sqrt_threshold", "affine_tilt_of")


@dataclass(frozen=True)
class GainFunction:
    """Evaluable gain g(t, x) with exact partial x-derivative.

    The family set is closed (three presets plus a spatial affine tilt), so
    derivatives and exceptional points stay auditable instead of relying on
    a general expression parser.

    Families:
      chow_robbins     g(t, x) = x / t on t > 0.
      dist_to_integer  g(t, x) = -x^2 for x <= 0, else -dist(x, Z)^2.
      sqrt_threshold   g(t, x) = -max(sqrt(t) - x, 0)^3; zero at and above
                       sqrt(t), negative below, twice continuously
                       differentiable.
      affine_tilt_of   g(t, x) = base(t, x) + c*x.
    """

    family: str
    c: Fraction | None = None
    base: "GainFunction | None" = None

    def __post_init__(self):
        if self.family not in GAIN_FAMILIES:
            raise ValueError(f"unknown gain family {self.family!r}")
        if self.family == "affine_tilt_of" and (self.c is None or self.base is None):
            raise ValueError("affine_tilt_of requires both a base family and c")

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def chow_robbins() -> "GainFunction":
        return GainFunction("chow_robbins")

    @staticmethod
    def dist_to_integer() -> "GainFunction":
        return GainFunction("dist_to_integer")

    @staticmethod
    def sqrt_threshold() -> "GainFunction":
        return GainFunction("sqrt_threshold")

    @staticmethod
    def tilted(base: "GainFunction", c) -> "GainFunction":
        return GainFunction("affine_tilt_of", c=parse_rational(c), base=base)

    # -- domain ----------------------------------------------------------------

    def check_t(self, t: float) -> None:
        """Raise DomainError if g(t, .) is undefined."""
        if self.family == "chow_robbins" and t <= 0:
            raise DomainError(f"chow_robbins gain needs t > 0, got t={t}")
        if self.family == "sqrt_threshold" and t < 0:
            raise DomainError(f"sqrt_threshold gain needs t >= 0, got t={t}")
        if self.family == "affine_tilt_of":
            self.base.check_t(t)

    # -- evaluation --------------------------------------------------------

    def eval(self, t: float, x: float) -> float:
        return float(self.eval_array(t, np.asarray([x], dtype=np.float64))[0])

    def eval_array(self, t: float, x: np.ndarray) -> np.ndarray:
        """Vectorized g(t, x) over an array of positions."""
        self.check_t(t)
        if self.family == "chow_robbins":
            return x / t
        if self.family == "dist_to_integer":
            d = np.minimum(np.ceil(x) - x, x - np.floor(x))
            return np.where(x <= 0.0, -x * x, -d * d)
        if self.family == "sqrt_threshold":
            shortfall = np.maximum(math.sqrt(t) - x, 0.0)
            return -(shortfall**3)
        return self.base.eval_array(t, x) + float(self.c) * x

    def eval_points(self, ts: np.ndarray, xs: np.ndarray) -> np.ndarray:
        """Vectorized g over paired (t, x) arrays."""
        if self.family == "chow_robbins":
            if np.any(ts <= 0):
                raise DomainError("chow_robbins gain needs t > 0")
            return xs / ts
        if self.family == "dist_to_integer":
            d = np.minimum(np.ceil(xs) - xs, xs - np.floor(xs))
            return np.where(xs <= 0.0, -xs * xs, -d * d)
        if self.family == "sqrt_threshold":
            if np.any(ts < 0):
                raise DomainError("sqrt_threshold gain needs t >= 0")
            shortfall = np.maximum(np.sqrt(ts) - xs, 0.0)
            return -(shortfall**3)
        return self.base.eval_points(ts, xs) + float(self.c) * xs

    def dx(self, t: float, x: float) -> float:
        """Partial derivative in x; at exceptional points the right derivative."""
        self.check_t(t)
        if self.family == "chow_robbins":
            return 1.0 / t
        if self.family == "dist_to_integer":
            if x <= 0.0:
                return -2.0 * x
            up, down = math.ceil(x) - x, x - math.floor(x)
            if down < up:
                return -2.0 * down
            return 2.0 * up
        if self.family == "sqrt_threshold":
            shortfall = max(math.sqrt(t) - x, 0.0)
            return 3.0 * shortfall * shortfall
        return self.base.dx(t, x) + float(self.c)

    def is_exceptional(self, x: float) -> bool:
        """True where the two-sided x-derivative is not declared to exist."""
        if self.family == "dist_to_integer":
            return float(2 * x) == int(2 * x)
        if self.family == "affine_tilt_of":
            return self.base.is_exceptional(x)
        return False

    # -- certified dominating values -----------------------------------------

    @property
    def has_upper_bound(self) -> bool:
        """Whether a certified dominating function for V is available.

        dist_to_integer: u(x) = -dist(x, Z)^2 dominates g pointwise, and for
        any integer-step walk dist(x + steps, Z) = dist(x, Z), so u composed
        with the walk is a bounded martingale; optional stopping then gives
        E[g at any a.s.-finite stop] <= u(start).
        sqrt_threshold: g <= 0 everywhere, so 0 dominates every stopped gain.
        """
        return self.family in ("dist_to_integer", "sqrt_threshold")

    def upper_array(self, t: float, x: np.ndarray) -> np.ndarray:
        if self.family == "dist_to_integer":
            d = np.minimum(np.ceil(x) - x, x - np.floor(x))
            return -d * d
        if self.family == "sqrt_threshold":
            return np.zeros_like(x)
        raise DomainError(f"gain family {self.family!r} has no certified upper bound")


@dataclass(frozen=True)
class ProblemSpec:
    """A stopping problem: jump law, gain, and smallest admissible anchor time."""

    jumps: JumpDistribution
    gain: GainFunction
    t_min: Fraction
    key: str

    def __post_init__(self):
        if self.t_min <= 0:
            raise DomainError("t_min must be positive")
        self.gain.check_t(float(self.t_min))


# -- presets -------------------------------------------------------------------

_BERNOULLI = ((-1, Fraction(1, 2)), (1, Fraction(1, 2)))
_THREE_JUMP = (
    (Fraction(-3, 2), Fraction(24, 85)),
    (Fraction(1, 5), Fraction(25, 68)),
    (Fraction(1), Fraction(7, 20)),
)


def _preset_builders():
    return {
        "chow_robbins": lambda: ProblemSpec(
            make_distribution(_BERNOULLI), GainFunction.chow_robbins(),
            Fraction(1, 4), "chow_robbins",
        ),
        "three_jump": lambda: ProblemSpec(
            make_distribution(_THREE_JUMP), GainFunction.chow_robbins(),
            Fraction(1, 4), "three_jump",
        ),
        "dist_to_integer": lambda: ProblemSpec(
            make_distribution(_BERNOULLI), GainFunction.dist_to_integer(),
            Fraction(1, 4), "dist_to_integer",
        ),
        "sqrt_threshold": lambda: ProblemSpec(
            make_distribution(_BERNOULLI), GainFunction.sqrt_threshold(),
            Fraction(1, 4), "sqrt_threshold",
        ),
    }


def preset_names() -> tuple[str, ...]:
    return tuple(_preset_builders())


def get_preset(name: str) -> ProblemSpec:
    builders = _preset_builders()
    if name not in builders:
        raise KeyError(f"unknown preset {name!r}; known: {', '.join(builders)}")
    return builders[name]()


# -- region classification ------------------------------------------------------


def classify_point(problem: ProblemSpec, boundary, t: float, x: float) -> str:
    """Classify (t, x) as 'stopping' or 'continuation' against a boundary curve.

    Stopping means x >= b(t) - tol_x with b interpolated linearly in t;
    ties stop. Raises OutOfRangeError for t outside the curve's grid.
    """
    b = boundary.b_at(t)
    return "stopping" if x >= b - boundary.tol_x else "continuation"


# -- problem file (de)serialization ---------------------------------------------


def _gain_to_dict(gain: GainFunction) -> dict:
    if gain.family == "affine_tilt_of":
        return {
            "family": gain.family,
            "params": {"c": format_rational(gain.c), "base": _gain_to_dict(gain.base)},
        }
    return {"family": gain.family, "params": {}}


def _gain_from_dict(d: dict) -> GainFunction:
    family = d.get("family")
    params = d.get("params", {})
    if family == "affine_tilt_of":
        return GainFunction.tilted(_gain_from_dict(params["base"]), parse_rational(params["c"]))
    if family in GAIN_FAMILIES:
        return GainFunction(family)
    raise ValueError(f"unknown gain family {family!r}")


def problem_to_dict(problem: ProblemSpec) -> dict:
    return {
        "jumps": [
            {"value": format_rational(a.value), "prob": format_rational(a.prob)}
            for a in problem.jumps.atoms
        ],
        "gain": _gain_to_dict(problem.gain),
        "t_min": format_rational(problem.t_min),
        "name": problem.key,
    }


def problem_from_dict(d: dict) -> ProblemSpec:
    try:
        atoms = [(a["value"], a["prob"]) for a in d["jumps"]]
        gain = _gain_from_dict(d["gain"])
        t_min = parse_rational(d["t_min"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed problem document: missing field {exc}") from exc
    key = d.get("name")
    if not key:
        digest = hashlib.sha1(
            json.dumps(d, sort_keys=True, default=str).encode()
        ).hexdigest()[:8]
        key = f"custom:{digest}"
    return ProblemSpec(make_distribution(atoms), gain, t_min, key)


def load_problem(path: str | Path) -> ProblemSpec:
    """Load a problem specification document (JSON; rationals as 'p/q' strings)."""
    text = Path(path).read_text()
    return problem_from_dict(json.loads(text))


def save_problem(problem: ProblemSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(problem_to_dict(problem), indent=2) + "\n")
