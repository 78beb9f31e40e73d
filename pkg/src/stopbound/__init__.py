"""stopbound: optimal stopping of random walks on exact lattices.

Computes finite-horizon value functions by backward induction, extracts
stopping boundaries by bisection, detects and predicts non-differentiability
of the value function, and cross-checks everything with Monte Carlo.
"""

from .errors import (
    BoundaryCoverageError,
    BracketError,
    CoverageError,
    DomainError,
    DuplicateAtomError,
    InvalidAtomError,
    NoConvergenceError,
    NoiseFloorError,
    OutOfRangeError,
    ProbSumError,
    RangeError,
    SignError,
    StopboundError,
)
from .model import (
    GainFunction,
    JumpAtom,
    JumpDistribution,
    ProblemSpec,
    Rational,
    classify_point,
    get_preset,
    load_problem,
    make_distribution,
    parse_rational,
    preset_names,
    problem_from_dict,
    problem_to_dict,
    save_problem,
)
from .solver import (
    HorizonSchedule,
    ValueResult,
    ValueSlice,
    bellman_residual,
    finite_horizon_value,
    value_at,
    value_slice,
    write_slice_csv,
)
from .boundary import (
    BoundaryCurve,
    KinkScanResult,
    TiltedBoundary,
    boundary_at,
    boundary_curve,
    boundary_kink_scan,
    coverage_curve,
    tilt,
    write_boundary_csv,
    write_kink_scan_csv,
)
from .kinks import (
    ConvexityReport,
    CrossValidation,
    KinkPoint,
    SmoothFitResult,
    convexity_check,
    cross_validate,
    detect_kinks,
    one_sided_slopes,
    predict_kinks,
    smooth_fit_check,
    write_kinks_csv,
)
from .mc import McResult, simulate_value, write_mc_csv

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
