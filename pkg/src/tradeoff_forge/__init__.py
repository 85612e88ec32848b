"""Exact delay-power tradeoff curves for buffer-aware transmission scheduling.

A slotted transmitter with Bernoulli batch arrivals, a finite buffer and a
strictly convex power cost admits an exactly computable optimal tradeoff
between average delay and average power.  This package builds that curve by
walking its vertices, cross-checks it against policy iteration on the
penalized problem, an equivalent linear program, brute-force policy
enumeration, and Monte Carlo simulation.
"""

from .errors import (
    BadRange,
    CountExceeded,
    DegenerateSegment,
    InfeasibleBudget,
    InfeasibleThresholds,
    MultiChain,
    NoConvergence,
    NonConvexPower,
    NonzeroBase,
    NumericalFailure,
    OverflowViolated,
    RowMismatch,
    TradeoffError,
    UnderflowViolated,
    ValidationError,
)
from .model import (
    Mixing,
    ModelParams,
    PerfPoint,
    Policy,
    ThresholdPolicy,
    deterministic_from_thresholds,
    is_threshold_form,
    mixed_from_thresholds,
    policy_from_actions,
    policy_from_matrix,
    policy_from_thresholds,
    preset,
    threshold_from_actions,
    validate_params,
)
from .chain import (
    ClosedClasses,
    SteadyState,
    TransitionMatrix,
    closed_classes,
    evaluate,
    mix_policies,
    mix_scalar,
    segment_slope,
    stationary,
    stationary_for_class,
    transition_matrix,
)
from .relax import RelaxSolution, policy_iteration, sweep_eta
from .curve import (
    CurveCounters,
    Segment,
    TradeoffCurve,
    Vertex,
    build_curve,
    complexity_probe,
    min_delay,
    start_thresholds,
)
from .lp import LpProgram, LpSolution, build_lp, export_lp_text, recover_policy, solve_simplex
from .oracle import (
    PolicyCloud,
    build_cloud,
    enumerate_policies,
    policy_count,
    reference_curve,
)
from .sim import SimConfig, SimResult, simulate

__version__ = "0.1.0"

__all__ = [
    "BadRange",
    "ClosedClasses",
    "CountExceeded",
    "CurveCounters",
    "DegenerateSegment",
    "InfeasibleBudget",
    "InfeasibleThresholds",
    "LpProgram",
    "LpSolution",
    "Mixing",
    "ModelParams",
    "MultiChain",
    "NoConvergence",
    "NonConvexPower",
    "NonzeroBase",
    "NumericalFailure",
    "OverflowViolated",
    "PerfPoint",
    "Policy",
    "PolicyCloud",
    "RelaxSolution",
    "RowMismatch",
    "Segment",
    "SimConfig",
    "SimResult",
    "SteadyState",
    "ThresholdPolicy",
    "TradeoffCurve",
    "TradeoffError",
    "TransitionMatrix",
    "UnderflowViolated",
    "ValidationError",
    "Vertex",
    "build_cloud",
    "build_curve",
    "build_lp",
    "closed_classes",
    "complexity_probe",
    "deterministic_from_thresholds",
    "enumerate_policies",
    "evaluate",
    "export_lp_text",
    "is_threshold_form",
    "min_delay",
    "mix_policies",
    "mix_scalar",
    "mixed_from_thresholds",
    "policy_count",
    "policy_from_actions",
    "policy_from_matrix",
    "policy_from_thresholds",
    "policy_iteration",
    "preset",
    "recover_policy",
    "reference_curve",
    "segment_slope",
    "simulate",
    "solve_simplex",
    "start_thresholds",
    "stationary",
    "stationary_for_class",
    "sweep_eta",
    "threshold_from_actions",
    "transition_matrix",
    "validate_params",
]
