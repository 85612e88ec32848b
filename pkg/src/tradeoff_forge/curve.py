"""Optimal delay-power tradeoff curve via vertex walking.

The curve is piecewise linear, decreasing and convex; its vertices are
deterministic threshold policies and neighbouring vertices differ in exactly
one threshold by exactly one.  The walk starts at the transmit-as-much-as-
possible policy (minimum delay), and at each round probes every candidate
obtained by incrementing one threshold s* with 0 < s* < batch, keeping the
candidate whose segment to the current vertex has the smallest absolute
slope, breaking slope ties toward the nearer candidate and collecting
policies that land exactly on a shared vertex.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import List, Optional, Tuple

from ._util import delay_close, point_close, power_close, slope_close
from .chain import evaluate
from .errors import InfeasibleBudget, InfeasibleThresholds, NumericalFailure
from .model import (
    Mixing,
    ModelParams,
    PerfPoint,
    ThresholdPolicy,
    deterministic_from_thresholds,
    mixed_from_thresholds,
)

BISECT_MAX_ITER = 200


@dataclass(frozen=True)
class Vertex:
    """Curve corner: its performance point and every policy that attains it."""

    point: PerfPoint
    policies: Tuple[ThresholdPolicy, ...]

    def to_dict(self) -> dict:
        return {
            "power": self.point.power,
            "delay": self.point.delay,
            "policies": [tp.to_dict() for tp in self.policies],
        }


@dataclass(frozen=True)
class Segment:
    """Edge between vertices hi and hi+1 with its mixing recipe.

    ``thresholds`` belong to the lower-power endpoint; decrementing entry
    ``s_star`` recovers a higher-power policy, and mixing the two actions at
    state thresholds[s_star] sweeps the edge.
    """

    hi: int
    s_star: Optional[int]
    thresholds: Optional[Tuple[int, ...]]
    slope: float

    def to_dict(self) -> dict:
        return {
            "hi": self.hi,
            "lo": self.hi + 1,
            "s_star": self.s_star,
            "thresholds": None if self.thresholds is None else list(self.thresholds),
            "slope": self.slope,
        }


@dataclass(frozen=True)
class CurveCounters:
    """Work counters for one curve construction."""

    iterations: int
    candidate_evals: int
    stationary_solves: int

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "candidate_evals": self.candidate_evals,
            "stationary_solves": self.stationary_solves,
        }


@dataclass(frozen=True)
class TradeoffCurve:
    """Vertices ordered from highest power / lowest delay to the opposite end."""

    vertices: Tuple[Vertex, ...]
    segments: Tuple[Segment, ...]

    @property
    def max_power(self) -> float:
        return self.vertices[0].point.power

    @property
    def min_power(self) -> float:
        return self.vertices[-1].point.power

    def delay_at(self, power: float) -> float:
        """Piecewise-linear curve height at the given power budget."""
        if power < self.min_power and not power_close(power, self.min_power):
            raise InfeasibleBudget(
                f"budget {power!r} below minimum achievable power {self.min_power!r}"
            )
        if power >= self.max_power:
            return self.vertices[0].point.delay
        for i in range(len(self.vertices) - 1):
            hi, lo = self.vertices[i].point, self.vertices[i + 1].point
            if power_close(power, hi.power):
                return hi.delay
            if lo.power < power < hi.power:
                frac = (hi.power - power) / (hi.power - lo.power)
                return hi.delay + frac * (lo.delay - hi.delay)
        return self.vertices[-1].point.delay

    def to_dict(self) -> dict:
        return {
            "vertices": [v.to_dict() for v in self.vertices],
            "segments": [s.to_dict() for s in self.segments],
        }

    def to_csv(self) -> str:
        lines = ["power,delay,slope"]
        for i, v in enumerate(self.vertices):
            slope = repr(self.segments[i].slope) if i < len(self.segments) else ""
            lines.append(f"{v.point.power!r},{v.point.delay!r},{slope}")
        return "\n".join(lines) + "\n"


def start_thresholds(params: ModelParams) -> ThresholdPolicy:
    """Transmit-as-much-as-possible thresholds: q(s) = s below batch, else Q."""
    t = tuple(s if s < params.batch else params.buffer for s in range(params.max_tx + 1))
    return ThresholdPolicy(t)


def _probe_candidates(t: Tuple[int, ...], params: ModelParams):
    """Threshold vectors reachable by incrementing one probe index."""
    for s_star in range(1, params.batch):
        bumped = t[s_star] + 1
        if bumped > t[s_star + 1]:
            continue  # would break monotonicity, not threshold-based
        yield s_star, t[:s_star] + (bumped,) + t[s_star + 1 :]


def _walk(params: ModelParams):
    t0 = start_thresholds(params)
    z0 = evaluate(params, deterministic_from_thresholds(params, t0))
    solves = 1
    candidate_evals = 0
    iterations = 0

    vertex_points: List[PerfPoint] = [z0]
    vertex_policies: List[List[Tuple[int, ...]]] = [[t0.thresholds]]
    segments: List[Segment] = []

    current: List[Tuple[int, ...]] = [t0.thresholds]
    z_cur = z0
    while True:
        z_prev = z_cur
        queue = deque(current)
        seen = set(current)
        best_slope = None
        best_point = None
        accepted: List[Tuple[Tuple[int, ...], int]] = []  # (thresholds, s_star)

        while queue:
            t = queue.popleft()
            for s_star, t2 in _probe_candidates(t, params):
                if t2 in seen:
                    continue
                seen.add(t2)
                try:
                    policy = deterministic_from_thresholds(params, ThresholdPolicy(t2))
                except InfeasibleThresholds:
                    continue
                z2 = evaluate(params, policy)
                candidate_evals += 1
                solves += 1
                if point_close(z2, z_prev):
                    queue.append(t2)
                    vertex_policies[-1].append(t2)
                    continue
                delay_ok = z2.delay > z_prev.delay or delay_close(z2.delay, z_prev.delay)
                power_ok = z2.power < z_prev.power and not power_close(z2.power, z_prev.power)
                if not (delay_ok and power_ok):
                    continue
                slope2 = (z2.delay - z_prev.delay) / (z_prev.power - z2.power)
                if best_slope is None or (
                    slope2 < best_slope and not slope_close(slope2, best_slope)
                ):
                    best_slope, best_point = slope2, z2
                    accepted = [(t2, s_star)]
                elif slope_close(slope2, best_slope):
                    if power_close(z2.power, best_point.power):
                        accepted.append((t2, s_star))
                    elif z2.power > best_point.power:
                        best_slope, best_point = slope2, z2
                        accepted = [(t2, s_star)]

        if best_point is None:
            break
        iterations += 1
        vertex_points.append(best_point)
        vertex_policies.append([t for t, _ in accepted])
        child_t, child_s = accepted[0]
        segments.append(
            Segment(
                hi=len(vertex_points) - 2,
                s_star=child_s,
                thresholds=child_t,
                slope=(best_point.delay - z_prev.delay) / (best_point.power - z_prev.power),
            )
        )
        current = [t for t, _ in accepted]
        z_cur = best_point

    vertices = tuple(
        Vertex(point=p, policies=tuple(ThresholdPolicy(t) for t in ts))
        for p, ts in zip(vertex_points, vertex_policies)
    )
    curve = TradeoffCurve(vertices=vertices, segments=tuple(segments))
    counters = CurveCounters(
        iterations=iterations, candidate_evals=candidate_evals, stationary_solves=solves
    )
    return curve, counters


def build_curve(params: ModelParams) -> TradeoffCurve:
    """Construct the full optimal delay-power tradeoff curve."""
    return _walk(params)[0]


def complexity_probe(params: ModelParams) -> CurveCounters:
    """Work counters of one full curve construction (for bound checks)."""
    return _walk(params)[1]


def _bisect_mixing(
    params: ModelParams,
    thresholds: Tuple[int, ...],
    s_star: int,
    p_th: float,
    p_hi: float,
    p_lo: float,
) -> Tuple[float, ThresholdPolicy, PerfPoint]:
    """Mixing probability whose average power hits the budget.

    The point moves monotonically (though nonlinearly) as the probability of
    the smaller action grows, so bisection is safe.  The stop tolerance is
    relative to the segment's power scale so that joule-scale instances
    resolve instead of stopping at the first midpoint.
    """
    scale = max(min(1.0, max(abs(p_hi), abs(p_lo))), abs(p_th))
    tol = 1e-10 * scale
    lo, hi = 0.0, 1.0  # p=0 -> higher-power endpoint, p=1 -> lower-power endpoint
    mixed = None
    point = None
    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        tp = ThresholdPolicy(thresholds, Mixing(s_star, mid))
        point = evaluate(params, mixed_from_thresholds(params, tp))
        mixed = tp
        if abs(point.power - p_th) <= tol:
            return mid, mixed, point
        if point.power > p_th:
            lo = mid
        else:
            hi = mid
    if mixed is None or point is None:
        raise NumericalFailure("mixing bisection produced no iterate")
    return 0.5 * (lo + hi), mixed, point


def min_delay(curve: TradeoffCurve, params: ModelParams, p_th: float):
    """Minimum average delay under the power budget, with an attaining policy.

    Vertex budgets return the vertex policy; interior budgets return the
    linearly interpolated delay and the two-action threshold mixture that
    attains it.  Budgets below the curve's minimum power are infeasible.
    """
    verts = curve.vertices
    top = verts[0].point
    if p_th > top.power or power_close(p_th, top.power):
        return top.delay, verts[0].policies[0]
    bottom = verts[-1].point
    if p_th < bottom.power and not power_close(p_th, bottom.power):
        raise InfeasibleBudget(
            f"budget {p_th!r} below minimum achievable power {bottom.power!r}"
        )
    for v in verts:
        if power_close(p_th, v.point.power):
            return v.point.delay, v.policies[0]
    for i in range(len(verts) - 1):
        hi, lo = verts[i].point, verts[i + 1].point
        if lo.power < p_th < hi.power:
            seg = curve.segments[i]
            if seg.thresholds is None or seg.s_star is None:
                raise NumericalFailure("segment carries no mixing recipe")
            frac = (hi.power - p_th) / (hi.power - lo.power)
            delay = hi.delay + frac * (lo.delay - hi.delay)
            _, policy, _ = _bisect_mixing(
                params, seg.thresholds, seg.s_star, p_th, hi.power, lo.power
            )
            return delay, policy
    raise NumericalFailure(f"budget {p_th!r} fell through the vertex scan")
