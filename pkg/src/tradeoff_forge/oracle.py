"""Brute-force ground truth: enumerate, evaluate, take the lower hull.

Every deterministic feasible policy is a per-state choice of action from
``feasible_actions(q)``; the product of those ranges enumerates them all.
Each policy is evaluated exactly (multichain ones once per closed class,
since each class's long-run point is also attained by some unichain policy),
and the reference curve is the Pareto portion of the lower convex hull of
the resulting point cloud.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ._util import power_close, delay_close, worker_count
from .chain import closed_classes, perf_from_pi, stationary_for_class, transition_matrix
from .curve import Segment, TradeoffCurve, Vertex
from .errors import CountExceeded
from .model import (
    ModelParams,
    PerfPoint,
    ThresholdPolicy,
    policy_from_actions,
    threshold_from_actions,
)

DEFAULT_CAP = 10**6
_CHUNK = 512


@dataclass(frozen=True)
class CloudPoint:
    power: float
    delay: float
    actions: Tuple[int, ...]


@dataclass(frozen=True)
class PolicyCloud:
    """Evaluated deterministic policies plus multichain bookkeeping."""

    points: Tuple[CloudPoint, ...]
    n_policies: int
    n_multichain: int

    def to_csv(self) -> str:
        lines = ["power,delay,policy"]
        for pt in self.points:
            enc = ";".join(str(a) for a in pt.actions)
            lines.append(f"{pt.power!r},{pt.delay!r},{enc}")
        return "\n".join(lines) + "\n"


def policy_count(params: ModelParams) -> int:
    count = 1
    for q in range(params.buffer + 1):
        count *= len(params.feasible_actions(q))
    return count


def enumerate_policies(params: ModelParams, cap: int = DEFAULT_CAP) -> Iterator[Tuple[int, ...]]:
    """Yield every deterministic feasible action map; error out above the cap."""
    total = policy_count(params)
    if total > cap:
        raise CountExceeded(f"{total} deterministic policies exceed the cap of {cap}")
    ranges = [params.feasible_actions(q) for q in range(params.buffer + 1)]
    return itertools.product(*ranges)


def _evaluate_chunk(params: ModelParams, chunk: List[Tuple[int, ...]]):
    """Evaluate a batch of deterministic policies with one stacked solve.

    Unichain policies share a batched dense solve of the bordered balance
    systems; multichain ones fall back to one class-restricted solve per
    closed class, each class contributing its own point.
    """
    n = params.buffer + 1
    alpha, A = params.alpha, params.batch
    d = np.arange(n, dtype=float)

    sm = np.array(chunk, dtype=np.int64)
    m = sm.shape[0]
    lam = np.zeros((m, n, n))
    rows = np.arange(m)[:, None]
    cols = np.broadcast_to(np.arange(n), (m, n))
    down = np.arange(n)[None, :] - sm
    lam[rows, down, cols] += 1.0 - alpha
    lam[rows, down + A, cols] += alpha

    points: List[CloudPoint] = []
    multichain = 0
    unichain_idx: List[int] = []
    for i, actions in enumerate(chunk):
        trans = transition_matrix(params, policy_from_actions(params, actions))
        structure = closed_classes(trans)
        if structure.is_unichain:
            unichain_idx.append(i)
        else:
            multichain += 1
            for cls in structure.classes:
                ss = stationary_for_class(params, policy_from_actions(params, actions), cls)
                pt = perf_from_pi(params, policy_from_actions(params, actions), ss.pi)
                points.append(CloudPoint(pt.power, pt.delay, tuple(actions)))

    if unichain_idx:
        idx = np.array(unichain_idx)
        H = lam[idx] - np.eye(n)
        H[:, 0, :] = 1.0
        rhs = np.zeros((len(idx), n))
        rhs[:, 0] = 1.0
        pis = np.linalg.solve(H, rhs[..., None])[..., 0]
        powers_per_state = params.power[sm[idx]]
        powers = np.einsum("ij,ij->i", powers_per_state, pis)
        delays = (pis @ d) / (alpha * A)
        for k, i in enumerate(unichain_idx):
            points.append(CloudPoint(float(powers[k]), float(delays[k]), tuple(chunk[i])))
    return points, multichain


def build_cloud(params: ModelParams, cap: int = DEFAULT_CAP) -> PolicyCloud:
    """Evaluate every deterministic feasible policy."""
    policies = list(enumerate_policies(params, cap=cap))
    chunks = [policies[i : i + _CHUNK] for i in range(0, len(policies), _CHUNK)]
    workers = worker_count()
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: _evaluate_chunk(params, c), chunks))
    else:
        results = [_evaluate_chunk(params, c) for c in chunks]
    points: List[CloudPoint] = []
    multichain = 0
    for pts, mc in results:
        points.extend(pts)
        multichain += mc
    return PolicyCloud(points=tuple(points), n_policies=len(policies), n_multichain=multichain)


def _lower_hull(points: Sequence[Tuple[float, float]]) -> List[int]:
    """Indices of the lower convex hull of (x, y) points presorted by (x, y)."""
    hull: List[int] = []
    for i, (x, y) in enumerate(points):
        while len(hull) >= 2:
            x1, y1 = points[hull[-2]]
            x2, y2 = points[hull[-1]]
            cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
            if cross <= 0.0:
                hull.pop()
            else:
                break
        if hull and points[hull[-1]][0] == x:
            continue  # same x: the earlier (lower y) point already represents it
        hull.append(i)
    return hull


def reference_curve(params: ModelParams, cap: int = DEFAULT_CAP) -> TradeoffCurve:
    """Pareto lower hull of the full policy cloud as a TradeoffCurve."""
    cloud = build_cloud(params, cap=cap)
    return curve_from_cloud(params, cloud)


def _cluster_by_power(pts: Sequence[CloudPoint]) -> List[Tuple[float, float]]:
    """One representative (power, min delay) per tolerance-cluster of powers.

    Distinct policies attaining the same mathematical point differ by float
    noise; collapsing them first keeps that noise out of the hull scan.
    """
    reps: List[Tuple[float, float]] = []
    cluster_power: Optional[float] = None
    cluster_delay = float("inf")
    for p in pts:
        if cluster_power is not None and power_close(p.power, cluster_power):
            cluster_delay = min(cluster_delay, p.delay)
            continue
        if cluster_power is not None:
            reps.append((cluster_power, cluster_delay))
        cluster_power, cluster_delay = p.power, p.delay
    if cluster_power is not None:
        reps.append((cluster_power, cluster_delay))
    return reps


def curve_from_cloud(params: ModelParams, cloud: PolicyCloud) -> TradeoffCurve:
    pts = sorted(cloud.points, key=lambda p: (p.power, p.delay))
    coords = _cluster_by_power(pts)
    hull = _lower_hull(coords)

    # keep the strictly decreasing (Pareto) part, walking from low power up
    kept: List[int] = []
    for j, idx in enumerate(hull):
        if j == 0:
            kept.append(idx)
            continue
        y_prev = coords[kept[-1]][1]
        y = coords[idx][1]
        if y < y_prev and not delay_close(y, y_prev):
            kept.append(idx)
        else:
            break  # slopes only grow along the hull; first flat edge ends the curve

    ordered = list(reversed(kept))  # highest power / lowest delay first
    vertices = []
    for idx in ordered:
        vx, vy = coords[idx]
        achievers = [
            p.actions
            for p in cloud.points
            if power_close(p.power, vx) and delay_close(p.delay, vy)
        ]
        tps = []
        seen = set()
        for actions in achievers:
            if any(b < a for a, b in zip(actions, actions[1:])):
                continue  # not of threshold form; a threshold achiever also exists
            tp = threshold_from_actions(params, actions)
            if tp.thresholds not in seen:
                seen.add(tp.thresholds)
                tps.append(tp)
        vertices.append(
            Vertex(point=PerfPoint(power=vx, delay=vy), policies=tuple(tps))
        )

    segments = []
    for i in range(len(vertices) - 1):
        hi, lo = vertices[i], vertices[i + 1]
        recipe = _adjacent_recipe(hi, lo)
        slope = (lo.point.delay - hi.point.delay) / (lo.point.power - hi.point.power)
        if recipe is None:
            segments.append(Segment(hi=i, s_star=None, thresholds=None, slope=slope))
        else:
            s_star, thresholds = recipe
            segments.append(Segment(hi=i, s_star=s_star, thresholds=thresholds, slope=slope))
    return TradeoffCurve(vertices=tuple(vertices), segments=tuple(segments))


def _adjacent_recipe(hi: Vertex, lo: Vertex) -> Optional[Tuple[int, Tuple[int, ...]]]:
    """Find a policy pair across the segment differing in one threshold by one."""
    for tp_lo in lo.policies:
        for tp_hi in hi.policies:
            a, b = tp_hi.thresholds, tp_lo.thresholds
            if len(a) != len(b):
                continue
            diffs = [s for s in range(len(a)) if a[s] != b[s]]
            if len(diffs) == 1 and b[diffs[0]] - a[diffs[0]] == 1:
                return diffs[0], b
    return None
