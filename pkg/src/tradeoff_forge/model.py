"""System parameters and scheduling-policy representations.

The system is a slotted-time transmitter: a batch of ``batch`` packets
arrives at the end of a slot with probability ``alpha``, at most ``max_tx``
packets leave per slot, the buffer holds at most ``buffer`` packets, and
sending ``s`` packets costs ``power[s]`` energy units.  A stationary policy
is a row-stochastic matrix ``f`` over (queue state, packets sent); the
feasible entries are those with ``0 <= q - s <= buffer - batch`` so that
neither underflow nor overflow can occur regardless of the arrival.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import BadRange, InfeasibleThresholds, NonConvexPower, NonzeroBase

ROW_SUM_TOL = 1e-12


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Validated system parameters.

    alpha   -- arrival probability per slot, strictly inside (0, 1)
    batch   -- packets per arrival (A)
    max_tx  -- maximum packets per slot (S), at least ``batch``
    buffer  -- buffer capacity in packets (Q), at least ``batch``
    power   -- energy cost per slot indexed by packets sent; power[0] = 0,
               strictly increasing, strictly convex
    """

    alpha: float
    batch: int
    max_tx: int
    buffer: int
    power: np.ndarray

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise BadRange(f"alpha must lie strictly inside (0, 1), got {self.alpha}")
        if self.batch < 1:
            raise BadRange(f"batch size must be at least 1, got {self.batch}")
        if self.max_tx < self.batch:
            raise BadRange(
                f"max transmission {self.max_tx} must be at least the batch size {self.batch}"
            )
        if self.buffer < self.batch:
            raise BadRange(
                f"buffer {self.buffer} must admit one batch of {self.batch} packets"
            )
        power = _frozen_array(self.power)
        if power.ndim != 1 or power.shape[0] != self.max_tx + 1:
            raise BadRange(
                f"power vector must have max_tx+1 = {self.max_tx + 1} entries, got {power.shape}"
            )
        if power[0] != 0.0:
            raise NonzeroBase(f"power[0] must be 0, got {power[0]}")
        if np.any(~np.isfinite(power)) or np.any(power < 0.0):
            raise BadRange("power values must be finite and nonnegative")
        diffs = np.diff(power)
        if np.any(diffs <= 0.0):
            raise NonConvexPower("power must be strictly increasing in packets sent")
        if np.any(np.diff(diffs) <= 0.0):
            raise NonConvexPower("power increments must be strictly increasing (strict convexity)")
        object.__setattr__(self, "power", power)

    # largest post-transmission queue level that still leaves room for a batch
    @property
    def headroom(self) -> int:
        return self.buffer - self.batch

    def feasible_actions(self, q: int) -> range:
        """Transmission counts that avoid both underflow and overflow in state q."""
        return range(max(0, q - self.headroom), min(q, self.max_tx) + 1)

    def action_feasible(self, q: int, s: int) -> bool:
        return 0 <= q - s <= self.headroom and 0 <= s <= self.max_tx

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "A": self.batch,
            "S": self.max_tx,
            "Q": self.buffer,
            "power": [float(p) for p in self.power],
        }


def validate_params(raw: Mapping) -> ModelParams:
    """Build ModelParams from a JSON-style mapping with keys alpha/A/S/Q/power."""
    try:
        alpha = float(raw["alpha"])
        batch = int(raw["A"])
        max_tx = int(raw["S"])
        buffer = int(raw["Q"])
        power = [float(p) for p in raw["power"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise BadRange(f"malformed parameter object: {exc}") from exc
    return ModelParams(alpha=alpha, batch=batch, max_tx=max_tx, buffer=buffer, power=power)


def preset(name: str, alpha: Optional[float] = None) -> ModelParams:
    """Built-in parameter sets.

    ``fig4``  -- small desk-scale instance (Q=6, A=3, S=3, alpha=0.4,
                 power 0/1/4/9), alpha overridable.
    ``fig5``  -- adaptive M-PSK scenario (Q=100, A=3, S=3, joule-scale
                 power vector); alpha must be supplied.
    """
    if name == "fig4":
        return ModelParams(
            alpha=0.4 if alpha is None else alpha,
            batch=3,
            max_tx=3,
            buffer=6,
            power=[0.0, 1.0, 4.0, 9.0],
        )
    if name == "fig5":
        if alpha is None:
            raise BadRange("preset 'fig5' requires an explicit alpha")
        return ModelParams(
            alpha=alpha,
            batch=3,
            max_tx=3,
            buffer=100,
            power=[0.0, 9.0e-14, 18.2e-14, 59.5e-14],
        )
    raise BadRange(f"unknown preset {name!r} (expected 'fig4' or 'fig5')")


PRESET_NAMES = ("fig4", "fig5")


@dataclass(frozen=True, eq=False)
class Policy:
    """Stationary policy: f[q, s] = probability of sending s packets in state q."""

    f: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "f", _frozen_array(self.f))

    @property
    def n_states(self) -> int:
        return self.f.shape[0]

    def actions(self) -> np.ndarray:
        """Deterministic action map; raises if any row is fractional."""
        if not self.is_deterministic():
            raise ValueError("policy is not deterministic")
        return np.argmax(self.f, axis=1)

    def is_deterministic(self) -> bool:
        return bool(np.all(np.max(self.f, axis=1) == 1.0))

    def to_dict(self) -> dict:
        return {"f": [[float(v) for v in row] for row in self.f]}

    def __eq__(self, other) -> bool:
        return isinstance(other, Policy) and np.array_equal(self.f, other.f)

    def __hash__(self):
        return hash(self.f.tobytes())


def policy_from_matrix(params: ModelParams, matrix) -> Policy:
    """Validate a raw matrix against the shape, stochasticity and zero pattern."""
    f = np.asarray(matrix, dtype=float)
    expected = (params.buffer + 1, params.max_tx + 1)
    if f.shape != expected:
        raise BadRange(f"policy matrix must have shape {expected}, got {f.shape}")
    if np.any(f < 0.0) or np.any(f > 1.0):
        raise BadRange("policy entries must lie in [0, 1]")
    row_sums = f.sum(axis=1)
    if np.any(np.abs(row_sums - 1.0) > ROW_SUM_TOL):
        worst = int(np.argmax(np.abs(row_sums - 1.0)))
        raise BadRange(f"row {worst} sums to {row_sums[worst]!r}, expected 1")
    for q in range(params.buffer + 1):
        for s in range(params.max_tx + 1):
            if f[q, s] > 0.0 and not params.action_feasible(q, s):
                raise BadRange(
                    f"entry ({q},{s}) is positive but violates 0 <= q-s <= {params.headroom}"
                )
    return Policy(f)


def policy_from_actions(params: ModelParams, actions: Sequence[int]) -> Policy:
    """Deterministic policy from a per-state action map."""
    acts = list(actions)
    if len(acts) != params.buffer + 1:
        raise BadRange(f"action map must have {params.buffer + 1} entries")
    f = np.zeros((params.buffer + 1, params.max_tx + 1))
    for q, s in enumerate(acts):
        if not params.action_feasible(q, int(s)):
            raise BadRange(f"action {s} is infeasible in state {q}")
        f[q, int(s)] = 1.0
    return Policy(f)


@dataclass(frozen=True)
class Mixing:
    """Two-action randomization at a single threshold state."""

    s_star: int
    p: float

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise BadRange(f"mixing probability must lie in [0, 1], got {self.p}")
        if self.s_star < 0:
            raise BadRange(f"mixing service index must be nonnegative, got {self.s_star}")


@dataclass(frozen=True)
class ThresholdPolicy:
    """Threshold representation: send s packets while the queue is in
    (thresholds[s-1], thresholds[s]], with thresholds[-1] read as -1.

    An optional mixing entry randomizes between s_star and s_star+1 at the
    state thresholds[s_star]; p is the probability of sending s_star there.
    """

    thresholds: tuple
    mixing: Optional[Mixing] = None

    def __post_init__(self):
        t = tuple(int(v) for v in self.thresholds)
        if any(b < a for a, b in zip(t, t[1:])):
            raise BadRange(f"thresholds must be nondecreasing, got {t}")
        if t and t[0] < 0:
            raise BadRange(f"thresholds must be nonnegative, got {t}")
        if self.mixing is not None and self.mixing.s_star >= len(t) - 1:
            raise BadRange(
                f"mixing index {self.mixing.s_star} must be below max_tx {len(t) - 1}"
            )
        object.__setattr__(self, "thresholds", t)

    def to_dict(self) -> dict:
        return {
            "thresholds": list(self.thresholds),
            "mixing": None
            if self.mixing is None
            else {"s_star": self.mixing.s_star, "p": self.mixing.p},
        }

    @staticmethod
    def from_dict(obj: Mapping) -> "ThresholdPolicy":
        mixing = obj.get("mixing")
        return ThresholdPolicy(
            thresholds=tuple(obj["thresholds"]),
            mixing=None if mixing is None else Mixing(int(mixing["s_star"]), float(mixing["p"])),
        )


def _actions_from_thresholds(params: ModelParams, thresholds: tuple) -> list:
    """Per-state action map implied by a complete threshold vector."""
    t = thresholds
    if len(t) != params.max_tx + 1:
        raise InfeasibleThresholds(
            f"threshold vector must have {params.max_tx + 1} entries, got {len(t)}"
        )
    if t[-1] != params.buffer:
        raise InfeasibleThresholds(
            f"top threshold must equal the buffer size {params.buffer} so every state "
            f"has an action, got {t[-1]}"
        )
    actions = []
    for q in range(params.buffer + 1):
        s = next(i for i, ti in enumerate(t) if ti >= q)
        actions.append(s)
    return actions


def deterministic_from_thresholds(params: ModelParams, t: ThresholdPolicy) -> Policy:
    """Materialize a deterministic threshold policy as a matrix."""
    if t.mixing is not None:
        raise BadRange("threshold vector carries a mixing entry; use mixed_from_thresholds")
    actions = _actions_from_thresholds(params, t.thresholds)
    for q, s in enumerate(actions):
        if not params.action_feasible(q, s):
            raise InfeasibleThresholds(
                f"state {q} would send {s} packets, violating 0 <= q-s <= {params.headroom}"
            )
    return policy_from_actions(params, actions)


def mixed_from_thresholds(params: ModelParams, t: ThresholdPolicy) -> Policy:
    """Materialize a threshold policy with a two-action mixture at one state.

    State thresholds[s_star] sends s_star with probability p and s_star+1
    otherwise; every other state follows the deterministic threshold rule.
    """
    if t.mixing is None:
        raise BadRange("threshold vector carries no mixing entry; use deterministic_from_thresholds")
    s_star, p = t.mixing.s_star, t.mixing.p
    q_star = t.thresholds[s_star]
    lower = t.thresholds[s_star - 1] if s_star > 0 else -1
    if q_star <= lower:
        raise InfeasibleThresholds(
            f"mixing state {q_star} collides with the interval below threshold {s_star}"
        )
    actions = _actions_from_thresholds(params, t.thresholds)
    f = np.zeros((params.buffer + 1, params.max_tx + 1))
    for q, s in enumerate(actions):
        if q == q_star:
            continue
        f[q, s] = 1.0
    f[q_star, s_star] = p
    f[q_star, s_star + 1] = 1.0 - p
    for q in range(params.buffer + 1):
        for s in range(params.max_tx + 1):
            if f[q, s] > 0.0 and not params.action_feasible(q, s):
                raise InfeasibleThresholds(
                    f"state {q} would send {s} packets with positive probability, "
                    f"violating 0 <= q-s <= {params.headroom}"
                )
    return Policy(f)


def policy_from_thresholds(params: ModelParams, t: ThresholdPolicy) -> Policy:
    """Dispatch on the presence of a mixing entry."""
    if t.mixing is None:
        return deterministic_from_thresholds(params, t)
    return mixed_from_thresholds(params, t)


def is_threshold_form(params: ModelParams, policy: Policy) -> bool:
    """True iff some nondecreasing threshold vector explains every positive entry.

    The support of each action must fit in [q(s-1), q(s)] for a nondecreasing
    vector q(0..S); a greedy left-to-right scan assigns the smallest viable
    threshold per action and fails exactly when no assignment exists.
    """
    f = policy.f
    supports = []
    for s in range(params.max_tx + 1):
        rows = np.nonzero(f[:, s] > 0.0)[0]
        supports.append((int(rows.min()), int(rows.max())) if rows.size else None)
    prev = -1  # q(-1)
    for s in range(params.max_tx + 1):
        lo_next = None
        for s2 in range(s + 1, params.max_tx + 1):
            if supports[s2] is not None:
                lo_next = supports[s2][0]
                break
        if supports[s] is None:
            q_s = prev
        else:
            lo, hi = supports[s]
            if lo < prev:  # support dips below the previous threshold
                return False
            q_s = max(prev, hi)
        if q_s > params.buffer:
            return False
        if lo_next is not None and q_s > lo_next:
            return False
        prev = max(prev, q_s)
    return True


def threshold_from_actions(params: ModelParams, actions: Sequence[int]) -> ThresholdPolicy:
    """Threshold vector of a deterministic policy with nondecreasing actions."""
    acts = list(int(a) for a in actions)
    if any(b < a for a, b in zip(acts, acts[1:])):
        raise BadRange("action map is not nondecreasing; no threshold vector represents it")
    thresholds = []
    for s in range(params.max_tx + 1):
        below = [q for q, a in enumerate(acts) if a <= s]
        thresholds.append(max(below) if below else (thresholds[-1] if thresholds else 0))
    thresholds[-1] = params.buffer
    # equal-action plateaus make some intermediate thresholds free; pin them
    # to the nondecreasing closure so the tuple is canonical
    for s in range(1, params.max_tx + 1):
        thresholds[s] = max(thresholds[s], thresholds[s - 1])
    return ThresholdPolicy(tuple(thresholds))


@dataclass(frozen=True)
class PerfPoint:
    """Average power and average delay of a policy: one point of the tradeoff plane."""

    power: float
    delay: float

    def to_dict(self) -> dict:
        return {"power": self.power, "delay": self.delay}
