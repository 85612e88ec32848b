"""Average-cost policy iteration for the penalized problem.

For a multiplier eta >= 0 the stage cost is ``q + eta * power[s]``; the
long-run average of that cost equals ``alpha*batch*D + eta*P``, so sweeping
eta traces out supporting lines of the tradeoff curve.  Two solve modes:

* ``exact_eval`` (default): classic policy iteration; each round solves the
  policy's bias from the linear evaluation system with h(0) = 0, then
  improves greedily.
* ``single_backup``: one relative-value backup per round, improving and
  re-evaluating through the same backup expression; kept as the literal
  iterative scheme, with the final bias recomputed exactly.

Both modes start from the strictly convex bias h(q) = q^2, which keeps every
improved policy of threshold type (action steps of 0 or 1 up the queue), and
both return the exactly evaluated bias of the stabilized policy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List

import numpy as np

from .errors import BadRange, NoConvergence, NumericalFailure
from .model import ModelParams, Policy, policy_from_actions

EVAL_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class RelaxSolution:
    """Optimal deterministic policy for one multiplier value.

    avg_cost is the optimal long-run average of q + eta * power[s];
    bias is the relative value function normalized to bias[0] = 0.
    """

    policy: Policy
    s_of_q: tuple
    bias: np.ndarray
    avg_cost: float
    eta: float
    iterations: int

    def __post_init__(self):
        arr = np.array(self.bias, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "bias", arr)

    def to_dict(self) -> dict:
        return {
            "eta": self.eta,
            "avg_cost": self.avg_cost,
            "s_of_q": list(self.s_of_q),
            "bias": [float(v) for v in self.bias],
            "policy": self.policy.to_dict(),
            "iterations": self.iterations,
        }


def _improve(params: ModelParams, eta: float, h: np.ndarray) -> List[int]:
    """Greedy policy for bias h; ties go to the smallest transmission count."""
    alpha, A = params.alpha, params.batch
    actions = []
    for q in range(params.buffer + 1):
        best_s, best_val = -1, np.inf
        for s in params.feasible_actions(q):
            val = (
                q
                + eta * params.power[s]
                + alpha * h[q - s + A]
                + (1.0 - alpha) * h[q - s]
            )
            if val < best_val:
                best_val, best_s = val, s
        actions.append(best_s)
    return actions


def _backup(params: ModelParams, eta: float, h: np.ndarray, actions: List[int]) -> np.ndarray:
    """One relative-value backup of h under the given actions (reference state 0)."""
    alpha, A = params.alpha, params.batch
    ref = alpha * h[A] + (1.0 - alpha) * h[0]
    new_h = np.empty_like(h)
    for q, s in enumerate(actions):
        new_h[q] = (
            q
            + eta * params.power[s]
            + alpha * h[q - s + A]
            + (1.0 - alpha) * h[q - s]
            - ref
        )
    return new_h


def _exact_bias(params: ModelParams, eta: float, actions: List[int]):
    """Solve g + h(q) = c(q) + E[h(next)] with h(0) = 0; returns (g, h).

    Unknowns are (g, h(1), ..., h(Q)).  The system is nonsingular exactly
    when the policy's chain is a unichain.
    """
    alpha, A = params.alpha, params.batch
    n = params.buffer + 1
    M = np.zeros((n, n))
    rhs = np.empty(n)
    for q, s in enumerate(actions):
        M[q, 0] = 1.0  # g column
        if q >= 1:
            M[q, q] += 1.0
        down, up = q - s, q - s + A
        if down >= 1:
            M[q, down] -= 1.0 - alpha
        if up >= 1:
            M[q, up] -= alpha
        rhs[q] = q + eta * params.power[s]
    sol = np.linalg.solve(M, rhs)
    resid = np.max(np.abs(M @ sol - rhs))
    if resid > EVAL_RESIDUAL_TOL:
        raise np.linalg.LinAlgError(f"evaluation residual {resid:.3e}")
    g = float(sol[0])
    h = np.concatenate(([0.0], sol[1:]))
    return g, h


def policy_iteration(
    params: ModelParams,
    eta: float,
    mode: str = "exact_eval",
    max_iter: int | None = None,
) -> RelaxSolution:
    """Minimize the average combined cost q + eta * power[s].

    Returns the stabilized deterministic policy, its exactly solved bias and
    average cost.  Raises NoConvergence if the policy does not stabilize
    within max_iter rounds (default 10 * (Q+1) * (S+1)).
    """
    if eta < 0.0:
        raise BadRange(f"eta must be nonnegative, got {eta}")
    if mode not in ("exact_eval", "single_backup"):
        raise BadRange(f"unknown mode {mode!r}")
    if max_iter is None:
        max_iter = 10 * (params.buffer + 1) * (params.max_tx + 1)

    h = np.arange(params.buffer + 1, dtype=float) ** 2
    prev_actions: List[int] | None = None
    actions: List[int] = []
    for it in range(1, max_iter + 1):
        actions = _improve(params, eta, h)
        if actions == prev_actions:
            g, h_final = _exact_bias(params, eta, actions)
            return RelaxSolution(
                policy=policy_from_actions(params, actions),
                s_of_q=tuple(actions),
                bias=h_final,
                avg_cost=g,
                eta=eta,
                iterations=it,
            )
        if mode == "exact_eval":
            try:
                _, h = _exact_bias(params, eta, actions)
            except np.linalg.LinAlgError:
                # multichain intermediate policy: its Poisson system is
                # singular, so fall back to one backup step and keep going
                h = _backup(params, eta, h, actions)
        else:
            h = _backup(params, eta, h, actions)
        prev_actions = actions
    raise NoConvergence(f"policy not stable after {max_iter} iterations (eta={eta})")


def sweep_eta(params: ModelParams, etas: Iterable[float], mode: str = "exact_eval") -> list:
    """One RelaxSolution per multiplier, in input order."""
    etas = list(etas)
    if not etas:
        raise BadRange("etas must be nonempty")
    return [policy_iteration(params, eta, mode=mode) for eta in etas]
