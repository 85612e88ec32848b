"""Markov chain induced by a policy: structure, stationary law, performance.

Conventions match the steady-state analysis the solver is built on:

* ``lam`` is column-stochastic; ``lam[j, i]`` is the probability of moving
  from state i to state j.  Each (state, action) pair spreads its mass over
  exactly two targets, ``q - s`` (no arrival) and ``q - s + batch`` (arrival).
* The balance system is solved through the bordered matrix ``H``: the
  normalization row stacked on the first Q rows of ``lam - I``, with right
  hand side e0.  For a unichain H is invertible and ``pi = H^-1 e0``.
* Average power is ``p_F . pi`` with per-state expected power ``p_F``;
  average delay is the mean queue divided by the arrival rate alpha*batch
  (Little's law).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from ._util import power_close
from .errors import DegenerateSegment, MultiChain, NumericalFailure, RowMismatch
from .model import ModelParams, PerfPoint, Policy

BALANCE_TOL = 1e-9
MASS_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Column-stochastic one-step kernel of the policy-induced chain."""

    lam: np.ndarray

    def __post_init__(self):
        arr = np.array(self.lam, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "lam", arr)

    @property
    def n_states(self) -> int:
        return self.lam.shape[0]

    def support_edges(self) -> list:
        """Adjacency lists of the support digraph (edge i -> j iff lam[j, i] > 0)."""
        return [list(np.nonzero(self.lam[:, i] > 0.0)[0]) for i in range(self.n_states)]

    def to_csv(self) -> str:
        """Dense CSV dump (row j = target state), for debugging."""
        lines = [",".join(f"q{i}" for i in range(self.n_states))]
        for j in range(self.n_states):
            lines.append(",".join(repr(float(v)) for v in self.lam[j]))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ClosedClasses:
    """Closed communication classes plus the remaining transient states."""

    classes: tuple
    transient: frozenset

    @property
    def is_unichain(self) -> bool:
        return len(self.classes) == 1

    def class_of(self, state: int) -> Optional[frozenset]:
        for c in self.classes:
            if state in c:
                return c
        return None


@dataclass(frozen=True, eq=False)
class SteadyState:
    """Stationary distribution together with the closed class that carries it."""

    pi: np.ndarray
    recurrent: frozenset

    def __post_init__(self):
        arr = np.array(self.pi, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "pi", arr)

    def to_dict(self) -> dict:
        return {"pi": [float(v) for v in self.pi], "recurrent": sorted(self.recurrent)}


def transition_matrix(params: ModelParams, policy: Policy) -> TransitionMatrix:
    Q, A = params.buffer, params.batch
    alpha = params.alpha
    lam = np.zeros((Q + 1, Q + 1))
    f = policy.f
    for q in range(Q + 1):
        for s in range(params.max_tx + 1):
            w = f[q, s]
            if w == 0.0:
                continue
            lam[q - s, q] += (1.0 - alpha) * w
            lam[q - s + A, q] += alpha * w
    return TransitionMatrix(lam)


def _strongly_connected_components(edges: list) -> list:
    """Iterative Tarjan over adjacency lists; returns components as lists."""
    n = len(edges)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list = []
    sccs: list = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, ei = work[-1]
            if ei == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            while ei < len(edges[v]):
                w = edges[v][ei]
                ei += 1
                if index[w] == -1:
                    work[-1] = (v, ei)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(comp)
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
    return sccs


def closed_classes(trans: TransitionMatrix) -> ClosedClasses:
    """Closed communication classes = SCCs with no edge leaving the component."""
    edges = trans.support_edges()
    sccs = _strongly_connected_components(edges)
    classes = []
    transient: set = set()
    for comp in sccs:
        members = set(comp)
        closed = all(all(w in members for w in edges[v]) for v in comp)
        if closed:
            classes.append(frozenset(members))
        else:
            transient |= members
    classes.sort(key=min)
    return ClosedClasses(classes=tuple(classes), transient=frozenset(transient))


def balance_matrix(trans: TransitionMatrix) -> np.ndarray:
    """Bordered balance matrix H: ones row over the first Q rows of lam - I."""
    n = trans.n_states
    G = trans.lam - np.eye(n)
    H = np.empty((n, n))
    H[0, :] = 1.0
    H[1:, :] = G[: n - 1, :]
    return H


def _rhs(n: int) -> np.ndarray:
    c = np.zeros(n)
    c[0] = 1.0
    return c


def _check_residuals(trans: TransitionMatrix, pi: np.ndarray) -> None:
    H = balance_matrix(trans)
    n = trans.n_states
    res = np.max(np.abs(H @ pi - _rhs(n)))
    if res >= BALANCE_TOL:
        raise NumericalFailure(f"balance residual {res:.3e} exceeds {BALANCE_TOL:.0e}")
    flow = np.max(np.abs((trans.lam - np.eye(n)) @ pi))
    if flow >= BALANCE_TOL:
        raise NumericalFailure(f"flow residual {flow:.3e} exceeds {BALANCE_TOL:.0e}")
    if abs(pi.sum() - 1.0) >= MASS_TOL:
        raise NumericalFailure(f"probability mass {pi.sum()!r} deviates from 1")


def _solve_restricted(trans: TransitionMatrix, states: Iterable[int]) -> np.ndarray:
    """Stationary law of the chain restricted to one closed class, embedded."""
    members = sorted(states)
    sub = trans.lam[np.ix_(members, members)]
    k = len(members)
    H = np.empty((k, k))
    H[0, :] = 1.0
    H[1:, :] = (sub - np.eye(k))[: k - 1, :]
    try:
        pi_sub = np.linalg.solve(H, _rhs(k))
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"restricted balance solve failed: {exc}") from exc
    pi = np.zeros(trans.n_states)
    pi[members] = pi_sub
    return pi


def stationary_for_class(params: ModelParams, policy: Policy, states: Iterable[int]) -> SteadyState:
    """Class-restricted stationary distribution (caller picks the closed class)."""
    trans = transition_matrix(params, policy)
    pi = _solve_restricted(trans, states)
    pi = _snap_nonnegative(pi)
    _check_residuals(trans, pi)
    return SteadyState(pi=pi, recurrent=frozenset(int(s) for s in states))


def _snap_nonnegative(pi: np.ndarray) -> np.ndarray:
    if np.any(pi < -1e-12):
        raise NumericalFailure(f"stationary solve produced negative mass {pi.min():.3e}")
    pi = pi.copy()
    pi[pi < 0.0] = 0.0
    return pi


def stationary(params: ModelParams, policy: Policy) -> SteadyState:
    """Stationary distribution of the policy-induced chain.

    Unichains are solved through the full bordered system.  If several closed
    classes exist but state 0 is recurrent, the class of state 0 is used
    (every curve-walk policy keeps state 0 recurrent, so this is the chain
    that a trajectory started empty actually lives on).  Otherwise the choice
    of class is genuinely ambiguous and MultiChain is raised.
    """
    trans = transition_matrix(params, policy)
    structure = closed_classes(trans)
    if structure.is_unichain:
        H = balance_matrix(trans)
        try:
            pi = np.linalg.solve(H, _rhs(trans.n_states))
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(f"balance solve failed: {exc}") from exc
        recurrent = structure.classes[0]
    else:
        cls = structure.class_of(0)
        if cls is None:
            raise MultiChain(structure.classes)
        pi = _solve_restricted(trans, cls)
        recurrent = cls
    pi = _snap_nonnegative(pi)
    _check_residuals(trans, pi)
    return SteadyState(pi=pi, recurrent=recurrent)


def expected_power(params: ModelParams, policy: Policy) -> np.ndarray:
    """Per-state expected power under the policy's row distributions."""
    return policy.f @ params.power


def perf_from_pi(params: ModelParams, policy: Policy, pi: np.ndarray) -> PerfPoint:
    d = np.arange(params.buffer + 1, dtype=float)
    power = float(expected_power(params, policy) @ pi)
    delay = float(d @ pi) / (params.alpha * params.batch)
    return PerfPoint(power=power, delay=delay)


def evaluate(params: ModelParams, policy: Policy) -> PerfPoint:
    """Average power and delay of the policy (propagates MultiChain)."""
    return perf_from_pi(params, policy, stationary(params, policy).pi)


# ---------------------------------------------------------------------------
# single-row mixing geometry
#
# For policies F, F' differing only in row q, mixing the matrices with weight
# eps moves the performance point along the segment [Z_F, Z_F'] but not
# linearly: the effective position is
#     eps' = eps (1 + kappa) / (1 + eps kappa),   kappa = h_q . delta_q,
# with h_q row q of H_F^-1 and delta_q the only nonzero column of
# H_F' - H_F.  The segment's slope has the closed form
#     dD/dP = d . u / (alpha A (p_F . u - zeta_q)),   u = H_F^-1 delta_q,
# where zeta_q is the change in expected power at state q.  Both quantities
# are served by a single LU factorization of H_F.
# ---------------------------------------------------------------------------


def _differing_rows(a: Policy, b: Policy) -> np.ndarray:
    return np.nonzero(np.any(a.f != b.f, axis=1))[0]


class _MixGeometry:
    """One-factorization workspace for the eps-map and slope formulas."""

    def __init__(self, params: ModelParams, base: Policy, other: Policy, rows: np.ndarray):
        self.q = int(rows[0])
        t_base = transition_matrix(params, base)
        t_other = transition_matrix(params, other)
        n = t_base.n_states
        delta = np.zeros(n)
        delta[1:] = (t_other.lam - t_base.lam)[: n - 1, self.q]
        self.delta = delta
        self.lu = lu_factor(balance_matrix(t_base))
        self.pi = lu_solve(self.lu, _rhs(n))
        h_q = lu_solve(self.lu, np.eye(n)[self.q], trans=1)
        self.kappa = float(h_q @ delta)
        self.u = lu_solve(self.lu, delta)
        self.zeta = float(
            (expected_power(params, other) - expected_power(params, base))[self.q]
        )
        self.p_base = expected_power(params, base)
        self.params = params

    def eps_map(self, eps: float) -> float:
        return eps * (1.0 + self.kappa) / (1.0 + eps * self.kappa)

    def power_gap(self) -> float:
        """P_other - P_base via the rank-one update identity."""
        return float(self.pi[self.q]) * (self.zeta - float(self.p_base @ self.u)) / (
            1.0 + self.kappa
        )

    def slope(self) -> float:
        d = np.arange(self.params.buffer + 1, dtype=float)
        denom = self.params.alpha * self.params.batch * (float(self.p_base @ self.u) - self.zeta)
        return float(d @ self.u) / denom


def mix_scalar(params: ModelParams, base: Policy, other: Policy, eps: float) -> float:
    """Effective convex weight eps' of the eps-mixture of two single-row variants."""
    rows = _differing_rows(base, other)
    if rows.size != 1:
        raise RowMismatch(f"policies differ in {rows.size} rows, expected exactly 1")
    if not (0.0 <= eps <= 1.0):
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    return _MixGeometry(params, base, other, rows).eps_map(eps)


def segment_slope(params: ModelParams, base: Policy, other: Policy) -> float:
    """Slope dD/dP of the segment spanned by two single-row policy variants."""
    rows = _differing_rows(base, other)
    if rows.size == 0:
        raise DegenerateSegment("policies are identical; the segment is a point")
    if rows.size != 1:
        raise RowMismatch(f"policies differ in {rows.size} rows, expected exactly 1")
    geo = _MixGeometry(params, base, other, rows)
    p_base = float(geo.p_base @ geo.pi)
    gap = geo.power_gap()
    if power_close(p_base + gap, p_base):
        raise DegenerateSegment("average powers coincide; the segment is vertical or a point")
    return geo.slope()


def mix_policies(base: Policy, other: Policy, eps: float) -> Policy:
    """Entrywise convex combination (1-eps) base + eps other."""
    return Policy((1.0 - eps) * base.f + eps * other.f)
