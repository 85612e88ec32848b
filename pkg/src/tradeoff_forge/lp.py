"""Equivalent linear program over occupation measures x[q, s] = pi(q) f[q, s].

Minimizing average delay subject to the power budget becomes linear in the
occupation measure: the objective sums q/(alpha*batch) over the measure, the
budget row sums power[s], and for each cut between states below and at/above
q the upward alpha-flow must equal the downward flow.  Infeasible (q, s)
pairs are simply not variables.  The solver is a self-contained dense
two-phase simplex with Bland's rule, so the LP route stays independent of
the vertex-walking curve construction it is used to cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .errors import BadRange, NumericalFailure
from .chain import SteadyState
from .model import ModelParams, Policy, policy_from_matrix

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-10
ZERO_MASS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class LpProgram:
    """Delay-minimization LP for one power budget."""

    params: ModelParams
    p_th: float
    var_index: Tuple[Tuple[int, int], ...]  # (q, s) per column
    objective: np.ndarray
    power_row: np.ndarray
    balance_rows: np.ndarray  # one row per q = 1..Q
    norm_row: np.ndarray

    @property
    def n_vars(self) -> int:
        return len(self.var_index)


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: str  # optimal | infeasible | unbounded
    objective: Optional[float]
    x: Optional[np.ndarray]
    var_index: Tuple[Tuple[int, int], ...]

    def to_dict(self) -> dict:
        out = {"status": self.status, "objective": self.objective}
        if self.x is None:
            out["variables"] = None
        else:
            out["variables"] = [
                {"q": q, "s": s, "value": float(v)}
                for (q, s), v in zip(self.var_index, self.x)
            ]
        return out


def build_lp(params: ModelParams, p_th: float) -> LpProgram:
    """Materialize objective, budget, balance and normalization rows."""
    if p_th < 0.0:
        raise BadRange(f"power budget must be nonnegative, got {p_th}")
    Q, S, A = params.buffer, params.max_tx, params.batch
    alpha = params.alpha
    var_index = tuple(
        (q, s) for q in range(Q + 1) for s in params.feasible_actions(q)
    )
    col = {qs: j for j, qs in enumerate(var_index)}
    n = len(var_index)

    objective = np.array([q / (alpha * A) for q, _ in var_index])
    power_row = np.array([params.power[s] for _, s in var_index])
    norm_row = np.ones(n)

    balance = np.zeros((Q, n))
    for q in range(1, Q + 1):
        row = balance[q - 1]
        for l in range(max(0, q - A), q):
            for s in range(0, min(l + A - q, S) + 1):
                j = col.get((l, s))
                if j is not None:
                    row[j] += alpha
        upper = min(q + S - 1, Q)
        for r in range(q, upper + 1):
            for s in range(r - q + A + 1, S + 1):
                j = col.get((r, s))
                if j is not None:
                    row[j] -= 1.0
            for s in range(r - q + 1, min(r - q + A, S) + 1):
                j = col.get((r, s))
                if j is not None:
                    row[j] -= 1.0 - alpha
    return LpProgram(
        params=params,
        p_th=p_th,
        var_index=var_index,
        objective=objective,
        power_row=power_row,
        balance_rows=balance,
        norm_row=norm_row,
    )


# ---------------------------------------------------------------------------
# dense two-phase simplex, Bland's rule
# ---------------------------------------------------------------------------


def _bland_entering(obj_row: np.ndarray, ncols: int) -> Optional[int]:
    for j in range(ncols):
        if obj_row[j] < -FEAS_TOL:
            return j
    return None


def _bland_leaving(T: np.ndarray, basis: List[int], col: int) -> Optional[int]:
    best_row, best_ratio = None, None
    m = T.shape[0] - 1
    for i in range(m):
        a = T[i, col]
        if a > PIVOT_TOL:
            ratio = T[i, -1] / a
            if (
                best_ratio is None
                or ratio < best_ratio - PIVOT_TOL
                or (abs(ratio - best_ratio) <= PIVOT_TOL and basis[i] < basis[best_row])
            ):
                best_ratio, best_row = ratio, i
    return best_row


def _pivot(T: np.ndarray, basis: List[int], row: int, col: int) -> None:
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]
    basis[row] = col


def _run_simplex(T: np.ndarray, basis: List[int], ncols: int, cap: int) -> str:
    for _ in range(cap):
        col = _bland_entering(T[-1], ncols)
        if col is None:
            return "optimal"
        row = _bland_leaving(T, basis, col)
        if row is None:
            return "unbounded"
        _pivot(T, basis, row, col)
    raise NumericalFailure("simplex pivoting exceeded the iteration cap")


def solve_simplex(prog: LpProgram) -> LpSolution:
    """Optimal basic solution of the program, or infeasible/unbounded status."""
    n = prog.n_vars
    Q = prog.params.buffer
    # rows: Q balance (=0), normalization (=1), power (<= p_th, slack added)
    A_rows = np.vstack([prog.balance_rows, prog.norm_row, prog.power_row])
    b = np.concatenate([np.zeros(Q), [1.0], [prog.p_th]])
    m = A_rows.shape[0]
    slack_col = n
    n_eq = Q + 1

    # flip rows with negative rhs so phase-1 artificials start feasible
    A_full = np.hstack([A_rows, np.zeros((m, 1))])
    A_full[m - 1, slack_col] = 1.0
    for i in range(m):
        if b[i] < 0.0:
            A_full[i] *= -1.0
            b[i] *= -1.0

    n_struct = n + 1  # structural + slack
    art_cols = list(range(n_struct, n_struct + n_eq))
    T = np.zeros((m + 1, n_struct + n_eq + 1))
    T[:m, :n_struct] = A_full
    T[:m, -1] = b
    basis: List[int] = []
    for i in range(n_eq):
        T[i, n_struct + i] = 1.0
        basis.append(n_struct + i)
    basis.append(slack_col)  # power row starts on its slack

    # phase 1: minimize the sum of artificials
    for i in range(n_eq):
        T[-1] -= T[i]
    T[-1, art_cols] = 0.0
    cap = 200 * (m + n_struct + n_eq) + 2000
    status = _run_simplex(T, basis, n_struct + n_eq, cap)
    if status != "optimal":
        raise NumericalFailure("phase-1 simplex did not close the artificial objective")
    if -T[-1, -1] > FEAS_TOL:  # leftover artificial mass: no feasible point
        return LpSolution(status="infeasible", objective=None, x=None, var_index=prog.var_index)

    # drive leftover artificials out of the basis (or drop redundant rows)
    art_set = set(art_cols)
    drop_rows = []
    for i in range(m):
        if basis[i] in art_set:
            pivot_col = next(
                (j for j in range(n_struct) if abs(T[i, j]) > PIVOT_TOL and j not in basis),
                None,
            )
            if pivot_col is None:
                drop_rows.append(i)
            else:
                _pivot(T, basis, i, pivot_col)
    if drop_rows:
        keep = [i for i in range(m) if i not in drop_rows] + [m]
        T = T[keep]
        basis = [basis[i] for i in range(m) if i not in drop_rows]
        m = len(basis)

    # phase 2: original objective over structural columns, artificials frozen
    T[:, art_cols] = 0.0
    T[-1] = 0.0
    T[-1, :n] = prog.objective
    for i in range(m):
        if basis[i] < n_struct and T[-1, basis[i]] != 0.0:
            T[-1] -= T[-1, basis[i]] * T[i]
    status = _run_simplex(T, basis, n_struct, cap)
    if status == "unbounded":
        return LpSolution(status="unbounded", objective=None, x=None, var_index=prog.var_index)

    x = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = T[i, -1]
    x[np.abs(x) < ZERO_MASS_TOL] = 0.0
    if np.any(x < -FEAS_TOL):
        raise NumericalFailure(f"simplex returned negative occupation mass {x.min():.3e}")
    x[x < 0.0] = 0.0
    return LpSolution(
        status="optimal",
        objective=float(prog.objective @ x),
        x=x,
        var_index=prog.var_index,
    )


def recover_policy(params: ModelParams, sol: LpSolution) -> Tuple[Policy, SteadyState]:
    """Stationary policy and distribution encoded by an optimal LP solution.

    pi(q) sums the occupation mass of state q; visited states divide their
    mass through, unvisited states pin the transmit-as-much-as-allowed
    action so the matrix stays feasible and row-stochastic.
    """
    if sol.status != "optimal" or sol.x is None:
        raise BadRange("recover_policy needs an optimal LP solution")
    Q, S = params.buffer, params.max_tx
    pi = np.zeros(Q + 1)
    for (q, _), v in zip(sol.var_index, sol.x):
        pi[q] += v
    f = np.zeros((Q + 1, S + 1))
    for q in range(Q + 1):
        if pi[q] > ZERO_MASS_TOL:
            for (q2, s), v in [t for t in zip(sol.var_index, sol.x) if t[0][0] == q]:
                f[q, s] = v / pi[q]
            # renormalize away simplex rounding so the row sums to one exactly
            f[q] /= f[q].sum()
        else:
            pi[q] = 0.0
            f[q, min(q, S)] = 1.0
    policy = policy_from_matrix(params, f)
    support = frozenset(int(q) for q in np.nonzero(pi > 0.0)[0])
    return policy, SteadyState(pi=pi, recurrent=support)


def export_lp_text(prog: LpProgram) -> str:
    """CPLEX-LP text rendering; deterministic, byte-stable for equal inputs."""

    def name(qs: Tuple[int, int]) -> str:
        return f"x_{qs[0]}_{qs[1]}"

    def terms(coefs: np.ndarray) -> str:
        parts: List[str] = []
        for j, c in enumerate(coefs):
            if c == 0.0:
                continue
            mag = repr(abs(float(c)))
            if not parts:
                parts.append(f"{'-' if c < 0 else ''}{mag} {name(prog.var_index[j])}")
            else:
                parts.append(f"{'-' if c < 0 else '+'} {mag} {name(prog.var_index[j])}")
        return " ".join(parts) if parts else "0"

    lines = ["Minimize", f" obj: {terms(prog.objective)}", "Subject To"]
    lines.append(f" power: {terms(prog.power_row)} <= {repr(float(prog.p_th))}")
    for q in range(1, prog.params.buffer + 1):
        lines.append(f" balance_{q}: {terms(prog.balance_rows[q - 1])} = 0")
    lines.append(f" normalization: {terms(prog.norm_row)} = 1")
    lines.append("End")
    return "\n".join(lines) + "\n"
