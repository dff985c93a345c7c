"""A small deterministic dense two-phase simplex solver.

Solves   min c@x   s.t.   a_ub@x <= b_ub,  a_eq@x == b_eq,  x >= 0.

Bland's rule (lowest-index entering and leaving variable) guarantees
termination.  Everything here is tiny -- a few hundred columns at most --
so a dense tableau is the right tool and there is no external dependency.
All state is local to one call; concurrent use is safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["SimplexSolution", "SimplexError", "solve_lp"]

_PIVOT_TOL = 1e-10
_MAX_ITERS = 50_000


class SimplexError(Exception):
    """Numerical failure inside the simplex loop (never silently wrong)."""


@dataclass
class SimplexSolution:
    status: str  # 'optimal' | 'infeasible' | 'unbounded'
    objective: float
    x: np.ndarray
    ray: np.ndarray | None = field(default=None)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _as_2d(a, n):
    if a is None:
        return np.zeros((0, n))
    a = np.asarray(a, dtype=float)
    return a.reshape(0, n) if a.size == 0 else np.atleast_2d(a)


def solve_lp(c, a_ub=None, b_ub=None, a_eq=None, b_eq=None, *, tol=1e-9) -> SimplexSolution:
    c = np.asarray(c, dtype=float).reshape(-1)
    n = c.size
    a_ub = _as_2d(a_ub, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).reshape(-1)
    a_eq = _as_2d(a_eq, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).reshape(-1)
    if a_ub.shape != (b_ub.size, n) or a_eq.shape != (b_eq.size, n):
        raise ValueError("inconsistent LP dimensions")

    m_eq, m_ub = b_eq.size, b_ub.size
    m = m_eq + m_ub
    n_slack = m_ub

    # rows: equalities first, then inequalities with +1 slack each
    rows = np.zeros((m, n + n_slack))
    rhs = np.zeros(m)
    rows[:m_eq, :n] = a_eq
    rhs[:m_eq] = b_eq
    rows[m_eq:, :n] = a_ub
    rows[m_eq:, n : n + n_slack] = np.eye(m_ub)
    rhs[m_eq:] = b_ub

    # make every right-hand side nonnegative; negated slack columns become -1
    neg = rhs < 0
    rows[neg] *= -1.0
    rhs[neg] *= -1.0

    # artificials for equality rows and for negated inequality rows
    need_art = np.ones(m, dtype=bool)
    need_art[m_eq:] = neg[m_eq:]
    art_rows = np.flatnonzero(need_art)
    n_art = art_rows.size
    tableau = np.zeros((m, n + n_slack + n_art + 1))
    tableau[:, : n + n_slack] = rows
    for k, i in enumerate(art_rows):
        tableau[i, n + n_slack + k] = 1.0
    tableau[:, -1] = rhs

    basis = np.empty(m, dtype=int)
    art_of_row = {int(i): n + n_slack + k for k, i in enumerate(art_rows)}
    for i in range(m):
        basis[i] = art_of_row.get(i, n + (i - m_eq))  # artificial, else this row's slack

    total = n + n_slack + n_art
    if n_art:
        cost1 = np.zeros(total)
        cost1[n + n_slack :] = 1.0
        obj1, _ = _run_phase(tableau, basis, cost1, np.arange(total), tol)
        if obj1 is None:
            raise SimplexError("phase 1 unbounded (should be impossible)")
        if obj1 > max(tol, 1e-7 * (1.0 + abs(rhs).max(initial=0.0))):
            return SimplexSolution("infeasible", float("nan"), np.full(n, np.nan))
        tableau, basis = _evict_artificials(tableau, basis, n + n_slack, tol)

    cost2 = np.zeros(tableau.shape[1] - 1)
    cost2[:n] = c
    allowed = np.arange(n + n_slack)  # artificials stay out in phase 2
    obj2, bad_col = _run_phase(tableau, basis, cost2, allowed, tol)
    if obj2 is None:
        ray = np.zeros(tableau.shape[1] - 1)
        ray[bad_col] = 1.0
        ray[basis] = -tableau[:, bad_col]
        ray[np.abs(ray) < _PIVOT_TOL] = 0.0
        return SimplexSolution("unbounded", -np.inf, _extract(tableau, basis, n), ray=ray[:n])
    x = _extract(tableau, basis, n)
    return SimplexSolution("optimal", float(c @ x), x)


def _extract(tableau, basis, n):
    full = np.zeros(tableau.shape[1] - 1)
    full[basis] = tableau[:, -1]
    return full[:n]


def _run_phase(tableau, basis, cost, allowed, tol):
    """Bland-rule iterations: (objective, None), or (None, column) if unbounded."""
    for _ in range(_MAX_ITERS):
        y = cost[basis]
        red = cost[allowed] - y @ tableau[:, allowed]
        negative = np.flatnonzero(red < -tol)
        if negative.size == 0:
            return float(y @ tableau[:, -1]), None
        entering = int(allowed[negative[0]])  # Bland: lowest index
        col = tableau[:, entering]
        pos = np.flatnonzero(col > _PIVOT_TOL)
        if pos.size == 0:
            return None, entering
        ratios = tableau[pos, -1] / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + _PIVOT_TOL * (1.0 + abs(best))]
        leave = int(ties[np.argmin(basis[ties])])  # Bland: lowest basic index
        _pivot(tableau, leave, entering)
        basis[leave] = entering
    raise SimplexError("simplex iteration limit exceeded")


def _pivot(tableau, row, col):
    tableau[row] /= tableau[row, col]
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])
    tableau[:, col] = 0.0
    tableau[row, col] = 1.0


def _evict_artificials(tableau, basis, n_real, tol):
    """Pivot basic artificials out, or drop the (redundant) row if impossible."""
    drop = []
    for i in range(tableau.shape[0]):
        if basis[i] < n_real:
            continue
        candidates = np.flatnonzero(np.abs(tableau[i, :n_real]) > max(tol, _PIVOT_TOL))
        if candidates.size:
            _pivot(tableau, i, int(candidates[0]))
            basis[i] = int(candidates[0])
        else:
            drop.append(i)
    if drop:
        keep = [i for i in range(tableau.shape[0]) if i not in drop]
        tableau = tableau[keep]
        basis = basis[keep]
    return tableau, basis
