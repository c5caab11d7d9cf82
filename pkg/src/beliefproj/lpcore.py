"""Small dense linear program solver (two-phase primal simplex, Bland's rule).

Built for the many small programs this package solves (dominance pruning and
switch tests): deterministic pivoting, explicit statuses, and explicit
numerical-failure errors rather than silent infeasibility.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericalError

FEAS_TOL = 1e-9

LESS, EQUAL, GREATER = "<=", "=", ">="


@dataclass
class LinearProgram:
    """maximize objective . x subject to constraints and variable bounds.

    ``constraints`` is a list of (coefficients, relation, rhs) with relation
    one of "<=", "=", ">=". Bounds default to [0, +inf) per variable; a lower
    bound of None makes the variable free, a finite upper adds a cap.
    """

    objective: np.ndarray
    constraints: list
    lower: list | None = None
    upper: list | None = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        n = self.objective.shape[0]
        if self.lower is None:
            self.lower = [0.0] * n
        if self.upper is None:
            self.upper = [None] * n
        if len(self.lower) != n or len(self.upper) != n:
            raise InputError("bounds length does not match objective dimension")
        for coeffs, rel, _rhs in self.constraints:
            if np.asarray(coeffs).shape != (n,):
                raise InputError("constraint dimension does not match objective")
            if rel not in (LESS, EQUAL, GREATER):
                raise InputError(f"unknown relation {rel!r}")


@dataclass
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    value: float | None = None


def _pivot(T: np.ndarray, r: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]
    if r[col] != 0.0:
        r -= r[col] * T[row, :-1]
    basis[row] = col


def _run_simplex(T, basis, cost, tol, max_iter):
    """Bland-rule simplex on a canonical tableau; returns "optimal"/"unbounded"."""
    ncols = T.shape[1] - 1
    r = cost - (cost[basis] @ T[:, :-1] if len(basis) else 0.0)
    for _ in range(max_iter):
        enter = -1
        for j in range(ncols):
            if r[j] > tol:
                enter = j
                break
        if enter < 0:
            return "optimal"
        leave = -1
        best = np.inf
        for i in range(T.shape[0]):
            if T[i, enter] > tol:
                ratio = T[i, -1] / T[i, enter]
                if leave < 0 or ratio < best - tol:
                    best, leave = ratio, i
                elif ratio <= best + tol and basis[i] < basis[leave]:
                    best, leave = min(best, ratio), i
        if leave < 0:
            return "unbounded"
        _pivot(T, r, basis, leave, enter)
    raise NumericalError(f"simplex did not converge within {max_iter} pivots")


def solve_lp(lp: LinearProgram, tol: float = FEAS_TOL) -> LpResult:
    """Solve the program; statuses are explicit and pivoting is deterministic."""
    n = lp.objective.shape[0]

    # shift finite lower bounds to zero and collect rows in shifted space
    shift = np.array([0.0 if lo is None else float(lo) for lo in lp.lower])
    free = [lo is None for lo in lp.lower]
    rows = []
    for coeffs, rel, rhs in lp.constraints:
        coeffs = np.asarray(coeffs, dtype=float)
        rows.append((coeffs, rel, float(rhs) - float(coeffs @ shift)))
    for j in range(n):
        if lp.upper[j] is not None:
            cap = np.zeros(n)
            cap[j] = 1.0
            rows.append((cap, LESS, float(lp.upper[j]) - shift[j]))

    # split free variables into positive/negative parts
    col_plus = np.zeros(n, dtype=int)
    col_minus = np.full(n, -1, dtype=int)
    ncols = 0
    for j in range(n):
        col_plus[j] = ncols
        ncols += 1
        if free[j]:
            col_minus[j] = ncols
            ncols += 1

    m = len(rows)
    A = np.zeros((m, ncols))
    rel_list = []
    b = np.zeros(m)
    for i, (coeffs, rel, rhs) in enumerate(rows):
        row = np.zeros(ncols)
        row[col_plus] = coeffs
        for j in range(n):
            if free[j]:
                row[col_minus[j]] = -coeffs[j]
        if rhs < 0.0:
            row, rhs = -row, -rhs
            rel = {LESS: GREATER, GREATER: LESS, EQUAL: EQUAL}[rel]
        A[i] = row
        b[i] = rhs
        rel_list.append(rel)

    cost = np.zeros(ncols)
    cost[col_plus] = lp.objective
    for j in range(n):
        if free[j]:
            cost[col_minus[j]] = -lp.objective[j]

    # slack / surplus / artificial columns
    n_slack = sum(1 for rel in rel_list if rel == LESS)
    n_surplus = sum(1 for rel in rel_list if rel == GREATER)
    n_art = sum(1 for rel in rel_list if rel != LESS)
    total = ncols + n_slack + n_surplus + n_art
    T = np.zeros((m, total + 1))
    T[:, :ncols] = A
    T[:, -1] = b
    basis = np.zeros(m, dtype=int)
    si = ncols
    ai = ncols + n_slack + n_surplus
    art_start = ai
    for i, rel in enumerate(rel_list):
        if rel == LESS:
            T[i, si] = 1.0
            basis[i] = si
            si += 1
        else:
            if rel == GREATER:
                T[i, si] = -1.0
                si += 1
            T[i, ai] = 1.0
            basis[i] = ai
            ai += 1

    max_iter = 10_000 + 200 * (m + total)

    if n_art:
        cost1 = np.zeros(total)
        cost1[art_start:] = -1.0
        status = _run_simplex(T, basis, cost1, tol, max_iter)
        if status != "optimal":
            raise NumericalError("phase-1 simplex reported unbounded; program is malformed")
        if float(cost1[basis] @ T[:, -1]) < -tol:
            return LpResult("infeasible")
        # drive remaining artificials out of the basis or drop redundant rows
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if basis[i] >= art_start:
                pivot_col = -1
                for j in range(art_start):
                    if abs(T[i, j]) > tol:
                        pivot_col = j
                        break
                if pivot_col < 0:
                    keep[i] = False
                else:
                    dummy = np.zeros(total)
                    _pivot(T, dummy, basis, i, pivot_col)
        T = T[keep]
        basis = basis[keep]
        T = np.delete(T, np.s_[art_start:total], axis=1)

    cost2 = np.zeros(T.shape[1] - 1)
    cost2[:ncols] = cost
    status = _run_simplex(T, basis, cost2, tol, max_iter)
    if status == "unbounded":
        return LpResult("unbounded")

    full = np.zeros(T.shape[1] - 1)
    full[basis] = T[:, -1]
    x = shift + full[col_plus]
    for j in range(n):
        if free[j]:
            x[j] -= full[col_minus[j]]
    return LpResult("optimal", x, float(lp.objective @ x))
