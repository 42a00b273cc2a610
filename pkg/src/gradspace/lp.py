"""Dense linear programming over box bounds with optional equality rows.

Solved with a bounded-variable primal simplex: box bounds are handled
natively (nonbasic variables rest at a bound), equalities get artificial
variables in a phase-1 feasibility pass, and Bland's rule breaks ties so the
pivot sequence is deterministic and cycle-free. Dense linear algebra is fine
at the intended scale (a handful of equality rows, a few hundred variables).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import Hyperrectangle

__all__ = ["LinearProgram", "LpSolution", "LpStatus", "solve", "minimize_linear_over_box"]

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-9
_MAX_ITER = 5000


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    """min objective^T s subject to eq_matrix s = eq_rhs and box bounds."""

    objective: np.ndarray
    box: Hyperrectangle
    eq_matrix: np.ndarray | None = None
    eq_rhs: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float)
        if not np.all(np.isfinite(c)):
            raise ValueError("objective contains non-finite entries")
        if c.ndim != 1 or c.size != self.box.dimension:
            raise ValueError("objective length must match the box dimension")
        object.__setattr__(self, "objective", c)
        if (self.eq_matrix is None) != (self.eq_rhs is None):
            raise ValueError("eq_matrix and eq_rhs must be given together")
        if self.eq_matrix is not None:
            A = np.asarray(self.eq_matrix, dtype=float)
            r = np.asarray(self.eq_rhs, dtype=float)
            if not (np.all(np.isfinite(A)) and np.all(np.isfinite(r))):
                raise ValueError("equality data contains non-finite entries")
            if A.ndim != 2 or A.shape[1] != self.box.dimension:
                raise ValueError("eq_matrix must be (a, d) with d the box dimension")
            if r.shape != (A.shape[0],):
                raise ValueError("eq_rhs length must match eq_matrix rows")
            if A.shape[0] > A.shape[1]:
                raise ValueError("more equality rows than variables")
            object.__setattr__(self, "eq_matrix", A)
            object.__setattr__(self, "eq_rhs", r)


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    point: np.ndarray | None = None
    objective_value: float | None = None


def minimize_linear_over_box(c, box: Hyperrectangle) -> tuple[float, np.ndarray]:
    """Closed-form minimizer of c^T s over a box: each coordinate sits at a bound.

    Zero coefficients tie toward the lower bound so the result is deterministic.
    """
    c = np.asarray(c, dtype=float)
    if not np.all(np.isfinite(c)):
        raise ValueError("objective contains non-finite entries")
    if c.shape != (box.dimension,):
        raise ValueError("objective length must match the box dimension")
    point = np.where(c < 0.0, box.upper, box.lower)
    return float(c @ point), point


def solve(lp: LinearProgram) -> LpSolution:
    """Solve the program; deterministic for fixed input data."""
    box = lp.box
    if lp.eq_matrix is None:
        value, point = minimize_linear_over_box(lp.objective, box)
        return LpSolution(LpStatus.OPTIMAL, point, value)

    A, r = lp.eq_matrix, lp.eq_rhs
    # drop zero rows; a zero row with nonzero rhs is an immediate contradiction
    scale = max(1.0, float(np.max(np.abs(A))) if A.size else 1.0)
    row_mag = np.max(np.abs(A), axis=1) if A.size else np.zeros(A.shape[0])
    zero_rows = row_mag <= 1e-14 * scale
    if np.any(zero_rows):
        if np.any(np.abs(r[zero_rows]) > FEAS_TOL * (1.0 + np.abs(r[zero_rows]))):
            return LpSolution(LpStatus.INFEASIBLE)
        A, r = A[~zero_rows], r[~zero_rows]
    if A.shape[0] == 0:
        value, point = minimize_linear_over_box(lp.objective, box)
        return LpSolution(LpStatus.OPTIMAL, point, value)

    status, x = _bounded_simplex(lp.objective, A, r, box.lower, box.upper)
    if status is not LpStatus.OPTIMAL:
        return LpSolution(status)

    point = np.clip(x, box.lower, box.upper)
    resid = np.max(np.abs(A @ point - r)) if A.size else 0.0
    if resid > 1e-8 * (1.0 + np.linalg.norm(r)):
        raise RuntimeError(f"simplex returned an inaccurate point (residual {resid:.3e})")
    return LpSolution(LpStatus.OPTIMAL, point, float(lp.objective @ point))


def _bounded_simplex(c, A, b, lower, upper):
    """Two-phase bounded-variable simplex. Returns (status, structural point)."""
    m, n = A.shape
    # phase 1: structurals at their lower bounds, one artificial per row
    x_init = lower.copy()
    resid = b - A @ x_init
    art_sign = np.where(resid >= 0.0, 1.0, -1.0)
    A_aug = np.hstack([A, np.diag(art_sign)])
    lo = np.concatenate([lower, np.zeros(m)])
    hi = np.concatenate([upper, np.full(m, np.inf)])
    basis = np.arange(n, n + m)
    at_upper = np.zeros(n + m, dtype=bool)
    allowed = np.ones(n + m, dtype=bool)

    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    status = _simplex_loop(c1, A_aug, b, lo, hi, basis, at_upper, allowed)
    if status is not LpStatus.OPTIMAL:
        raise RuntimeError("phase-1 simplex failed to terminate at an optimum")
    x = _solution_values(A_aug, b, lo, hi, basis, at_upper)
    if float(np.sum(x[n:])) > FEAS_TOL * (1.0 + float(np.sum(np.abs(b)))):
        return LpStatus.INFEASIBLE, None

    # phase 2: pin artificials at zero and optimize the true objective
    hi[n:] = 0.0
    allowed[n:] = False
    c2 = np.concatenate([c, np.zeros(m)])
    status = _simplex_loop(c2, A_aug, b, lo, hi, basis, at_upper, allowed)
    if status is not LpStatus.OPTIMAL:
        return status, None
    x = _solution_values(A_aug, b, lo, hi, basis, at_upper)
    return LpStatus.OPTIMAL, x[:n]


def _solution_values(A, b, lo, hi, basis, at_upper):
    n = A.shape[1]
    x = np.where(at_upper, np.where(np.isfinite(hi), hi, 0.0), lo)
    nb = np.ones(n, dtype=bool)
    nb[basis] = False
    B = A[:, basis]
    x[basis] = np.linalg.solve(B, b - A[:, nb] @ x[nb])
    return x


def _simplex_loop(c, A, b, lo, hi, basis, at_upper, allowed):
    m, n = A.shape
    fixed = (hi - lo) <= 0.0  # pinned variables never enter
    for _ in range(_MAX_ITER):
        nb = np.ones(n, dtype=bool)
        nb[basis] = False
        xN = np.where(at_upper, np.where(np.isfinite(hi), hi, 0.0), lo)
        B = A[:, basis]
        xB = np.linalg.solve(B, b - A[:, nb] @ xN[nb])
        y = np.linalg.solve(B.T, c[basis])
        red = c - A.T @ y

        enter = -1
        from_upper = False
        for j in range(n):  # Bland: smallest eligible index
            if not nb[j] or not allowed[j] or fixed[j]:
                continue
            if not at_upper[j] and red[j] < -PIVOT_TOL:
                enter, from_upper = j, False
                break
            if at_upper[j] and red[j] > PIVOT_TOL:
                enter, from_upper = j, True
                break
        if enter < 0:
            return LpStatus.OPTIMAL

        w = np.linalg.solve(B, A[:, enter])
        move = w if from_upper else -w  # change in basic values per unit step

        t_best = hi[enter] - lo[enter]  # cap: entering variable flips to its other bound
        leave_pos = -1
        leave_to_upper = False
        for i in range(m):
            di = move[i]
            if di > PIVOT_TOL:
                ti = (hi[basis[i]] - xB[i]) / di if np.isfinite(hi[basis[i]]) else np.inf
                to_upper = True
            elif di < -PIVOT_TOL:
                ti = (xB[i] - lo[basis[i]]) / (-di)
                to_upper = False
            else:
                continue
            if not np.isfinite(ti):
                continue  # an unbounded ratio never blocks
            ti = max(ti, 0.0)
            better = ti < t_best - 1e-12
            tie = abs(ti - t_best) <= 1e-12 and leave_pos >= 0 and basis[i] < basis[leave_pos]
            if better or tie:
                t_best = ti
                leave_pos = i
                leave_to_upper = to_upper
        if not np.isfinite(t_best):
            return LpStatus.UNBOUNDED
        if leave_pos < 0:
            at_upper[enter] = not at_upper[enter]
        else:
            leaving = basis[leave_pos]
            basis[leave_pos] = enter
            at_upper[leaving] = leave_to_upper
            at_upper[enter] = False  # status is meaningless while basic; reset
    raise RuntimeError("simplex iteration limit reached (possible cycling)")
