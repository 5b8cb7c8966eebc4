"""Dense two-phase simplex with Bland's anti-cycling rule.

Problems here are tiny (a handful of variables, at most a few thousand rows),
so a plain tableau is fast enough and, more to the point, deterministic: the
same input always walks the same pivot path.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

OPTIMAL = "Optimal"
UNBOUNDED = "Unbounded"
INFEASIBLE = "Infeasible"

PIVOT_TOL = 1e-11
COST_TOL = 1e-11
FEAS_TOL = 1e-9


class NumericalBreakdown(RuntimeError):
    """The simplex hit its iteration cap or lost feasibility to rounding."""


@dataclass(frozen=True)
class LPProblem:
    """Optimize ``objective @ x`` subject to ``G x <= h`` and ``A_eq x = b_eq``.

    Variables are nonnegative unless flagged in ``free``.
    """

    objective: np.ndarray
    G: Optional[np.ndarray] = None
    h: Optional[np.ndarray] = None
    sense: str = "min"
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    free: Optional[Sequence[bool]] = None

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).ravel()
        d = c.size
        object.__setattr__(self, "objective", c)
        G = np.zeros((0, d)) if self.G is None else np.asarray(self.G, dtype=float).reshape(-1, d)
        h = np.zeros(0) if self.h is None else np.asarray(self.h, dtype=float).ravel()
        A = np.zeros((0, d)) if self.A_eq is None else np.asarray(self.A_eq, dtype=float).reshape(-1, d)
        b = np.zeros(0) if self.b_eq is None else np.asarray(self.b_eq, dtype=float).ravel()
        if G.shape[0] != h.size or A.shape[0] != b.size:
            raise ValueError("constraint rows and right-hand sides disagree")
        for arr in (c, G, h, A, b):
            if not np.isfinite(arr).all():
                raise ValueError("LP data must be finite")
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        free = np.zeros(d, dtype=bool) if self.free is None else np.asarray(self.free, dtype=bool)
        if free.shape != (d,):
            raise ValueError("free mask must have one entry per variable")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "A_eq", A)
        object.__setattr__(self, "b_eq", b)
        object.__setattr__(self, "free", free)

    @property
    def n_vars(self) -> int:
        return self.objective.size


@dataclass(frozen=True)
class LPResult:
    status: str
    optimum: float
    argument: Optional[np.ndarray]
    iterations: int


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    factor = T[:, col].copy()
    factor[row] = 0.0
    T -= np.outer(factor, T[row])


def _run(T: np.ndarray, basis: np.ndarray, allowed: np.ndarray, max_iter: int, used: int):
    """Minimize the cost row (last row) of tableau ``T`` in place.

    Bland's rule: the entering column is the lowest-index improving column, and
    among tied ratio rows the leaving variable has the lowest index.
    Returns ``(status, iterations)``.
    """
    m = T.shape[0] - 1
    it = used
    while True:
        costs = T[-1, :-1]
        cand = np.flatnonzero((costs < -COST_TOL) & allowed)
        if cand.size == 0:
            return OPTIMAL, it
        col = int(cand[0])
        column = T[:m, col]
        pos = column > PIVOT_TOL
        if not pos.any():
            return UNBOUNDED, it
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / column[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))
        row = int(ties[np.argmin(basis[ties])])
        _pivot(T, row, col)
        basis[row] = col
        it += 1
        if it >= max_iter:
            raise NumericalBreakdown(f"simplex exceeded {max_iter} iterations")


def lp_solve(problem: LPProblem, max_iter: Optional[int] = None) -> LPResult:
    """Solve a small dense LP by the two-phase simplex method."""
    c0 = problem.objective if problem.sense == "min" else -problem.objective
    d = problem.n_vars
    free = problem.free
    # split free variables x = x+ - x-
    cols = [problem.G, -problem.G[:, free]]
    G = np.hstack(cols)
    A = np.hstack([problem.A_eq, -problem.A_eq[:, free]])
    c = np.concatenate([c0, -c0[free]])
    n = c.size
    mi, me = G.shape[0], A.shape[0]
    m = mi + me

    # rows: G x + s = h, then A x = b; flip signs so the rhs is nonnegative
    M = np.zeros((m, n + mi))
    rhs = np.concatenate([problem.h, problem.b_eq])
    M[:mi, :n] = G
    M[:mi, n:n + mi] = np.eye(mi)
    M[mi:, :n] = A
    sign = np.where(rhs < 0, -1.0, 1.0)
    M *= sign[:, None]
    rhs = rhs * sign

    # slack columns that stayed +1 can start in the basis; other rows get artificials
    basis = np.full(m, -1, dtype=int)
    for i in range(mi):
        if sign[i] > 0:
            basis[i] = n + i
    need = np.flatnonzero(basis < 0)
    n_struct = n + mi
    n_art = need.size
    T = np.zeros((m + 1, n_struct + n_art + 1))
    T[:m, :n_struct] = M
    T[:m, -1] = rhs
    for j, i in enumerate(need):
        T[i, n_struct + j] = 1.0
        basis[i] = n_struct + j
    if max_iter is None:
        max_iter = 50 * (m + n_struct) + 1000

    iters = 0
    if n_art:
        T[-1, :] = 0.0
        T[-1, n_struct:n_struct + n_art] = 1.0
        for i in need:
            T[-1] -= T[i]
        allowed = np.ones(n_struct + n_art, dtype=bool)
        _, iters = _run(T, basis, allowed, max_iter, iters)
        if -T[-1, -1] > FEAS_TOL * max(1.0, np.abs(rhs).max(initial=0.0)):
            return LPResult(INFEASIBLE, np.nan, None, iters)
        # drive zero-level artificials out of the basis, dropping redundant rows
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if basis[i] >= n_struct:
                row = T[i, :n_struct]
                nz = np.flatnonzero(np.abs(row) > PIVOT_TOL)
                if nz.size:
                    _pivot(T, i, int(nz[0]))
                    basis[i] = int(nz[0])
                else:
                    keep[i] = False
        if not keep.all():
            rows = np.concatenate([np.flatnonzero(keep), [m]])
            T = T[rows]
            basis = basis[keep]
            m = basis.size

    # phase two: original costs, artificials barred from entering
    T[-1, :] = 0.0
    T[-1, :n] = c
    for i in range(m):
        cb = T[-1, basis[i]]
        if cb != 0.0:
            T[-1] -= cb * T[i]
    allowed = np.zeros(T.shape[1] - 1, dtype=bool)
    allowed[:n_struct] = True
    status, iters = _run(T, basis, allowed, max_iter, iters)
    if status == UNBOUNDED:
        return LPResult(UNBOUNDED, -np.inf if problem.sense == "min" else np.inf, None, iters)

    z = np.zeros(T.shape[1] - 1)
    z[basis] = T[:m, -1]
    x_split = z[:n]
    x = x_split[:d].copy()
    x[free] -= x_split[d:]
    value = float(problem.objective @ x)
    return LPResult(OPTIMAL, value, x, iters)

