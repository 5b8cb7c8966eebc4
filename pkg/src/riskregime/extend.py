"""Extensions of a risk measure beyond bounded positions.

Three candidates are computed: the dual formula ``rho_tilde``, the sup-inf
truncation limit ``xi`` and the inf-sup truncation limit ``eta``.  They
always satisfy ``rho_tilde <= xi <= eta``; the first two agree, and the gap
to ``eta`` is what the regularity and tail-continuity tests probe.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .measure_core import INF, RandomVariable, Truncation, truncate
from .minkowski import Grids
from .reference import consistent_family
from .regimes import Regime
from .solver import RiskReport, dual_risk, primal_risk

M_GRID = tuple(2.0 ** i for i in range(0, 7))
N_GRID = tuple(2.0 ** i for i in range(0, 11))
ROUTE_TOL = 1e-6


class InconsistentRoutes(RuntimeError):
    """The two ways of computing eta disagree beyond tolerance."""


def _lower_inactive(X: RandomVariable, n: float) -> bool:
    return X.values.min(initial=INF) >= -n and (X.tail is None or min(X.tail.sides) >= -n)


def _upper_inactive(X: RandomVariable, m: float) -> bool:
    return X.values.max(initial=-INF) <= m and (X.tail is None or max(X.tail.sides) <= m)


class TruncationGrid:
    """Memoized ``rho(X^m_n)`` over an (m, n) product grid."""

    def __init__(self, r: Regime, X: RandomVariable):
        self.r, self.X = r, X
        self.values = {}

    def __call__(self, m: float, n: float) -> float:
        key = (m, n)
        if key not in self.values:
            self.values[key] = primal_risk(self.r, truncate(self.X, Truncation(n, m))).value
        return self.values[key]


def _deltas(seq: Sequence[float]) -> tuple:
    tail = [v for v in seq[-3:]]
    return tuple(b - a for a, b in zip(tail, tail[1:]))


def rho_tilde(r: Regime, X: RandomVariable, consistent=None) -> RiskReport:
    """Dual formula evaluated on X itself, tails included."""
    fam = consistent if consistent is not None else consistent_family(r)
    return dual_risk(r, X, fam)


def xi(r: Regime, X: RandomVariable, m_grid: Sequence[float] = M_GRID,
       n_grid: Sequence[float] = N_GRID, grid: Optional[TruncationGrid] = None) -> RiskReport:
    """``sup_m inf_n rho((-n) v X ^ m)`` over the product grid.

    The inner loop stops once the lower truncation is inactive, the outer
    once the upper one is.
    """
    grid = grid or TruncationGrid(r, X)
    outer = []
    for m in m_grid:
        inner = INF
        for n in n_grid:
            inner = min(inner, grid(m, n))
            if _lower_inactive(X, n):
                break
        outer.append(inner)
        if _upper_inactive(X, m):
            break
    value = max(outer)
    saturated = not _upper_inactive(X, m_grid[-1]) and len(outer) > 1 and outer[-1] > outer[-2] + 1e-12
    meta = {"m_grid": tuple(m_grid), "n_grid": tuple(n_grid), "sequence": outer,
            "last_deltas": _deltas(outer), "cutoff_limited": saturated}
    return RiskReport(value, None, "sup-inf", meta)


def eta(r: Regime, X: RandomVariable, n_grid: Sequence[float] = N_GRID,
        m_grid: Sequence[float] = M_GRID, consistent=None, grid: Optional[TruncationGrid] = None,
        tol: float = ROUTE_TOL, cross_check: bool = True) -> RiskReport:
    """``inf_n rho_tilde((-n) v X)``, cross-checked against the inf-sup grid.

    The grid route can only undershoot (its inner sup stops at the top of
    ``m_grid``), so it is flagged only when it exceeds the dual route, or when
    the upper truncation is already inactive and the two still differ.
    """
    fam = consistent if consistent is not None else consistent_family(r)
    route_b, argmin_n = INF, None
    seq = []
    for n in n_grid:
        v = dual_risk(r, X.clip(lower=-n), fam).value
        seq.append(v)
        # ties (within rounding) keep the smallest level
        if v < route_b - 1e-12 * max(1.0, abs(v)):
            route_b, argmin_n = v, n
        route_b = min(route_b, v)
        if _lower_inactive(X, n):
            break
    meta = {"n_grid": tuple(n_grid), "m_grid": tuple(m_grid), "argmin_n": argmin_n,
            "sequence": seq, "last_deltas": _deltas(seq)}
    if cross_check:
        grid = grid or TruncationGrid(r, X)
        route_a = INF
        for n in n_grid:
            sup_m = max(grid(m, n) for m in m_grid)
            route_a = min(route_a, sup_m)
            if _lower_inactive(X, n):
                break
        meta["grid_route"] = route_a
        top_inactive = _upper_inactive(X, m_grid[-1])
        both_finite = math.isfinite(route_a) and math.isfinite(route_b)
        if route_a > route_b + tol or (top_inactive and both_finite and abs(route_a - route_b) > tol):
            raise InconsistentRoutes(f"grid route {route_a} vs dual route {route_b}")
    return RiskReport(route_b, None, "inf-dual", meta)


@dataclass(frozen=True)
class ExtensionReport:
    rho_tilde: float
    xi: float
    eta: float
    gap: float
    verdict: str
    grids: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def chain_holds(self, tol: float = 1e-6) -> bool:
        return self.rho_tilde <= self.xi + tol and self.xi <= self.eta + tol


def extensions(r: Regime, X: RandomVariable, m_grid=M_GRID, n_grid=N_GRID, consistent=None
               ) -> ExtensionReport:
    """All three extensions at X, sharing one truncation grid."""
    grid = TruncationGrid(r, X)
    rt = rho_tilde(r, X, consistent)
    x = xi(r, X, m_grid, n_grid, grid)
    e = eta(r, X, n_grid, m_grid, consistent, grid)
    gap = e.value - rt.value if math.isfinite(rt.value) else math.nan
    return ExtensionReport(rt.value, x.value, e.value, gap, "computed",
                           {"m_grid": tuple(m_grid), "n_grid": tuple(n_grid)},
                           {"rho_tilde": rt.metadata, "xi": x.metadata, "eta": e.metadata})


def _gamma_probe(r, X, fam, eps_grid) -> Optional[float]:
    for eps in eps_grid:
        if dual_risk(r, X.positive_part() * (1.0 + eps), fam).value < INF:
            return eps
    return None


def regularity_check(r: Regime, X: RandomVariable, grids: Optional[Grids] = None, m_grid=M_GRID,
                     n_grid=N_GRID, consistent=None, tol: float = ROUTE_TOL,
                     multipliers: Sequence[float] = (1.0, 2.0, 4.0, 8.0)) -> ExtensionReport:
    """Test ``lim_m rho(n X 1{X >= m}) = 0`` and compare the extensions.

    When the tail condition holds the dual value and eta must agree; when it
    fails the measured gap is reported and nothing is asserted.
    """
    grids = grids or Grids()
    fam = consistent if consistent is not None else consistent_family(r)
    eps = _gamma_probe(r, X, fam, grids.eps_grid)
    rep = extensions(r, X, m_grid, n_grid, fam)
    meta = dict(rep.metadata)
    meta["gamma_eps"] = eps
    if eps is None:
        return ExtensionReport(rep.rho_tilde, rep.xi, rep.eta, rep.gap, "outside Gamma: no conclusion",
                               rep.grids, meta)
    tails = {}
    holds = True
    for n in multipliers:
        seq = []
        for m in grids.tail_grid:
            seq.append(dual_risk(r, X.tail_piece(m) * n, fam).value)
            if abs(seq[-1]) <= tol:
                break
            # a plateau away from zero over four thresholds ends the scan
            if len(seq) >= 4 and max(seq[-4:]) - min(seq[-4:]) <= tol:
                break
        tails[n] = seq[-1]
        holds &= abs(seq[-1]) <= tol
        if not holds:
            break
    meta["tail_condition"] = tails
    diag = [primal_risk(r, truncate(X, Truncation(k, k))).value for k in n_grid]
    meta["diagonal"] = diag[-1]
    if holds:
        verdict = "regular" if abs(rep.gap) <= tol else "regular condition holds but gap exceeds tolerance"
    else:
        verdict = "tail condition not detected"
    return ExtensionReport(rep.rho_tilde, rep.xi, rep.eta, rep.gap, verdict, rep.grids, meta)


@dataclass(frozen=True)
class TailContinuityReport:
    which: str
    target: float
    values: list
    thresholds: tuple
    converged: bool


def _evaluator(which: str, r: Regime, fam, n_grid):
    if which == "rho_tilde":
        return lambda Y: dual_risk(r, Y, fam).value
    if which == "eta":
        return lambda Y: eta(r, Y, n_grid, consistent=fam, cross_check=False).value
    raise ValueError(f"unknown extension {which!r}")


def tail_continuity_test(which: str, r: Regime, X: RandomVariable, Y: RandomVariable,
                         r_grid: Sequence[float] = tuple(2.0 ** i for i in range(1, 21)),
                         consistent=None, n_grid=N_GRID, tol: float = 1e-6) -> TailContinuityReport:
    """Follow ``f(X + Y 1{Y >= r})`` along ``r_grid`` and compare with ``f(X)``.

    The scan stops early once it reaches the target, or once it plateaus
    away from it over four thresholds.
    """
    fam = consistent if consistent is not None else consistent_family(r)
    f = _evaluator(which, r, fam, n_grid)
    target = f(X)
    values = []
    for t in r_grid:
        values.append(f(X + Y.tail_piece(t)))
        if abs(values[-1] - target) <= tol:
            break
        if len(values) >= 4 and max(values[-4:]) - min(values[-4:]) <= tol:
            break
    last = values[-1]
    ok = math.isfinite(target) and math.isfinite(last) and abs(last - target) <= tol
    return TailContinuityReport(which, target, values, tuple(r_grid), ok)
