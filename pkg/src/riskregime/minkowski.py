"""Gauge norms and membership in the Minkowski domain and its subclasses."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .measure_core import INF, RandomVariable
from .reference import consistent_family
from .regimes import Regime
from .solver import dual_risk

YES, NO, INCONCLUSIVE = "yes", "no", "inconclusive-at-cutoff"
LAMBDA_CAP = 2.0 ** 60
LAMBDA_FLOOR = 2.0 ** -60


@dataclass(frozen=True)
class Grids:
    k_grid: tuple = tuple(2.0 ** i for i in range(0, 11))
    tail_grid: tuple = tuple(2.0 ** i for i in range(1, 21))
    eps_grid: tuple = tuple(2.0 ** -i for i in range(1, 21))

    def __post_init__(self):
        for name in ("k_grid", "tail_grid", "eps_grid"):
            g = tuple(float(v) for v in getattr(self, name))
            if not g:
                raise ValueError(f"{name} must be nonempty")
            object.__setattr__(self, name, g)
        if any(b <= a for a, b in zip(self.k_grid, self.k_grid[1:])):
            raise ValueError("k_grid must be increasing")
        if any(b <= a for a, b in zip(self.tail_grid, self.tail_grid[1:])):
            raise ValueError("tail_grid must be increasing")


@dataclass(frozen=True)
class MembershipReport:
    in_LR: str
    in_HR: str
    in_MR: str
    in_Gamma: str
    in_CR: str
    evidence: list = field(default_factory=list)
    cutoffs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.in_MR == YES and self.in_HR != YES:
            raise ValueError("M membership without H membership")
        if self.in_HR == YES and self.in_LR != YES:
            raise ValueError("H membership without L membership")

    def as_dict(self) -> dict:
        return {"L": self.in_LR, "H": self.in_HR, "M": self.in_MR, "Gamma": self.in_Gamma, "C": self.in_CR}


def _family(r: Regime, consistent):
    return consistent if consistent is not None else consistent_family(r)


def rho_abs(r: Regime, X: RandomVariable, scale: float = 1.0, consistent=None) -> float:
    """Dual risk of ``|X| / scale``."""
    if not scale > 0:
        raise ValueError("scale must be positive")
    return dual_risk(r, X.abs() / scale, _family(r, consistent)).value


def gauge_norm(r: Regime, X: RandomVariable, c: float = 1.0, consistent=None,
               rel_tol: float = 1e-9) -> float:
    """``inf { lam > 0 : rho(|X| / lam) <= c }`` by bracketing and bisection."""
    return _gauge(r, X, c, _family(r, consistent), rel_tol)[0]


def _gauge(r, X, c, fam, rel_tol):
    """Gauge value plus whether an infinite answer is certified by every probe being infinite."""
    if not c > 0:
        raise ValueError("c must be positive")
    absX = X.abs()

    def f(lam):
        return dual_risk(r, absX / lam, fam).value

    hi = max(2.0 * X.sup_abs(), 1.0) if math.isfinite(X.sup_abs()) else 1.0
    all_inf = True
    v = f(hi)
    while v > c:
        all_inf &= v == INF
        hi *= 2.0
        if hi > LAMBDA_CAP:
            return INF, all_inf
        v = f(hi)
    lo = hi / 2.0
    while f(lo) <= c:
        hi = lo
        lo /= 2.0
        if lo < LAMBDA_FLOOR:
            return 0.0, False
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if f(mid) <= c:
            hi = mid
        else:
            lo = mid
    return hi, False


def norm_equivalence_constants(c: float) -> tuple:
    """``(A_c, B_c)`` with ``A_c ||X||_c <= ||X||_1 <= B_c ||X||_c``."""
    if not c > 0:
        raise ValueError("c must be positive")
    return (c, 1.0) if c <= 1 else (1.0, c)


def divergence_verdict(values: Sequence[float], tol: float = 1e-9) -> str:
    """Read growth across successive refinements: ``"finite"`` or ``"divergent"``.

    Any infinite value diverges.  With at least three values, a strictly
    increasing sequence whose increments do not decay diverges.
    """
    vals = list(values)
    if any(v == INF for v in vals):
        return "divergent"
    if len(vals) >= 3:
        a, b, c = vals[-3:]
        d1, d2 = b - a, c - b
        if d1 > tol * max(1.0, abs(b)) and d2 >= 0.5 * d1:
            return "divergent"
    return "finite"


def _across(pairs, make, fams):
    """Evaluate ``dual_risk`` of ``make(X)`` on every (regime, X) refinement."""
    return [float(dual_risk(r, make(X), fam).value) for (r, X), fam in zip(pairs, fams)]


def classify(r: Regime, X: RandomVariable, grids: Optional[Grids] = None, refinements: Sequence = (),
             consistent=None, tol: float = 1e-6) -> MembershipReport:
    """Membership of X in L, H, M, Gamma and C.

    ``refinements`` lists finer discretizations ``(regime, X)`` of the same
    position; every quantity is evaluated on all of them and read through
    :func:`divergence_verdict`.
    """
    grids = grids or Grids()
    pairs = [(r, X)] + list(refinements)
    fams = [_family(r, consistent)] + [consistent_family(rr) for rr, _ in refinements]
    evidence = []
    cutoffs = {"k_grid": (grids.k_grid[0], grids.k_grid[-1]),
               "tail_grid": (grids.tail_grid[0], grids.tail_grid[-1]),
               "eps_grid": (grids.eps_grid[-1], grids.eps_grid[0]),
               "refinements": len(pairs)}

    norms, certified = [], True
    for (rr, XX), fam in zip(pairs, fams):
        g, cert = _gauge(rr, XX, 1.0, fam, 1e-9)
        norms.append(g)
        certified &= cert
    evidence.append(("gauge_norm", 1.0, norms[-1]))
    if divergence_verdict(norms) == "finite":
        in_L = YES
    else:
        in_L = NO if certified and norms[0] == INF else INCONCLUSIVE

    # heart: rho(k|X|) finite for every k
    in_H = YES
    for k in grids.k_grid:
        vals = _across(pairs, lambda Y: Y.abs() * k, fams)
        evidence.append(("rho_k_abs", k, vals[-1]))
        if divergence_verdict(vals) == "divergent":
            in_H = NO
            break
    if in_L != YES and in_H == YES:
        in_H = in_L

    # M: tail risk rho(lam |X| 1{|X| >= t}) vanishing along the tail grid
    if in_H != YES:
        in_M = NO
    else:
        in_M = YES
        for lam in grids.k_grid:
            seq = []
            for t in grids.tail_grid:
                v = dual_risk(r, X.abs().tail_piece(t) * lam, fams[0]).value
                seq.append(v)
                if v <= tol:
                    break
            evidence.append(("tail_risk", lam, seq[-1]))
            if seq[-1] <= tol:
                continue
            if len(seq) >= 2 and abs(seq[-1] - seq[-2]) <= tol:
                in_M = NO
            else:
                in_M = INCONCLUSIVE
            break

    # Gamma: some (1 + eps) X^+ of finite risk
    in_G = INCONCLUSIVE
    for eps in grids.eps_grid:
        vals = _across(pairs, lambda Y: Y.positive_part() * (1.0 + eps), fams)
        if divergence_verdict(vals) == "finite":
            evidence.append(("gamma_eps", eps, vals[-1]))
            in_G = YES
            break

    rt = _across(pairs, lambda Y: Y, fams)
    evidence.append(("rho_tilde", 0.0, rt[-1]))
    finite_rt = divergence_verdict(rt) == "finite"
    if in_H == YES:
        in_C = NO
    elif in_L == YES and finite_rt and in_H == NO:
        in_C = YES
    elif in_L == NO or not finite_rt:
        in_C = NO
    else:
        in_C = INCONCLUSIVE
    return MembershipReport(in_L, in_H, in_M, in_G, in_C, evidence, cutoffs)
