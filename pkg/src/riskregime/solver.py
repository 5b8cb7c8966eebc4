"""Primal and dual evaluation of risk measures and support functions.

The primal value is the cheapest hedge: minimize the price of a security Z
such that ``X - Z`` is acceptable.  The dual value is the supremum of
``integral of X against mu - penalty(mu)`` over pricing-consistent scenarios.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .lp import INFEASIBLE, OPTIMAL, UNBOUNDED, LPProblem, lp_solve
from .measure_core import (INF, GeneralizedMeasure, RandomVariable, SpaceMismatch, TailUndefined,
                           integrate, same_space)
from .regimes import (AVaR, Entropic, IndexedDual, Intersection, InvalidRegime, LinearDual, Regime,
                      UnsupportedCombination, flatten)

TOL_M = 1e-10
BRACKET_CAP = 2.0 ** 60


class BracketFailure(RuntimeError):
    """No acceptable multiple of the positive security was found."""


class EmptyFamily(ValueError):
    """No pricing-consistent scenario is available."""


class Unsupported(ValueError):
    """The requested support-function evaluation is not implemented."""


@dataclass(frozen=True)
class RiskReport:
    """An extended-real risk value with its certificate.

    ``kind`` is ``"finite"`` or ``"+inf"``; infinite values are carried as
    ``math.inf`` together with that tag.
    """

    value: float
    certificate: object = None
    method: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if math.isnan(self.value) or self.value == -INF:
            raise InvalidRegime(f"risk value {self.value} is not proper")

    @property
    def kind(self) -> str:
        return "+inf" if self.value == INF else "finite"

    @property
    def is_finite(self) -> bool:
        return self.value != INF

    @property
    def cutoff_limited(self) -> bool:
        return bool(self.metadata.get("cutoff_limited", False))


# closed-form evaluators

def _check_space(P: GeneralizedMeasure, X: RandomVariable):
    if not same_space(P.space, X.space):
        raise SpaceMismatch("base measure and variable live on different spaces")


def avar_weights(P: GeneralizedMeasure, alpha: float, X: RandomVariable) -> np.ndarray:
    """Maximizing density in the AVaR dual set: fill the largest losses first."""
    _check_space(P, X)
    cap = P.weights / (1.0 - alpha)
    order = np.argsort(-X.values, kind="stable")
    caps = cap[order]
    before = np.concatenate([[0.0], np.cumsum(caps)[:-1]])
    take = np.clip(1.0 - before, 0.0, caps)
    q = np.zeros_like(cap)
    q[order] = take
    return q


def avar_eval(P: GeneralizedMeasure, alpha: float, X: RandomVariable) -> float:
    """Average value at risk of the loss ``X`` at level ``alpha`` (large losses are bad)."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if not P.is_regular:
        raise ValueError("AVaR base must be countably additive")
    q = avar_weights(P, alpha, X)
    return float(q @ X.values)


def _log_terms(P: GeneralizedMeasure, beta: float, X: RandomVariable):
    """Exponents and log-weights of the exponential moment, or None if it diverges."""
    _check_space(P, X)
    charged = P.weights > 0
    expo = list(beta * X.values[charged])
    logw = list(np.log(P.weights[charged]))
    if not P.is_regular:
        if X.tail is None:
            raise TailUndefined("base tail mass needs a declared tail")
        for s, lim in zip(P.tail_mass, X.tail.sides + (0.0,)):
            if s > 0:
                if lim == INF:
                    return None
                if lim != -INF:
                    expo.append(beta * lim)
                    logw.append(math.log(s))
    return np.array(expo), np.array(logw)


def entropic_eval(P: GeneralizedMeasure, beta: float, X: RandomVariable) -> float:
    """``(1/beta) log E[exp(beta X)]`` evaluated with a max shift."""
    terms = _log_terms(P, beta, X)
    if terms is None:
        return INF
    expo, logw = terms
    a = expo + logw
    top = a.max()
    return float((top + math.log(np.exp(a - top).sum())) / beta)


def gibbs_weights(P: GeneralizedMeasure, beta: float, X: RandomVariable) -> np.ndarray:
    """Density-tilted probability ``exp(beta X) P / E[exp(beta X)]`` on the atoms."""
    _check_space(P, X)
    a = np.full(P.space.size, -INF)
    charged = P.weights > 0
    a[charged] = beta * X.values[charged] + np.log(P.weights[charged])
    a -= a.max()
    w = np.exp(a)
    return w / w.sum()


def relative_entropy(Q: GeneralizedMeasure, P: GeneralizedMeasure) -> float:
    if not Q.is_regular:
        return INF
    q, p = Q.weights, P.weights
    if ((q > 0) & (p <= 0)).any():
        return INF
    m = q > 0
    return float(np.sum(q[m] * (np.log(q[m]) - np.log(p[m]))))


# acceptance tests

def acceptance_functional(spec, Y: RandomVariable) -> float:
    """A number that is ``<= 0`` exactly when ``Y`` is acceptable."""
    if isinstance(spec, LinearDual):
        if not spec.family:
            return -INF
        return max(integrate(mu, Y) - a for mu, a in spec.family)
    if isinstance(spec, IndexedDual):
        s = spec.scores(Y)
        best = float(s.max())
        if spec.asymptotic_oracle is not None:
            lim = spec.asymptotic_oracle(Y)
            if lim is not None:
                best = max(best, lim)
        return best
    if isinstance(spec, Entropic):
        Z = Y if spec.shift is None else Y - spec.shift
        return entropic_eval(spec.base, spec.beta, Z)
    if isinstance(spec, AVaR):
        Z = Y if spec.shift is None else Y - spec.shift
        return avar_eval(spec.base, spec.alpha, Z)
    if isinstance(spec, Intersection):
        return max(acceptance_functional(m, Y) for m in spec.members)
    raise TypeError(f"unknown acceptance specification {type(spec).__name__}")


# primal evaluation

def _indexed_ratio(spec: IndexedDual, X: RandomVariable, U: RandomVariable):
    """Smallest multiple z of U with every indexed constraint met, plus the binding index."""
    v = spec.scores(X)
    u = spec.integral_vector(U)
    if np.isnan(v).any():
        raise TailUndefined("undefined scenario integral")
    if (v == INF).any():
        return INF, int(np.argmax(v == INF)) + 1, False
    zero_u = u <= 0
    if (zero_u & (v > 0)).any():
        return INF, int(np.argmax(zero_u & (v > 0))) + 1, False
    ratios = np.where(zero_u, -INF, v / np.where(zero_u, 1.0, u))
    k = int(np.argmax(ratios))
    best = float(ratios[k])
    used_limit = False
    if spec.asymptotic_oracle is not None:
        lim_v = spec.asymptotic_oracle(X)
        lim_0 = spec.asymptotic_oracle(RandomVariable.constant(X.space, 0.0))
        lim_u = None
        if lim_0 is not None:
            lu = spec.asymptotic_oracle(U)
            lim_u = None if lu is None else lu - lim_0
        if lim_v is not None and lim_u is not None:
            if lim_u > 0:
                r = lim_v / lim_u
            else:
                r = INF if lim_v > 0 else -INF
            if r > best:
                return r, "limit", True
    return best, k + 1, used_limit


def _linear_constraints(fam, X, basis):
    v = np.array([integrate(mu, X) for mu, _ in fam], dtype=float)
    M = np.array([[integrate(mu, B) for B in basis] for mu, _ in fam], dtype=float).reshape(len(fam), -1)
    alpha = np.array([a for _, a in fam], dtype=float)
    return v, M, alpha


def primal_risk(r: Regime, X: RandomVariable, tol_m: float = TOL_M,
                bracket_cap: float = BRACKET_CAP) -> RiskReport:
    """``inf { p(Z) : Z in S, X - Z acceptable }``."""
    if not same_space(r.space, X.space):
        raise SpaceMismatch("position and regime live on different spaces")
    S, p = r.securities, r.pricing
    leaves = flatten(r.acceptance)
    nonlinear = [m for m in leaves if isinstance(m, (Entropic, AVaR))]
    indexed = [m for m in leaves if isinstance(m, IndexedDual)]
    linear = [m for m in leaves if isinstance(m, LinearDual)]
    fam = linear[0].family if linear else ()

    if (nonlinear or indexed) and S.dim > 1:
        raise UnsupportedCombination("nonlinear or indexed acceptance needs dim S = 1")

    if not nonlinear and not indexed:
        if not fam:
            raise InvalidRegime("empty scenario family: hedge prices are unbounded")
        v, M, alpha = _linear_constraints(fam, X, S.basis)
        if (v == INF).any():
            return RiskReport(INF, None, "lp", {"infeasible": True})
        keep = v > -INF
        v, M, alpha = v[keep], M[keep], alpha[keep]
        if S.dim == 1:
            z, k = _ratio(v - alpha, M[:, 0])
            if z == INF:
                return RiskReport(INF, None, "lp-1d", {"infeasible": True, "binding": k})
            if z == -INF:
                raise InvalidRegime("hedge prices are unbounded")
            return RiskReport(p.prices[0] * z, np.array([z]), "lp-1d", {"binding": k})
        prob = LPProblem(np.array(p.prices), -M, alpha - v, "min", free=[True] * S.dim)
        res = lp_solve(prob)
        if res.status == INFEASIBLE:
            return RiskReport(INF, None, "lp", {"infeasible": True})
        if res.status == UNBOUNDED:
            raise InvalidRegime("hedge prices are unbounded")
        return RiskReport(res.optimum, res.argument, "lp", {"iterations": res.iterations})

    U = S.unit
    p0 = p.prices[S.positive_index]
    z, k = -INF, None
    meta, methods = {}, []
    if fam:
        v, M, alpha = _linear_constraints(fam, X, S.basis)
        z, k = _ratio(v - alpha, M[:, 0])
        methods.append("lp-1d")
    for spec in indexed:
        zi, ki, _ = _indexed_ratio(spec, X, U)
        meta.setdefault("cutoffs", []).append(spec.k_max)
        meta["oracle_used"] = meta.get("oracle_used", False) or spec.asymptotic_oracle is not None
        meta["cutoff_limited"] = not meta["oracle_used"]
        methods.append("indexed-ratio")
        if zi > z:
            z, k = zi, ki
    for j, spec in enumerate(nonlinear):
        zj, how, extra = _nonlinear_multiple(spec, X, U, tol_m, bracket_cap)
        methods.append(how)
        meta.update(extra)
        if zj > z:
            z, k = zj, f"{type(spec).__name__.lower()}[{j}]"
    meta["binding"] = k
    method = "+".join(dict.fromkeys(methods))
    if z == INF:
        return RiskReport(INF, None, method, meta)
    if z == -INF:
        raise InvalidRegime("hedge prices are unbounded")
    return RiskReport(p0 * z, np.array([z]), method, meta)


def _nonlinear_multiple(spec, X, U, tol_m, cap):
    """Smallest multiple m of U with ``X - mU`` acceptable for one entropic or AVaR test."""
    u = U.values
    constant = U.tail is None or all(s == u[0] for s in U.tail.sides)
    if u.size and constant and np.all(u == u[0]) and u[0] > 0:
        # translation along a constant security shifts the functional by m * u
        return acceptance_functional(spec, X) / u[0], "closed-form", {}
    return _bisect(spec, X, U, tol_m, cap)


def _ratio(num: np.ndarray, u: np.ndarray):
    """Solve ``min z`` subject to ``num_i - z u_i <= 0`` with ``u_i >= 0``."""
    zero = u <= 0
    if (zero & (num > 0)).any():
        return INF, int(np.argmax(zero & (num > 0)))
    if (~zero).sum() == 0:
        return -INF, None
    ratios = np.where(zero, -INF, num / np.where(zero, 1.0, u))
    k = int(np.argmax(ratios))
    return float(ratios[k]), k


def _bisect(spec, X: RandomVariable, U: RandomVariable, tol_m: float, cap: float):
    """Root of the nonincreasing map ``m -> g(X - mU)`` to absolute tolerance ``tol_m``."""

    def g(m):
        return acceptance_functional(spec, X - U * m)

    hi = 1.0
    g_hi = g(hi)
    while g_hi > 0:
        hi *= 2.0
        if hi > cap:
            if g_hi == INF:
                return INF, "bisection", {"reason": "acceptance value infinite"}
            raise BracketFailure(f"no acceptable multiple of U up to {cap:g}")
        g_hi = g(hi)
    lo = -1.0
    while g(lo) <= 0:
        lo *= 2.0
        if -lo > cap:
            raise InvalidRegime("every multiple of U is acceptable")
    steps = 0
    while hi - lo > tol_m:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if g(mid) <= 0:
            hi = mid
        else:
            lo = mid
        steps += 1
    return hi, "bisection", {"steps": steps, "bracket": (lo, hi)}


# support functions

def _cone_rows(measures, target: GeneralizedMeasure):
    """Atom rows, plus tail rows when any measure carries tail mass."""
    with_tail = any(not m.is_regular for m in measures) or not target.is_regular
    cols = []
    for m in measures:
        col = m.weights
        if with_tail:
            col = np.concatenate([col, m.tail_mass])
        cols.append(col)
    rhs = target.weights
    if with_tail:
        rhs = np.concatenate([rhs, target.tail_mass])
    return np.column_stack(cols) if cols else np.zeros((rhs.size, 0)), rhs


def sigma_A(spec, mu: GeneralizedMeasure) -> float:
    """Support function ``sup { integral of Y against mu : Y acceptable }``."""
    if isinstance(spec, LinearDual):
        for m, _ in spec.family:
            if not same_space(m.space, mu.space):
                raise SpaceMismatch("measure and acceptance set live on different spaces")
        if not spec.family:
            return 0.0 if mu.mass == 0 else INF
        # dual form: cheapest conic representation of mu by the constraint measures
        A, b = _cone_rows(spec.measures, mu)
        res = lp_solve(LPProblem(spec.penalties, A_eq=A, b_eq=b))
        if res.status == INFEASIBLE:
            return INF
        if res.status == UNBOUNDED:
            return -INF
        return res.optimum
    if isinstance(spec, (Entropic, AVaR)):
        if abs(mu.mass - 1.0) > 1e-9:
            raise Unsupported("support function needs a probability for this acceptance set")
        offset = 0.0 if spec.shift is None else integrate(mu, spec.shift)
        if isinstance(spec, Entropic):
            return relative_entropy(mu, spec.base) / spec.beta + offset
        if not mu.is_regular:
            return INF
        dens = mu.density_against(spec.base)
        return offset if (dens <= 1.0 / (1.0 - spec.alpha) + 1e-12).all() else INF
    if isinstance(spec, IndexedDual):
        raise Unsupported("support function of an indexed family is not implemented")
    if isinstance(spec, Intersection):
        raise Unsupported("support function of an intersection needs an inf-convolution")
    raise TypeError(f"unknown acceptance specification {type(spec).__name__}")


def sigma_A_primal(spec: LinearDual, mu: GeneralizedMeasure) -> float:
    """Support function of a linear family by direct maximization over positions.

    Variables are the atom values and, when tail mass is present, the tail
    limits.  Kept alongside the conic form in :func:`sigma_A` as a cross-check.
    """
    A, b = _cone_rows(spec.measures, mu)
    res = lp_solve(LPProblem(b, A.T, spec.penalties, "max", free=[True] * b.size))
    if res.status == UNBOUNDED:
        return INF
    if res.status == INFEASIBLE:
        return -INF
    return res.optimum


# dual evaluation

@dataclass(frozen=True)
class DualCandidate:
    """A scenario attaining (or approaching) the dual supremum."""

    value: float
    measure: Optional[GeneralizedMeasure]
    penalty: float
    label: str


def _entropic_candidate(spec: Entropic, X, U, p0) -> DualCandidate:
    if not np.allclose(U.values, U.values[0]) or U.values[0] <= 0:
        raise UnsupportedCombination("entropic dual needs a constant positive security")
    c = p0 / U.values[0]
    Z = X if spec.shift is None else X - spec.shift
    val = entropic_eval(spec.base, spec.beta, Z)
    if val == INF:
        return DualCandidate(INF, None, 0.0, "entropic-divergent")
    q = GeneralizedMeasure(X.space, gibbs_weights(spec.base, spec.beta, Z), tag="gibbs")
    pen = sigma_A(spec, q)
    return DualCandidate(c * val, q.scaled(c), c * pen, "gibbs")


def _avar_candidate(spec: AVaR, X, U, p0) -> DualCandidate:
    """Charnes-Cooper LP for ``sup E_Q[X] p(U) / E_Q[U]`` over the AVaR dual set."""
    P = spec.base
    n = P.space.size
    Z = X if spec.shift is None else X - spec.shift
    cap = 1.0 / (1.0 - spec.alpha)
    obj = np.concatenate([p0 * Z.values, [0.0]])
    G = np.hstack([np.eye(n), -cap * P.weights[:, None]])
    A = np.vstack([np.concatenate([U.values, [0.0]]), np.concatenate([np.ones(n), [-1.0]])])
    res = lp_solve(LPProblem(obj, G, np.zeros(n), "max", A, np.array([1.0, 0.0])))
    if res.status != OPTIMAL:
        raise UnsupportedCombination(f"AVaR dual LP returned {res.status}")
    w = np.clip(res.argument[:n], 0.0, None)
    mu = GeneralizedMeasure(X.space, p0 * w, tag="avar-vertex")
    pen = 0.0 if spec.shift is None else integrate(mu, spec.shift)
    return DualCandidate(res.optimum, mu, pen, "avar-vertex")


def indexed_candidates(spec: IndexedDual, X: RandomVariable, U: RandomVariable, p0: float):
    """Rescaled per-index dual values ``p0 (v_k - alpha_k) / u_k`` and the oracle limit."""
    v = spec.scores(X)
    u = spec.integral_vector(U)
    vals = np.where(u > 0, p0 * v / np.where(u > 0, u, 1.0), -INF)
    if ((u <= 0) & (v > 0)).any():
        # a scenario invisible to the securities with positive excess: a ray to +inf
        vals = np.where((u <= 0) & (v > 0), INF, vals)
    lim = None
    if spec.asymptotic_oracle is not None:
        lv = spec.asymptotic_oracle(X)
        l0 = spec.asymptotic_oracle(RandomVariable.constant(X.space, 0.0))
        lu = spec.asymptotic_oracle(U)
        if lv is not None and l0 is not None and lu is not None:
            lim_u = lu - l0
            if lim_u > 0:
                lim = p0 * lv / lim_u
            elif lv > 0:
                lim = INF
    return vals, lim


def _indexed_measure(spec: IndexedDual, k: int, scale: float):
    try:
        mu, a = spec.member(k)
    except (IndexError, ValueError, KeyError):
        return None, None
    return mu.scaled(scale), a * scale


def dual_candidates(r: Regime, X: RandomVariable, consistent):
    """Every candidate value ``integral of X - penalty`` the family offers, plus metadata.

    Countable families contribute their best finite index and, when an
    asymptotic oracle is present, a ``singular-limit`` entry for the limit.
    """
    if not same_space(r.space, X.space):
        raise SpaceMismatch("position and regime live on different spaces")
    cands = []
    for i, (mu, a) in enumerate(consistent.members):
        if a == INF:
            continue
        cands.append(DualCandidate(integrate(mu, X) - a, mu, a, mu.tag or f"member[{i}]"))
    if consistent.has_rays and consistent.ray_excess(X) > 1e-12:
        cands.append(DualCandidate(INF, None, 0.0, "ray"))
    meta = {}
    if (consistent.indexed or consistent.parametric) and consistent.unit is None:
        raise UnsupportedCombination("indexed or parametric families need dim S = 1")
    for spec in consistent.indexed:
        U, p0 = consistent.unit
        vals, lim = indexed_candidates(spec, X, U, p0)
        k = int(np.argmax(vals))
        u_k = spec.integral_vector(U)[k]
        mu, a = _indexed_measure(spec, k + 1, p0 / u_k if u_k > 0 else 1.0)
        cands.append(DualCandidate(float(vals[k]), mu, a if a is not None else INF, f"k={k + 1}"))
        meta["k_max"] = spec.k_max
        meta["argmax_k"] = k + 1
        meta["oracle_used"] = lim is not None
        meta["cutoff_limited"] = lim is None
        if lim is not None:
            cands.append(DualCandidate(lim, None, 0.0, "singular-limit"))
    for spec in consistent.parametric:
        U, p0 = consistent.unit
        if isinstance(spec, Entropic):
            cands.append(_entropic_candidate(spec, X, U, p0))
        elif isinstance(spec, AVaR):
            cands.append(_avar_candidate(spec, X, U, p0))
        else:
            raise TypeError(f"unsupported parametric family {type(spec).__name__}")
    if not cands:
        raise EmptyFamily("no pricing-consistent scenario")
    return cands, meta


def dual_risk(r: Regime, X: RandomVariable, consistent) -> RiskReport:
    """``sup`` over the pricing-consistent family of ``integral of X - penalty``."""
    cands, meta = dual_candidates(r, X, consistent)
    best = cands[0]
    for c in cands[1:]:
        if c.value > best.value:
            best = c
    return RiskReport(best.value, best, "dual", meta)
