"""Risk measurement regimes: acceptance set, security space and pricing functional.

Acceptance sets are given either dually, as a list of scenarios with penalty
levels (``A = {Y : integral of Y against mu_i <= alpha_i}``), or functionally
through the entropic or AVaR acceptance tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .lp import INFEASIBLE, OPTIMAL, UNBOUNDED, LPProblem, lp_solve
from .measure_core import (GeneralizedMeasure, RandomVariable, SampleSpace, SpaceMismatch,
                           integrate, same_space)


class UnsupportedCombination(ValueError):
    """The acceptance set and security space fall outside the implemented class."""


class NotFinite(ValueError):
    """The risk of the zero position is not a real number."""


class InvalidRegime(ValueError):
    """The finiteness condition on hedging prices fails."""


def _tail_rows(X: RandomVariable) -> list:
    if X.tail is None:
        return []
    return [s for s in X.tail.sides]


def value_rows(basis: Sequence[RandomVariable]) -> np.ndarray:
    """Matrix with one column per variable: atom values followed by finite tail limits."""
    cols = []
    for B in basis:
        cols.append(np.concatenate([B.values, np.array(_tail_rows(B), dtype=float)]))
    lengths = {c.size for c in cols}
    if len(lengths) != 1:
        raise ValueError("basis vectors disagree on tail declarations")
    return np.column_stack(cols)


@dataclass(frozen=True, eq=False)
class SecuritySpace:
    """Span of finitely many bounded securities with a designated positive one."""

    basis: tuple
    positive_index: int = 0

    def __post_init__(self):
        basis = tuple(self.basis)
        object.__setattr__(self, "basis", basis)
        if not basis:
            raise ValueError("security space needs at least one basis vector")
        space = basis[0].space
        for B in basis:
            if not same_space(B.space, space):
                raise SpaceMismatch("basis vectors live on different spaces")
            if not B.is_bounded:
                raise ValueError("securities must be bounded")
        M = value_rows(basis)
        if np.linalg.matrix_rank(M) < len(basis):
            raise ValueError("basis vectors are linearly dependent")
        col = M[:, self.positive_index]
        if (col < 0).any() or not (col > 0).any():
            raise ValueError("the designated security must be nonnegative and nonzero")

    @property
    def space(self) -> SampleSpace:
        return self.basis[0].space

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def unit(self) -> RandomVariable:
        return self.basis[self.positive_index]

    def combine(self, z: Sequence[float]) -> RandomVariable:
        z = np.asarray(z, dtype=float)
        if z.shape != (self.dim,):
            raise ValueError("coefficient vector has the wrong length")
        out = self.basis[0] * float(z[0])
        for B, c in zip(self.basis[1:], z[1:]):
            out = out + B * float(c)
        return out

    @classmethod
    def cash(cls, space: SampleSpace) -> "SecuritySpace":
        return cls((RandomVariable.constant(space, 1.0),))


@dataclass(frozen=True)
class PricingFunctional:
    prices: tuple

    def __post_init__(self):
        object.__setattr__(self, "prices", tuple(float(p) for p in self.prices))

    def price(self, z: Sequence[float]) -> float:
        return float(np.dot(self.prices, z))

    def is_strictly_positive(self, securities: SecuritySpace) -> bool:
        """No nonzero nonnegative security may have a nonpositive price.

        Looks for ``z`` with ``sum_j z_j B_j >= 0``, total value 1 and
        ``p(z) <= 0``; feasibility means positivity fails.
        """
        if len(self.prices) != securities.dim:
            raise ValueError("one price per basis vector is required")
        M = value_rows(securities.basis)
        d = securities.dim
        G = np.vstack([-M, np.array(self.prices)[None, :]])
        h = np.zeros(G.shape[0])
        A = M.sum(axis=0)[None, :]
        res = lp_solve(LPProblem(np.zeros(d), G, h, "min", A, np.array([1.0]), free=[True] * d))
        return res.status == INFEASIBLE


@dataclass(frozen=True, eq=False)
class LinearDual:
    """``A = {Y : integral of Y against mu_i <= alpha_i for every listed pair}``."""

    family: tuple

    def __post_init__(self):
        fam = tuple((mu, float(a)) for mu, a in self.family)
        for mu, a in fam:
            if not math.isfinite(a):
                raise ValueError("penalty levels must be finite")
        object.__setattr__(self, "family", fam)

    @property
    def measures(self) -> list:
        return [mu for mu, _ in self.family]

    @property
    def penalties(self) -> np.ndarray:
        return np.array([a for _, a in self.family], dtype=float)


@dataclass(frozen=True, eq=False)
class IndexedDual:
    """Countable scenario family ``k -> (mu_k, alpha_k)`` evaluated up to ``k_max``.

    ``integrals(Y, k_max)`` returns the vector of integrals of ``Y`` against
    ``mu_1 .. mu_kmax`` and ``penalties(k_max)`` the matching levels; both
    default to looping over ``member``.  ``asymptotic_oracle(Y)`` returns
    ``lim_k (integral of Y against mu_k - alpha_k)`` or ``None`` when unknown.
    """

    member: Callable[[int], tuple]
    k_max: int
    integrals: Optional[Callable[[RandomVariable, int], np.ndarray]] = None
    penalties: Optional[Callable[[int], np.ndarray]] = None
    asymptotic_oracle: Optional[Callable[[RandomVariable], Optional[float]]] = None
    label: str = "indexed"

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")

    def integral_vector(self, Y: RandomVariable, k_max: Optional[int] = None) -> np.ndarray:
        k_max = self.k_max if k_max is None else k_max
        if self.integrals is not None:
            return np.asarray(self.integrals(Y, k_max), dtype=float)
        return np.array([integrate(self.member(k)[0], Y) for k in range(1, k_max + 1)])

    def penalty_vector(self, k_max: Optional[int] = None) -> np.ndarray:
        k_max = self.k_max if k_max is None else k_max
        if self.penalties is not None:
            return np.asarray(self.penalties(k_max), dtype=float)
        return np.array([self.member(k)[1] for k in range(1, k_max + 1)])

    def scores(self, Y: RandomVariable, k_max: Optional[int] = None) -> np.ndarray:
        return self.integral_vector(Y, k_max) - self.penalty_vector(k_max)

    def with_k_max(self, k_max: int) -> "IndexedDual":
        return replace(self, k_max=int(k_max))


@dataclass(frozen=True, eq=False)
class Entropic:
    """``A = {Y : E[exp(beta (Y - shift))] <= 1}`` under the base probability."""

    base: GeneralizedMeasure
    beta: float
    shift: Optional[RandomVariable] = None

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if abs(self.base.mass - 1.0) > 1e-9:
            raise ValueError("entropic base must be a probability")


@dataclass(frozen=True, eq=False)
class AVaR:
    """``A = {Y : AVaR_alpha(Y - shift) <= 0}`` under the base probability."""

    base: GeneralizedMeasure
    alpha: float
    shift: Optional[RandomVariable] = None

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if abs(self.base.mass - 1.0) > 1e-9:
            raise ValueError("AVaR base must be a probability")
        if not self.base.is_regular:
            raise ValueError("AVaR base must be countably additive")


@dataclass(frozen=True, eq=False)
class Intersection:
    members: tuple

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members:
            raise ValueError("intersection needs at least one member")


AcceptanceSpec = Union[LinearDual, IndexedDual, Entropic, AVaR, Intersection]


def flatten(spec: AcceptanceSpec) -> list:
    """Members of nested intersections, with linear constraint lists merged."""
    if not isinstance(spec, Intersection):
        return [spec]
    out, linear = [], []
    for m in spec.members:
        for leaf in flatten(m):
            if isinstance(leaf, LinearDual):
                linear.extend(leaf.family)
            else:
                out.append(leaf)
    if linear or not out:
        out.insert(0, LinearDual(tuple(linear)))
    return out


def is_linear(spec: AcceptanceSpec) -> bool:
    return all(isinstance(m, LinearDual) for m in flatten(spec))


@dataclass(frozen=True, eq=False)
class Regime:
    """The triple (acceptance set, security space, pricing functional).

    ``model`` optionally names the probability the positions are read under;
    sensitivity and reference-model checks use it when present.
    """

    acceptance: AcceptanceSpec
    securities: SecuritySpace
    pricing: PricingFunctional
    name: str = "regime"
    model: Optional[GeneralizedMeasure] = None
    tags: tuple = field(default=())

    @property
    def space(self) -> SampleSpace:
        return self.securities.space

    @property
    def unit_price(self) -> float:
        return self.pricing.prices[self.securities.positive_index]

    def with_acceptance(self, acceptance: AcceptanceSpec) -> "Regime":
        return replace(self, acceptance=acceptance)

    def with_k_max(self, k_max: int) -> "Regime":
        return replace(self, acceptance=_map_indexed(self.acceptance, lambda s: s.with_k_max(k_max)))


def _map_indexed(spec, f):
    if isinstance(spec, IndexedDual):
        return f(spec)
    if isinstance(spec, Intersection):
        return Intersection(tuple(_map_indexed(m, f) for m in spec.members))
    return spec


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    check: str
    detail: str = ""


def validate_regime(r: Regime) -> ValidationReport:
    """Check that hedging prices are bounded above at the zero position."""
    from .solver import acceptance_functional

    S, p = r.securities, r.pricing
    if len(p.prices) != S.dim:
        return ValidationReport(False, "pricing", "one price per basis vector is required")
    if not p.is_strictly_positive(S):
        return ValidationReport(False, "pricing", "pricing functional is not strictly positive")
    leaves = flatten(r.acceptance)
    linear = [m for m in leaves if isinstance(m, LinearDual)]
    other = [m for m in leaves if not isinstance(m, LinearDual)]
    if other and S.dim > 1:
        raise UnsupportedCombination(
            "nonlinear or indexed acceptance needs a one-dimensional security space")

    if not other:
        fam = linear[0].family if linear else ()
        M = np.array([[integrate(mu, B) for B in S.basis] for mu, _ in fam]).reshape(-1, S.dim)
        alpha = np.array([a for _, a in fam])
        res = lp_solve(LPProblem(np.array(p.prices), M, alpha, "max", free=[True] * S.dim))
        if res.status == UNBOUNDED:
            return ValidationReport(False, "lp-boundedness", "hedge prices are unbounded at X = 0")
        if res.status == INFEASIBLE:
            return ValidationReport(True, "lp-boundedness", "no security is acceptable at X = 0")
        return ValidationReport(True, "lp-boundedness", f"sup of hedge prices {res.optimum:.6g}")

    U = S.unit
    if p.prices[S.positive_index] <= 0:
        return ValidationReport(False, "pricing", "the positive security needs a positive price")
    for m in other:
        if isinstance(m, AVaR):
            charged = m.base.weights > 0
            if (U.values[charged] <= 0).any():
                return ValidationReport(False, "avar-unit", "U must be positive on charged atoms")
        if isinstance(m, IndexedDual):
            u = m.integral_vector(U)
            if not (u > 0).any():
                return ValidationReport(False, "indexed-boundedness",
                                        "no scenario charges the positive security")
    # monotone root existence: g(mU) must become positive for large m
    m = 1.0
    while m <= 2.0 ** 60:
        if acceptance_functional(r.acceptance, U * m) > 0:
            return ValidationReport(True, "monotone-root", f"g(mU) > 0 at m = {m:g}")
        m *= 2.0
    return ValidationReport(False, "monotone-root", "acceptance holds for every multiple of U")


def shift_acceptance(spec: AcceptanceSpec, Z: RandomVariable) -> AcceptanceSpec:
    """Translate the acceptance set by ``Z``: Y is accepted iff ``Y - Z`` was."""
    if isinstance(spec, LinearDual):
        return LinearDual(tuple((mu, a + integrate(mu, Z)) for mu, a in spec.family))
    if isinstance(spec, IndexedDual):
        base = spec

        def member(k):
            mu, a = base.member(k)
            return mu, a + integrate(mu, Z)

        def penalties(k_max):
            return base.penalty_vector(k_max) + base.integral_vector(Z, k_max)

        oracle = None
        if base.asymptotic_oracle is not None:
            def oracle(Y):
                return base.asymptotic_oracle(Y - Z)
        return replace(spec, member=member, penalties=penalties, asymptotic_oracle=oracle)
    if isinstance(spec, (Entropic, AVaR)):
        shift = Z if spec.shift is None else spec.shift + Z
        return replace(spec, shift=shift)
    if isinstance(spec, Intersection):
        return Intersection(tuple(shift_acceptance(m, Z) for m in spec.members))
    raise TypeError(f"unknown acceptance specification {type(spec).__name__}")


def normalize_regime(r: Regime, tol: float = 1e-15) -> Regime:
    """Translate the acceptance set along U so that the zero position has zero risk."""
    from .solver import primal_risk

    zero = RandomVariable.constant(r.space, 0.0)
    rho0 = primal_risk(r, zero).value
    if not math.isfinite(rho0):
        raise NotFinite(f"risk of the zero position is {rho0}")
    if abs(rho0) <= tol:
        return r
    shift = rho0 / r.unit_price
    return replace(r, acceptance=shift_acceptance(r.acceptance, r.securities.unit * shift))
