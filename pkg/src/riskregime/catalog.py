"""Built-in regimes: the five worked examples plus the strong-reference counterexample."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .measure_core import GeneralizedMeasure, RandomVariable, SampleSpace, Tail
from .regimes import (AVaR, Entropic, IndexedDual, Intersection, LinearDual, PricingFunctional,
                      Regime, SecuritySpace)

ORACLE_SCALES = (2 ** 40, 2 ** 50, 2 ** 60)


@dataclass(frozen=True)
class Example:
    regime: Regime
    inputs: dict
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Builtin:
    name: str
    summary: str
    reproduces: str
    tags: tuple
    build: Callable[..., Example]


def identity(points):
    return np.asarray(points, dtype=float)


def _zero(points):
    return np.zeros(np.shape(points))


def geometric_weights(n: int) -> np.ndarray:
    """``2^-w`` on ``w = 1..n`` with the remaining mass put on the last atom."""
    w = 2.0 ** -np.arange(1, n + 1, dtype=float)
    w[-1] += 1.0 - w.sum()
    return w


# symmetric three-point family: (delta_k + delta_-k) / 2k + (1 - 1/k) delta_0

def symmetric_member(space: SampleSpace, k: int):
    if k > (space.truncation_index or 0):
        raise IndexError(f"member {k} leaves the window")
    w = np.zeros(space.size)
    w[space.index_of_point(k)] += 0.5 / k
    w[space.index_of_point(-k)] += 0.5 / k
    w[space.index_of_point(0)] += 1.0 - 1.0 / k
    return GeneralizedMeasure(space, w, tag=f"Q[{k}]"), 0.0


def symmetric_integrals(Y: RandomVariable, k_max: int) -> np.ndarray:
    ks = np.arange(1, k_max + 1, dtype=np.int64)
    centre = float(Y.at(np.array([0]))[0])
    return (Y.at(ks) + Y.at(-ks)) / (2.0 * ks) + (1.0 - 1.0 / ks) * centre


def symmetric_limit(Y: RandomVariable) -> Optional[float]:
    """``lim_k`` of the symmetric three-point integrals.

    Finite tails make the outer terms vanish.  Otherwise the generating rule
    is evaluated at very large indices; a settled value is returned, a value
    running off monotonically is reported as infinite.
    """
    centre = float(Y.at(np.array([0]))[0])
    if Y.tail is not None and all(math.isfinite(s) for s in Y.tail.sides):
        return centre
    if Y.rule is None:
        return None
    vals = []
    for K in ORACLE_SCALES:
        pts = np.array([K, -K], dtype=np.int64)
        up, down = Y.at(pts)
        vals.append((up + down) / (2.0 * K) + (1.0 - 1.0 / K) * centre)
    a, b, c = vals
    if abs(c - b) <= 1e-6 * max(1.0, abs(c)):
        return float(c)
    if c > b > a:
        return math.inf
    if c < b < a:
        return -math.inf
    return None


def symmetric_family(space: SampleSpace, k_max: int) -> IndexedDual:
    return IndexedDual(
        member=lambda k: symmetric_member(space, k),
        k_max=k_max,
        integrals=symmetric_integrals,
        penalties=lambda K: np.zeros(K),
        asymptotic_oracle=symmetric_limit,
        label="Q",
    )


def symmetric_mixture(space: SampleSpace) -> GeneralizedMeasure:
    """``sum_k 2^-k Q_k`` restricted to the window and renormalized."""
    N = space.truncation_index
    w = np.zeros(space.size)
    for k in range(1, N + 1):
        mu, _ = symmetric_member(space, k)
        w += 2.0 ** -k * mu.weights
    return GeneralizedMeasure(space, w / w.sum(), tag="P")


def _cash_regime(acceptance, space, name, model=None, tags=()):
    return Regime(acceptance, SecuritySpace.cash(space), PricingFunctional((1.0,)), name, model, tags)


# the examples

def build_example_6_1(N: int = 30, two_dim: bool = True, A: tuple = (1, 2)) -> Example:
    """Acceptance by a countably additive and a tail-mass scenario; hedging with 1_A and cash."""
    space = SampleSpace.naturals(N)
    zeta = GeneralizedMeasure(space, geometric_weights(N), tag="zeta")
    nu = GeneralizedMeasure(space, np.zeros(N), 1.0, tag="nu")
    acceptance = LinearDual(((zeta, 0.0), (nu, 1.0)))
    one = RandomVariable.constant(space, 1.0)
    if two_dim:
        ind_A = RandomVariable.indicator(space, A)
        zA = float(zeta.weights[[space.index_of(a) for a in A]].sum())
        S = SecuritySpace((one, ind_A))
        p = PricingFunctional((1.0, zA))
    else:
        S = SecuritySpace((one,))
        p = PricingFunctional((1.0,))
    name = "example6.1" if two_dim else "example6.1-cash"
    regime = Regime(acceptance, S, p, name, zeta, ())
    pts = np.arange(1, N + 1)
    inputs = {
        "indicator_1": RandomVariable.indicator(space, [1]),
        "reciprocal": RandomVariable(space, 1.0 / pts, Tail.limit(0.0), lambda q: 1.0 / np.asarray(q, float)),
        "step_10": RandomVariable(space, (pts >= 10).astype(float), Tail.limit(1.0),
                                  lambda q: (np.asarray(q) >= 10).astype(float)),
    }
    return Example(regime, inputs, {"zeta": zeta, "nu": nu})


def build_example_6_2(N: int = 64, k_max: int = 10 ** 6) -> Example:
    """Coherent symmetric family on the integers: the two extensions differ at the identity."""
    space = SampleSpace.integers(N)
    fam = symmetric_family(space, k_max)
    regime = _cash_regime(fam, space, "example6.2", symmetric_mixture(space), ("coherent",))
    X = RandomVariable.from_rule(space, identity, Tail.divergent(two_sided=True))
    return Example(regime, {"identity": X})


def exponential_grid(extent_exp: int = 7, fine_step: float = 1 / 32, fine_end: float = 8.0,
                     ratio: float = 1.02):
    """Cells on ``(0, 2^extent_exp]``: uniform near zero, geometric beyond ``fine_end``."""
    L = 2.0 ** extent_exp
    fine = np.arange(0.0, fine_end, fine_step)
    n_geo = int(math.ceil(math.log(L / fine_end) / math.log(ratio)))
    coarse = fine_end * ratio ** np.arange(0, n_geo + 1)
    coarse[-1] = L
    edges = np.concatenate([fine, coarse])
    edges = np.unique(edges[edges <= L])
    mass = np.exp(-edges[:-1]) - np.exp(-edges[1:])
    mass[-1] += math.exp(-L)
    return 0.5 * (edges[:-1] + edges[1:]), mass


def build_example_6_3(N: int = 64, k_max: int = 4096, extent_exp: int = 7, rate: float = 2.0
                      ) -> Example:
    """Symmetric family on the integers intersected with an exponential-moment test on (1, inf).

    The continuous part is discretized by :func:`exponential_grid`; its atoms
    carry no integer embedding.  Extents beyond ``2^9`` would put the cell
    masses ``exp(-x)`` below the smallest positive double.
    """
    if 2.0 ** extent_exp > 700:
        raise ValueError("grid extent too large: cell masses would underflow")
    mids, mass = exponential_grid(extent_exp)
    lattice = list(range(-N, N + 1))
    atoms = tuple(lattice) + tuple(f"x{1 + m:.6g}" for m in mids)
    embedding = tuple(lattice) + (None,) * mids.size
    space = SampleSpace(atoms, embedding, N)
    n_lat = len(lattice)
    p1 = np.zeros(space.size)
    p1[n_lat:] = mass
    P1 = GeneralizedMeasure(space, p1 / p1.sum(), tag="P1")
    fam = symmetric_family(space, k_max)
    acceptance = Intersection((fam, Entropic(P1, 1.0)))
    P0 = symmetric_mixture(space)
    model = GeneralizedMeasure(space, 0.5 * (P0.weights + P1.weights), tag="P")
    regime = _cash_regime(acceptance, space, "example6.3", model)
    X = RandomVariable.from_rule(space, identity, Tail.divergent(two_sided=True), off_lattice=np.zeros(mids.size))
    Y = RandomVariable.from_rule(space, _zero, Tail.limit2(0.0, 0.0), off_lattice=mids / rate)
    return Example(regime, {"identity_Z": X, "exponential": Y},
                   {"rate": rate, "extent_exp": extent_exp, "P1": P1})


def example_6_3_refinements(extents=(7, 8, 9), **kwargs) -> list:
    """The same regime on successively longer grids, for divergence detection."""
    return [build_example_6_3(extent_exp=e, **kwargs) for e in extents]


def build_example_6_4(N: int = 40, sigma: float = 3.0, beta: float = 1.0) -> Example:
    """Entropic regime under a discretized Gaussian on the integers."""
    space = SampleSpace.integers(N)
    pts = np.arange(-N, N + 1, dtype=float)
    w = np.exp(-pts ** 2 / (2 * sigma ** 2))
    P = GeneralizedMeasure(space, w / w.sum(), tag="gauss")
    regime = _cash_regime(Entropic(P, beta), space, "example6.4", P)
    inputs = {
        "identity": RandomVariable.from_rule(space, identity, Tail.divergent(two_sided=True)),
        "half_identity": RandomVariable.from_rule(space, lambda q: 0.5 * np.asarray(q, float),
                                                  Tail.divergent(two_sided=True)),
    }
    return Example(regime, inputs, {"beta": beta})


def build_example_6_5(N: int = 30, alpha: float = 0.5, varying_unit: bool = False) -> Example:
    """AVaR acceptance under a geometric law on the naturals."""
    space = SampleSpace.naturals(N)
    P = GeneralizedMeasure(space, geometric_weights(N), tag="geometric")
    pts = np.arange(1, N + 1, dtype=float)
    if varying_unit:
        U = RandomVariable(space, 1.0 + 1.0 / pts, Tail.limit(1.0), lambda q: 1.0 + 1.0 / np.asarray(q, float))
    else:
        U = RandomVariable.constant(space, 1.0)
    name = "example6.5-varying" if varying_unit else "example6.5"
    regime = Regime(AVaR(P, alpha), SecuritySpace((U,)), PricingFunctional((1.0,)), name, P, ("coherent",))
    inputs = {
        "identity": RandomVariable.from_rule(space, identity, Tail.divergent()),
        "log": RandomVariable.from_rule(space, lambda q: np.log(np.asarray(q, float)), Tail.divergent()),
        "reciprocal": RandomVariable(space, 1.0 / pts, Tail.limit(0.0), lambda q: 1.0 / np.asarray(q, float)),
    }
    return Example(regime, inputs, {"alpha": alpha})


def build_counterexample(grid: int = 1001) -> Example:
    """Segment ``b Q + (1 - b) P`` with penalty ``(1 - b)^2``; Q misses the third atom."""
    space = SampleSpace.finite(3)
    P = GeneralizedMeasure.uniform(space)
    Q = GeneralizedMeasure(space, [0.5, 0.5, 0.0], tag="Q")
    family = []
    for b in np.linspace(0.0, 1.0, grid):
        mu = GeneralizedMeasure(space, b * Q.weights + (1 - b) * P.weights, tag=f"beta={b:.3f}")
        family.append((mu, (1.0 - b) ** 2))
    regime = _cash_regime(LinearDual(tuple(family)), space, "counterexample", P)
    inputs = {"indicator_w3": RandomVariable.indicator(space, ["w3"])}
    return Example(regime, inputs, {"Q": Q})


BUILTINS = {
    "example6.1": Builtin("example6.1", "tail-mass scenario eliminated by a two-dimensional security space",
                          "rho = integral against zeta; continuous from above", (), build_example_6_1),
    "example6.2": Builtin("example6.2", "symmetric three-point family on the integers",
                          "rho_tilde(id) = 0 < 1/2 = eta(id)", ("coherent",), build_example_6_2),
    "example6.3": Builtin("example6.3", "symmetric family intersected with an exponential-moment test",
                          "id in H minus M; exponential in C", (), build_example_6_3),
    "example6.4": Builtin("example6.4", "entropic risk under a discretized Gaussian",
                          "rho_tilde = log-moment; tail continuous", (), build_example_6_4),
    "example6.5": Builtin("example6.5", "AVaR acceptance under a geometric law",
                          "L = H = M; rho_tilde = eta", ("coherent",), build_example_6_5),
}

EXTRAS = {
    "counterexample": Builtin("counterexample", "zero-penalty scenario not equivalent to the model",
                              "E0 = {Q}, no strong reference", (), build_counterexample),
}


def get_builtin(name: str) -> Builtin:
    if name in BUILTINS:
        return BUILTINS[name]
    if name in EXTRAS:
        return EXTRAS[name]
    raise KeyError(f"unknown builtin {name!r}; known: {', '.join(list(BUILTINS) + list(EXTRAS))}")


def list_examples(tag: Optional[str] = None) -> list:
    return [b for b in BUILTINS.values() if tag is None or tag in b.tags]
