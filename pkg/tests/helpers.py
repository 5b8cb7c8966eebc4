"""Random regimes and positions shared by the test modules."""
import numpy as np
from hypothesis import HealthCheck, settings

from riskregime.measure_core import GeneralizedMeasure, RandomVariable, SampleSpace, Tail
from riskregime.regimes import (AVaR, Entropic, LinearDual, PricingFunctional, Regime, SecuritySpace,
                                validate_regime)

PROPERTY = settings(max_examples=100, deadline=None, derandomize=True,
                    suppress_health_check=[HealthCheck.too_slow])
SEEDS = dict(min_value=0, max_value=2 ** 32 - 1)


def probability(rng, n, support=None):
    w = rng.dirichlet(np.ones(n))
    if support is not None:
        w = np.where(support, w, 0.0)
        w /= w.sum()
    return w


def random_support(rng, n, min_size=1):
    mask = rng.random(n) < 0.6
    if mask.sum() < min_size:
        mask[rng.choice(n, min_size, replace=False)] = True
    return mask


def linear_regime(rng, n=None, members=None, dim=None, coherent=False, zero_min=True):
    """Finite-space regime with a listed scenario family and cash (plus one more security)."""
    n = n or int(rng.integers(2, 9))
    m = members or int(rng.integers(1, 5))
    dim = dim or int(rng.integers(1, 3))
    space = SampleSpace.finite(n)
    fam = []
    for i in range(m):
        # with a second security the price is read off a blend that must charge every atom
        support = None if (i == 0 and dim == 2) else random_support(rng, n)
        w = probability(rng, n, support)
        pen = 0.0 if coherent else float(rng.uniform(0.0, 1.0))
        fam.append((GeneralizedMeasure(space, w, tag=f"m{i}"), pen))
    if zero_min and not coherent:
        fam[0] = (fam[0][0], 0.0)
    one = RandomVariable.constant(space, 1.0)
    if dim == 1:
        S, p = SecuritySpace((one,)), PricingFunctional((1.0,))
    else:
        B = RandomVariable(space, rng.normal(size=n))
        if np.linalg.matrix_rank(np.vstack([one.values, B.values])) < 2:
            B = RandomVariable(space, np.arange(n, dtype=float))
        t = rng.dirichlet(np.ones(m))
        price = float(sum(ti * (mu.weights @ B.values) for ti, (mu, _) in zip(t, fam)))
        S, p = SecuritySpace((one, B)), PricingFunctional((1.0, price))
    r = Regime(LinearDual(tuple(fam)), S, p, "random-linear")
    assert validate_regime(r).valid
    return r


def avar_regime(rng, n=None, alpha=None, unit=None):
    n = n or int(rng.integers(2, 9))
    space = SampleSpace.finite(n)
    P = GeneralizedMeasure(space, probability(rng, n), tag="P")
    alpha = float(rng.uniform(0.05, 0.95)) if alpha is None else alpha
    U = RandomVariable.constant(space, 1.0) if unit is None else RandomVariable(space, unit)
    return Regime(AVaR(P, alpha), SecuritySpace((U,)), PricingFunctional((1.0,)), "random-avar", P)


def entropic_regime(rng, n=None, beta=None):
    n = n or int(rng.integers(2, 9))
    space = SampleSpace.finite(n)
    P = GeneralizedMeasure(space, probability(rng, n), tag="P")
    beta = float(rng.uniform(0.2, 3.0)) if beta is None else beta
    return Regime(Entropic(P, beta), SecuritySpace.cash(space), PricingFunctional((1.0,)), "random-entropic", P)


def any_regime(rng):
    kind = int(rng.integers(0, 3))
    if kind == 0:
        return linear_regime(rng)
    if kind == 1:
        return avar_regime(rng)
    return entropic_regime(rng)


def position(rng, space, scale=3.0):
    return RandomVariable(space, rng.normal(size=space.size) * scale)


def window_regime(rng, n=6, tail_members=True):
    """Regime on the naturals window ``1..n``; members may carry tail mass."""
    space = SampleSpace.naturals(n)
    fam = []
    for i in range(int(rng.integers(1, 4))):
        w = probability(rng, n, random_support(rng, n))
        tm = 0.0
        if tail_members and rng.random() < 0.4:
            tm = float(rng.uniform(0.1, 0.5))
            w = w * (1.0 - tm)
        fam.append((GeneralizedMeasure(space, w, tm, tag=f"m{i}"), 0.0 if i == 0 else float(rng.uniform(0, 1))))
    r = Regime(LinearDual(tuple(fam)), SecuritySpace.cash(space), PricingFunctional((1.0,)), "random-window")
    return r


def window_position(rng, space, unbounded):
    if unbounded:
        a, b = float(rng.uniform(0.1, 2.0)), float(rng.normal())
        return RandomVariable.from_rule(space, lambda q, a=a, b=b: a * np.asarray(q, float) + b, Tail.divergent())
    vals = rng.normal(size=space.size) * 3.0
    return RandomVariable(space, vals, Tail.limit(float(rng.normal())))
