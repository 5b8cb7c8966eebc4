import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from riskregime.measure_core import GeneralizedMeasure, RandomVariable, SampleSpace, Tail
from riskregime.reference import consistent_family
from riskregime.regimes import (AVaR, Entropic, LinearDual, PricingFunctional, Regime, SecuritySpace,
                                normalize_regime)
from riskregime.solver import (avar_eval, dual_risk, entropic_eval, gibbs_weights, primal_risk, relative_entropy,
                               sigma_A, sigma_A_primal)

from helpers import (PROPERTY, SEEDS, any_regime, avar_regime, entropic_regime, linear_regime, position,
                     probability)


def test_avar_uniform_four_atoms():
    space = SampleSpace.finite(4)
    X = RandomVariable(space, [1.0, 2.0, 3.0, 4.0])
    assert avar_eval(GeneralizedMeasure.uniform(space), 0.5, X) == pytest.approx(3.5)


def test_entropic_known_value():
    space = SampleSpace.finite(2)
    X = RandomVariable(space, [0.0, math.log(3.0)])
    assert entropic_eval(GeneralizedMeasure.uniform(space), 1.0, X) == pytest.approx(math.log(2.0))


def test_entropic_is_stable_for_large_losses():
    space = SampleSpace.finite(2)
    X = RandomVariable(space, [1000.0, 0.0])
    assert entropic_eval(GeneralizedMeasure.uniform(space), 1.0, X) == pytest.approx(1000.0 - math.log(2.0))


def test_relative_entropy_infinite_off_support():
    space = SampleSpace.finite(2)
    P = GeneralizedMeasure(space, [1.0, 0.0])
    assert relative_entropy(GeneralizedMeasure.uniform(space), P) == math.inf


def test_linear_regime_with_empty_feasible_set_is_infinite():
    space = SampleSpace.finite(2)
    mu = GeneralizedMeasure(space, [1.0, 0.0])
    nu = GeneralizedMeasure(space, [0.0, 0.0], tag="zero")
    S = SecuritySpace.cash(space)
    r = Regime(LinearDual(((mu, 0.0), (nu, -1.0))), S, PricingFunctional((1.0,)))
    assert primal_risk(r, RandomVariable.constant(space, 0.0)).value == math.inf


@PROPERTY
@given(st.integers(**SEEDS))
def test_primal_matches_dual(seed):
    rng = np.random.default_rng(seed)
    r = any_regime(rng)
    X = position(rng, r.space)
    p = primal_risk(r, X).value
    d = dual_risk(r, X, consistent_family(r)).value
    assert abs(p - d) <= 1e-7 * max(1.0, abs(p))


@PROPERTY
@given(st.integers(**SEEDS))
def test_security_additivity(seed):
    rng = np.random.default_rng(seed)
    r = linear_regime(rng, dim=2)
    X = position(rng, r.space)
    z = rng.normal(size=2)
    Z = r.securities.combine(z)
    lhs = primal_risk(r, X + Z).value
    assert lhs == pytest.approx(primal_risk(r, X).value + r.pricing.price(z), abs=1e-7)


@PROPERTY
@given(st.integers(**SEEDS))
def test_monotone(seed):
    rng = np.random.default_rng(seed)
    r = any_regime(rng)
    X = position(rng, r.space)
    Y = X + RandomVariable(r.space, rng.uniform(0, 2, size=r.space.size))
    assert primal_risk(r, X).value <= primal_risk(r, Y).value + 1e-8


@PROPERTY
@given(st.integers(**SEEDS))
def test_convex(seed):
    rng = np.random.default_rng(seed)
    r = any_regime(rng)
    X, Y = position(rng, r.space), position(rng, r.space)
    t = float(rng.uniform())
    mid = primal_risk(r, X * t + Y * (1 - t)).value
    assert mid <= t * primal_risk(r, X).value + (1 - t) * primal_risk(r, Y).value + 1e-7


@PROPERTY
@given(st.integers(**SEEDS))
def test_normalized_regime_has_zero_risk_at_zero(seed):
    rng = np.random.default_rng(seed)
    r = normalize_regime(any_regime(rng))
    assert abs(primal_risk(r, RandomVariable.constant(r.space, 0.0)).value) <= 1e-9


@PROPERTY
@given(st.integers(**SEEDS))
def test_support_function_routes_agree(seed):
    rng = np.random.default_rng(seed)
    r = linear_regime(rng)
    n = r.space.size
    mu = GeneralizedMeasure(r.space, probability(rng, n) * float(rng.uniform(0.2, 2.0)))
    a, b = sigma_A(r.acceptance, mu), sigma_A_primal(r.acceptance, mu)
    if math.isinf(a) or math.isinf(b):
        assert a == b
    else:
        assert a == pytest.approx(b, abs=1e-8)


@PROPERTY
@given(st.integers(**SEEDS))
def test_avar_matches_its_dual_lp_form(seed):
    rng = np.random.default_rng(seed)
    r = avar_regime(rng, unit=None)
    X = position(rng, r.space)
    P, alpha = r.acceptance.base, r.acceptance.alpha
    assert primal_risk(r, X).value == pytest.approx(avar_eval(P, alpha, X), abs=1e-9)


@PROPERTY
@given(st.integers(**SEEDS))
def test_gibbs_attains_the_entropic_dual(seed):
    rng = np.random.default_rng(seed)
    r = entropic_regime(rng)
    X = position(rng, r.space)
    spec = r.acceptance
    q = GeneralizedMeasure(r.space, gibbs_weights(spec.base, spec.beta, X))
    value = float(q.weights @ X.values) - relative_entropy(q, spec.base) / spec.beta
    assert value == pytest.approx(entropic_eval(spec.base, spec.beta, X), abs=1e-9)


def test_avar_with_varying_unit_agrees_with_bisection_root():
    space = SampleSpace.finite(3)
    P = GeneralizedMeasure.uniform(space)
    U = RandomVariable(space, [1.0, 2.0, 4.0])
    r = Regime(AVaR(P, 0.5), SecuritySpace((U,)), PricingFunctional((1.0,)), "varying")
    X = RandomVariable(space, [3.0, 0.0, 1.0])
    m = primal_risk(r, X).value
    assert avar_eval(P, 0.5, X - U * m) == pytest.approx(0.0, abs=1e-8)


def test_entropic_with_tail_mass_base_diverges_on_unbounded_loss():
    space = SampleSpace.naturals(3)
    P = GeneralizedMeasure(space, [0.3, 0.3, 0.3], 0.1)
    r = Regime(Entropic(P, 1.0), SecuritySpace.cash(space), PricingFunctional((1.0,)))
    X = RandomVariable.from_rule(space, lambda q: np.asarray(q, float), Tail.divergent())
    assert primal_risk(r, X).value == math.inf
