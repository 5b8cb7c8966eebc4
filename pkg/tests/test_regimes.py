import numpy as np
import pytest

from riskregime.measure_core import GeneralizedMeasure, RandomVariable, SampleSpace, Tail
from riskregime.regimes import (AVaR, Entropic, IndexedDual, Intersection, LinearDual, PricingFunctional,
                                Regime, SecuritySpace, UnsupportedCombination, flatten, is_linear,
                                normalize_regime, validate_regime)
from riskregime.solver import primal_risk


@pytest.fixture
def space():
    return SampleSpace.finite(3)


def test_security_space_checks(space):
    one = RandomVariable.constant(space, 1.0)
    with pytest.raises(ValueError):
        SecuritySpace((one, one * 2.0))
    with pytest.raises(ValueError):
        SecuritySpace((RandomVariable(space, [1.0, -1.0, 0.0]),))
    unbounded = RandomVariable.from_rule(SampleSpace.naturals(3), lambda q: np.asarray(q, float),
                                         Tail.divergent())
    with pytest.raises(ValueError):
        SecuritySpace((unbounded,))


def test_combine(space):
    one = RandomVariable.constant(space, 1.0)
    B = RandomVariable(space, [0.0, 1.0, 2.0])
    S = SecuritySpace((one, B))
    assert list(S.combine([1.0, 2.0]).values) == [1.0, 3.0, 5.0]
    with pytest.raises(ValueError):
        S.combine([1.0])


def test_strict_positivity(space):
    one = RandomVariable.constant(space, 1.0)
    B = RandomVariable(space, [0.0, 1.0, 2.0])
    S = SecuritySpace((one, B))
    assert PricingFunctional((1.0, 1.0)).is_strictly_positive(S)
    # B >= 0 priced at zero
    assert not PricingFunctional((1.0, 0.0)).is_strictly_positive(S)


def test_parameter_ranges(space):
    P = GeneralizedMeasure.uniform(space)
    with pytest.raises(ValueError):
        AVaR(P, 1.0)
    with pytest.raises(ValueError):
        Entropic(P, 0.0)
    with pytest.raises(ValueError):
        Entropic(P.scaled(2.0), 1.0)
    with pytest.raises(ValueError):
        IndexedDual(lambda k: (P, 0.0), 0)
    with pytest.raises(ValueError):
        Intersection(())


def test_flatten_merges_linear_members(space):
    P = GeneralizedMeasure.uniform(space)
    spec = Intersection((LinearDual(((P, 0.0),)), Intersection((LinearDual(((P, 1.0),)), AVaR(P, 0.5)))))
    leaves = flatten(spec)
    assert isinstance(leaves[0], LinearDual) and len(leaves[0].family) == 2
    assert isinstance(leaves[1], AVaR)
    assert not is_linear(spec)
    assert is_linear(LinearDual(((P, 0.0),)))


def test_validate_reports_unbounded_hedging(space):
    # a scenario that gives cash no mass leaves hedge prices unbounded
    zero = GeneralizedMeasure(space, [0.0, 0.0, 0.0])
    r = Regime(LinearDual(((zero, 0.0),)), SecuritySpace.cash(space), PricingFunctional((1.0,)))
    assert not validate_regime(r).valid


def test_validate_rejects_nonlinear_with_two_securities(space):
    P = GeneralizedMeasure.uniform(space)
    S = SecuritySpace((RandomVariable.constant(space, 1.0), RandomVariable(space, [0.0, 1.0, 2.0])))
    r = Regime(AVaR(P, 0.5), S, PricingFunctional((1.0, 1.0)))
    with pytest.raises(UnsupportedCombination):
        validate_regime(r)


def test_normalize_shifts_to_zero(space):
    P = GeneralizedMeasure.uniform(space)
    r = Regime(LinearDual(((P, -0.75),)), SecuritySpace.cash(space), PricingFunctional((2.0,)))
    zero = RandomVariable.constant(space, 0.0)
    assert primal_risk(r, zero).value == pytest.approx(1.5)
    assert primal_risk(normalize_regime(r), zero).value == pytest.approx(0.0, abs=1e-12)


def test_with_k_max_reaches_nested_families(space):
    P = GeneralizedMeasure.uniform(space)
    fam = IndexedDual(lambda k: (P, 0.0), 5)
    r = Regime(Intersection((fam, AVaR(P, 0.5))), SecuritySpace.cash(space), PricingFunctional((1.0,)))
    assert r.with_k_max(9).acceptance.members[0].k_max == 9
