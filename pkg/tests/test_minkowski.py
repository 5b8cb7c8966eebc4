import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from riskregime.measure_core import GeneralizedMeasure, RandomVariable, SampleSpace
from riskregime.minkowski import (Grids, MembershipReport, classify, divergence_verdict, gauge_norm,
                                  norm_equivalence_constants, rho_abs)
from riskregime.reference import consistent_family
from riskregime.regimes import LinearDual, PricingFunctional, Regime, SecuritySpace, normalize_regime

from helpers import PROPERTY, SEEDS, any_regime, position

REL = 1e-7


def _setup(seed):
    rng = np.random.default_rng(seed)
    r = normalize_regime(any_regime(rng))
    return rng, r, consistent_family(r)


def test_gauge_of_expectation_is_the_mean_absolute_value():
    space = SampleSpace.finite(4)
    r = Regime(LinearDual(((GeneralizedMeasure.uniform(space), 0.0),)), SecuritySpace.cash(space),
               PricingFunctional((1.0,)))
    X = RandomVariable(space, [1.0, -2.0, 3.0, -4.0])
    assert gauge_norm(r, X) == pytest.approx(2.5, rel=1e-8)
    assert gauge_norm(r, X, c=2.0) == pytest.approx(1.25, rel=1e-8)
    assert rho_abs(r, X, 2.0) == pytest.approx(1.25)


@PROPERTY
@given(st.integers(**SEEDS))
def test_gauge_is_absolutely_homogeneous(seed):
    rng, r, fam = _setup(seed)
    X = position(rng, r.space)
    c = float(rng.uniform(-4, 4))
    lhs = gauge_norm(r, X * c, consistent=fam)
    assert lhs == pytest.approx(abs(c) * gauge_norm(r, X, consistent=fam), rel=REL, abs=1e-12)


@PROPERTY
@given(st.integers(**SEEDS))
def test_gauge_triangle_inequality(seed):
    rng, r, fam = _setup(seed)
    X, Y = position(rng, r.space), position(rng, r.space)
    total = gauge_norm(r, X + Y, consistent=fam)
    assert total <= (gauge_norm(r, X, consistent=fam) + gauge_norm(r, Y, consistent=fam)) * (1 + REL)


@PROPERTY
@given(st.integers(**SEEDS))
def test_gauge_is_solid(seed):
    rng, r, fam = _setup(seed)
    Y = position(rng, r.space)
    X = RandomVariable(r.space, Y.values * rng.uniform(-1, 1, size=r.space.size))
    assert gauge_norm(r, X, consistent=fam) <= gauge_norm(r, Y, consistent=fam) * (1 + REL)


@PROPERTY
@given(st.integers(**SEEDS))
def test_norm_equivalence_constants(seed):
    rng, r, fam = _setup(seed)
    X = position(rng, r.space)
    c = float(np.exp(rng.uniform(-2, 2)))
    lo, hi = norm_equivalence_constants(c)
    n_c, n_1 = gauge_norm(r, X, c, consistent=fam), gauge_norm(r, X, consistent=fam)
    assert lo * n_c <= n_1 * (1 + REL)
    assert n_1 <= hi * n_c * (1 + REL)


def test_divergence_verdict():
    assert divergence_verdict([1.0, math.inf]) == "divergent"
    assert divergence_verdict([1.0, 2.0, 3.0]) == "divergent"
    assert divergence_verdict([1.0, 1.5, 1.6]) == "finite"
    assert divergence_verdict([1.0, 2.0]) == "finite"
    assert divergence_verdict([2.0, 2.0, 2.0]) == "finite"


def test_grids_must_increase():
    with pytest.raises(ValueError):
        Grids(k_grid=(2.0, 1.0))
    with pytest.raises(ValueError):
        Grids(tail_grid=())


def test_membership_chain_is_enforced():
    with pytest.raises(ValueError):
        MembershipReport("yes", "no", "yes", "yes", "yes")
    with pytest.raises(ValueError):
        MembershipReport("no", "yes", "no", "yes", "yes")


@PROPERTY
@given(st.integers(**SEEDS))
def test_bounded_positions_belong_everywhere(seed):
    rng, r, fam = _setup(seed)
    rep = classify(r, position(rng, r.space), Grids(k_grid=(1.0, 4.0, 16.0), tail_grid=(1.0, 4.0, 16.0)),
                   consistent=fam)
    assert rep.as_dict() == {"L": "yes", "H": "yes", "M": "yes", "Gamma": "yes", "C": "no"}
