import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from riskregime.measure_core import (GeneralizedMeasure, NegativeCoefficient, RandomVariable, SampleSpace,
                                     SpaceMismatch, Tail, TailUndefined, Truncation, integrate,
                                     measure_relations, mix, truncate)

from helpers import PROPERTY, SEEDS, probability


def test_sample_space_rejects_duplicate_labels():
    with pytest.raises(ValueError):
        SampleSpace(("a", "a"))


def test_embedding_must_be_injective_and_inside_window():
    with pytest.raises(ValueError):
        SampleSpace((1, 2), (1, 1))
    with pytest.raises(ValueError):
        SampleSpace((1, 5), (1, 5), 3)


def test_windows():
    nat = SampleSpace.naturals(4)
    ints = SampleSpace.integers(2)
    assert nat.atoms == (1, 2, 3, 4) and not nat.two_sided
    assert ints.atoms == (-2, -1, 0, 1, 2) and ints.two_sided
    assert ints.index_of_point(0) == 2
    with pytest.raises(KeyError):
        ints.index_of_point(3)


def test_tail_kinds():
    assert Tail.limit(1.0).kind == "Limit"
    assert Tail.limit2(1.0, 2.0).kind == "Limit2"
    assert Tail.divergent().kind == "Divergent"
    assert Tail.divergent(two_sided=True).sides == (math.inf, -math.inf)


def test_random_variable_rejects_non_finite_values():
    space = SampleSpace.finite(2)
    with pytest.raises(ValueError):
        RandomVariable(space, [1.0, math.nan])
    with pytest.raises(ValueError):
        RandomVariable(space, [1.0, math.inf])


def test_tail_needs_embedding():
    with pytest.raises(ValueError):
        RandomVariable(SampleSpace.finite(2), [0.0, 1.0], Tail.limit(0.0))


def test_points_beyond_window_use_tail_or_rule():
    space = SampleSpace.naturals(3)
    X = RandomVariable(space, [1.0, 2.0, 3.0], Tail.limit(7.0))
    assert list(X.at([2, 10])) == [2.0, 7.0]
    ident = RandomVariable.from_rule(space, lambda q: np.asarray(q, float), Tail.divergent())
    assert ident.at([100])[0] == 100.0
    bare = RandomVariable(space, [1.0, 2.0, 3.0], Tail.divergent())
    with pytest.raises(TailUndefined):
        bare.at([10])


def test_two_sided_space_widens_one_sided_tail():
    X = RandomVariable(SampleSpace.integers(1), [0.0, 0.0, 0.0], Tail.limit(2.0))
    assert X.tail.sides == (2.0, 2.0)


def test_truncation_clamps_values_and_tail():
    space = SampleSpace.naturals(4)
    X = RandomVariable.from_rule(space, lambda q: np.asarray(q, float) - 2.5, Tail.divergent())
    T = truncate(X, Truncation(1.0, 1.0))
    assert list(T.values) == [-1.0, -0.5, 0.5, 1.0]
    assert T.tail.upper == 1.0
    with pytest.raises(ValueError):
        Truncation(-1.0, 0.0)


def test_integrate_with_tail_mass():
    space = SampleSpace.naturals(2)
    mu = GeneralizedMeasure(space, [0.25, 0.25], 0.5)
    assert integrate(mu, RandomVariable(space, [1.0, 3.0], Tail.limit(4.0))) == pytest.approx(3.0)
    assert integrate(mu, RandomVariable(space, [1.0, 3.0], Tail.divergent())) == math.inf
    with pytest.raises(TailUndefined):
        integrate(mu, RandomVariable(space, [1.0, 3.0]))


def test_zero_times_infinity_is_zero():
    space = SampleSpace.naturals(2)
    X = RandomVariable(space, [1.0, 2.0], Tail.divergent())
    assert (X * 0.0).tail.upper == 0.0
    assert integrate(GeneralizedMeasure(space, [1.0, 0.0]), X) == 1.0


def test_opposite_divergent_tails_are_undefined():
    space = SampleSpace.integers(1)
    mu = GeneralizedMeasure(space, [0.0, 0.0, 0.0], (0.5, 0.5))
    X = RandomVariable.from_rule(space, lambda q: np.asarray(q, float), Tail.divergent(two_sided=True))
    with pytest.raises(TailUndefined):
        integrate(mu, X)


def test_measure_validation():
    fin = SampleSpace.finite(2)
    with pytest.raises(ValueError):
        GeneralizedMeasure(fin, [-0.1, 1.1])
    with pytest.raises(ValueError):
        GeneralizedMeasure(fin, [0.5, 0.5], 0.1)
    with pytest.raises(ValueError):
        GeneralizedMeasure(SampleSpace.naturals(2), [0.5, 0.5], (0.0, 0.1))
    with pytest.raises(NegativeCoefficient):
        GeneralizedMeasure.uniform(fin).scaled(-1.0)


def test_space_mismatch():
    a, b = SampleSpace.finite(2), SampleSpace.finite(3)
    with pytest.raises(SpaceMismatch):
        integrate(GeneralizedMeasure.uniform(a), RandomVariable.constant(b, 1.0))
    with pytest.raises(SpaceMismatch):
        RandomVariable.constant(a, 1.0) + RandomVariable.constant(b, 1.0)


def test_relations_count_tail_sides():
    space = SampleSpace.naturals(2)
    reg = GeneralizedMeasure(space, [0.5, 0.5])
    sing = GeneralizedMeasure(space, [0.5, 0.0], 0.5)
    rel = measure_relations(reg, sing)
    assert not rel.a_ll_b and not rel.b_ll_a
    assert measure_relations(GeneralizedMeasure(space, [1.0, 0.0]), reg).a_ll_b


def test_mix_rejects_negative_coefficients():
    m = GeneralizedMeasure.uniform(SampleSpace.finite(2))
    with pytest.raises(NegativeCoefficient):
        mix([-1.0], [m])


@PROPERTY
@given(st.integers(**SEEDS))
def test_integral_is_linear(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 9))
    space = SampleSpace.naturals(n)
    mu = GeneralizedMeasure(space, probability(rng, n) * 0.7, 0.3)
    X = RandomVariable(space, rng.normal(size=n), Tail.limit(float(rng.normal())))
    Y = RandomVariable(space, rng.normal(size=n), Tail.limit(float(rng.normal())))
    a, b = rng.uniform(-3, 3, size=2)
    lhs = integrate(mu, X * a + Y * b)
    assert lhs == pytest.approx(a * integrate(mu, X) + b * integrate(mu, Y), abs=1e-12)


@PROPERTY
@given(st.integers(**SEEDS))
def test_mix_integrates_as_the_combination(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 9))
    space = SampleSpace.naturals(n)
    ms = [GeneralizedMeasure(space, probability(rng, n), float(rng.uniform())) for _ in range(3)]
    c = rng.uniform(0, 2, size=3)
    X = RandomVariable(space, rng.normal(size=n), Tail.limit(float(rng.normal())))
    total = sum(ci * integrate(m, X) for ci, m in zip(c, ms))
    assert integrate(mix(list(c), ms), X) == pytest.approx(total, abs=1e-12)


@PROPERTY
@given(st.integers(**SEEDS))
def test_truncation_is_monotone_and_bounded(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 9))
    X = RandomVariable(SampleSpace.finite(n), rng.normal(size=n) * 5)
    lo, hi = rng.uniform(0, 4, size=2)
    T = truncate(X, Truncation(lo, hi))
    assert (T.values <= hi).all() and (T.values >= -lo).all()
    assert np.all((T.values == X.values) | (np.abs(T.values) < np.abs(X.values)))
