import numpy as np
import pytest

from riskregime.catalog import (BUILTINS, build_example_6_2, build_example_6_3, exponential_grid,
                                geometric_weights, get_builtin, list_examples, symmetric_integrals,
                                symmetric_limit, symmetric_member)
from riskregime.measure_core import integrate
from riskregime.regimes import validate_regime


def test_geometric_weights_sum_to_one():
    w = geometric_weights(10)
    assert w.sum() == pytest.approx(1.0)
    assert w[0] == 0.5


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_builtins_are_valid(name):
    ex = get_builtin(name).build()
    assert validate_regime(ex.regime).valid
    assert ex.inputs


def test_unknown_builtin():
    with pytest.raises(KeyError):
        get_builtin("example9")


def test_tag_filter():
    assert [b.name for b in list_examples("coherent")] == ["example6.2", "example6.5"]


def test_symmetric_integrals_match_members():
    ex = build_example_6_2(N=16, k_max=16)
    X = ex.inputs["identity"].map(lambda v: np.asarray(v) ** 2)
    fast = symmetric_integrals(X, 16)
    slow = [integrate(symmetric_member(X.space, k)[0], X) for k in range(1, 17)]
    assert np.allclose(fast, slow)
    with pytest.raises(IndexError):
        symmetric_member(X.space, 17)


def test_symmetric_limit():
    X = build_example_6_2(N=8, k_max=8).inputs["identity"]
    assert symmetric_limit(X) == pytest.approx(0.0)
    assert symmetric_limit(X.clip(lower=-1.0)) == pytest.approx(0.5)
    assert symmetric_limit(X.abs().map(lambda v: np.asarray(v) ** 2)) == np.inf


def test_exponential_grid_is_a_probability():
    mids, mass = exponential_grid(7)
    assert mass.sum() == pytest.approx(1.0, abs=1e-12)
    assert (np.diff(mids) > 0).all()


def test_example_6_3_extent_guard():
    with pytest.raises(ValueError):
        build_example_6_3(extent_exp=10)
