import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from riskregime.lp import INFEASIBLE, OPTIMAL, UNBOUNDED, LPProblem, lp_solve

from helpers import PROPERTY, SEEDS


def test_small_known_optimum():
    # max x + y with x + 2y <= 4, 3x + y <= 6
    res = lp_solve(LPProblem([1.0, 1.0], [[1, 2], [3, 1]], [4, 6], "max"))
    assert res.status == OPTIMAL
    assert res.optimum == pytest.approx(2.8)
    assert res.argument == pytest.approx([1.6, 1.2])


def test_unbounded_and_infeasible():
    assert lp_solve(LPProblem([1.0], [[-1.0]], [0.0], "max")).status == UNBOUNDED
    assert lp_solve(LPProblem([1.0], [[1.0]], [-1.0])).status == INFEASIBLE


def test_free_variables():
    res = lp_solve(LPProblem([1.0], [[-1.0]], [3.0], free=[True]))
    assert res.optimum == pytest.approx(-3.0)


def test_rejects_bad_data():
    with pytest.raises(ValueError):
        LPProblem([1.0], [[1.0]], [np.inf])
    with pytest.raises(ValueError):
        LPProblem([1.0], [[1.0]], [1.0, 2.0])
    with pytest.raises(ValueError):
        LPProblem([1.0], sense="maximize")


def test_degenerate_problem_terminates():
    # classic cycling example for the largest-coefficient rule
    c = [-0.75, 150, -0.02, 6]
    G = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    res = lp_solve(LPProblem(c, G, [0, 0, 1]))
    assert res.status == OPTIMAL
    assert res.optimum == pytest.approx(-0.05)


@PROPERTY
@given(st.integers(**SEEDS))
def test_matches_scipy(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 6))
    m = int(rng.integers(1, 8))
    c = rng.normal(size=d)
    G = rng.normal(size=(m, d))
    h = rng.uniform(0.0, 2.0, size=m)
    free = rng.random(d) < 0.3
    me = int(rng.integers(0, 2))
    A = rng.normal(size=(me, d))
    b = A @ rng.uniform(0, 1, size=d) if me else np.zeros(0)
    bounds = [(None, None) if f else (0, None) for f in free]
    ref = linprog(c, G, h, A if me else None, b if me else None, bounds=bounds, method="highs")
    res = lp_solve(LPProblem(c, G, h, "min", A if me else None, b if me else None, free=free))
    expected = {0: OPTIMAL, 2: INFEASIBLE, 3: UNBOUNDED}[ref.status]
    assert res.status == expected
    if expected == OPTIMAL:
        assert res.optimum == pytest.approx(ref.fun, abs=1e-8)
        x = res.argument
        assert (G @ x <= h + 1e-8).all()
        assert (x[~free] >= -1e-9).all()
