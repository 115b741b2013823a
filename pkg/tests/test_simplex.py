import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from signedmix.simplex import LpProblem, simplex_solve


def test_textbook_max():
    # max 3x + 5y st x <= 4, 2y <= 12, 3x + 2y <= 18  ->  36 at (2, 6)
    sol = simplex_solve(LpProblem([-3, -5], [[1, 0], [0, 2], [3, 2]], [4, 12, 18]))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(-36.0)
    np.testing.assert_allclose(sol.x, [2, 6], atol=1e-9)


def test_beale_cycling_example():
    """Dantzig's rule without anti-cycling loops forever on this problem."""
    c = [-0.75, 20, -0.5, 6]
    A = [[0.25, -8, -1, 9], [0.5, -12, -0.5, 3], [0, 0, 1, 0]]
    sol = simplex_solve(LpProblem(c, A, [0, 0, 1]))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(-1.25)
    np.testing.assert_allclose(sol.x, [1, 0, 1, 0], atol=1e-9)


def test_equality_and_ge_rows():
    # min x + 2y st x + y = 3, x >= 1, y >= 0.5
    sol = simplex_solve(LpProblem([1, 2], [[1, 1], [1, 0], [0, 1]], [3, 1, 0.5], ("=", ">=", ">=")))
    assert sol.status == "optimal"
    np.testing.assert_allclose(sol.x, [2.5, 0.5], atol=1e-9)


def test_negative_rhs_is_flipped():
    # -x <= -2 means x >= 2
    sol = simplex_solve(LpProblem([1], [[-1]], [-2]))
    assert sol.x[0] == pytest.approx(2.0)


def test_infeasible():
    sol = simplex_solve(LpProblem([1, 1], [[1, 1], [1, 1]], [1, 2], ("<=", ">=")))
    assert sol.status == "infeasible"


def test_unbounded():
    sol = simplex_solve(LpProblem([-1, 0], [[0, 1]], [1]))
    assert sol.status == "unbounded"


def test_iteration_cap_reports_cycled():
    sol = simplex_solve(LpProblem([-3, -5], [[1, 0], [0, 2], [3, 2]], [4, 12, 18]), max_iter=1)
    assert sol.status == "cycled"


@pytest.mark.parametrize("kwargs", [
    dict(c=[1, 2], A=[[1, 1]], b=[1, 2]),
    dict(c=[1, 2], A=[[1, 1]], b=[1], senses=("<",)),
    dict(c=[np.nan], A=[[1]], b=[1]),
])
def test_malformed_problem(kwargs):
    with pytest.raises(ValueError):
        LpProblem(**kwargs)


@st.composite
def bounded_lps(draw):
    m = draw(st.integers(1, 6))
    n = draw(st.integers(1, 8))
    coef = st.floats(-5, 5, allow_nan=False).map(lambda v: round(v, 3))
    A = np.array([[draw(coef) for _ in range(n)] for _ in range(m)])
    b = np.array([draw(st.floats(0, 10).map(lambda v: round(v, 3))) for _ in range(m)])
    c = np.array([draw(coef) for _ in range(n)])
    # a box row keeps every instance bounded; b >= 0 keeps x = 0 feasible
    A = np.vstack([A, np.ones(n)])
    b = np.append(b, 20.0)
    return c, A, b


@given(bounded_lps())
@settings(max_examples=150, deadline=None)
def test_agrees_with_highs(lp):
    c, A, b = lp
    sol = simplex_solve(LpProblem(c, A, b))
    ref = linprog(c, A_ub=A, b_ub=b, bounds=(0, None), method="highs")
    assert ref.status == 0
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(ref.fun, rel=1e-7, abs=1e-7)
    assert np.all(A @ sol.x <= b + 1e-7)
    assert np.all(sol.x >= 0)
