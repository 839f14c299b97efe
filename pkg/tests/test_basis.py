import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from transcount.basis import BSplineBasis, bspline_matrix, difference_penalty, theta_penalty


def cox_de_boor(x, knots, degree, k):
    """Textbook recursion for B_{k,degree}(x); right end treated as closed."""
    if degree == 0:
        lo, hi = knots[k], knots[k + 1]
        last = hi == knots[-1] and lo < hi
        return float(lo <= x < hi or (last and x == hi))
    out = 0.0
    d1 = knots[k + degree] - knots[k]
    if d1 > 0:
        out += (x - knots[k]) / d1 * cox_de_boor(x, knots, degree - 1, k)
    d2 = knots[k + degree + 1] - knots[k + 1]
    if d2 > 0:
        out += (knots[k + degree + 1] - x) / d2 * cox_de_boor(x, knots, degree - 1, k + 1)
    return out


def test_matches_cox_de_boor_cubic():
    M, m = 36, 20
    basis = BSplineBasis(M, m, 3)
    got = bspline_matrix(M, m, 3)
    want = np.array([[cox_de_boor(r, basis.knots, 3, k) for k in range(m)] for r in range(M + 1)])
    np.testing.assert_allclose(got, want, atol=1e-10)


@pytest.mark.parametrize("degree", [1, 2])
def test_matches_cox_de_boor_low_degree(degree):
    basis = BSplineBasis(12, 6, degree)
    pts = np.linspace(0, 12, 31)
    want = np.array([[cox_de_boor(x, basis.knots, degree, k) for k in range(6)] for x in pts])
    np.testing.assert_allclose(basis.eval(pts), want, atol=1e-10)


def test_degree_zero_is_indicator():
    M = 7
    B = bspline_matrix(M, M + 1, 0)
    assert B.shape == (M + 1, M + 1)
    np.testing.assert_array_equal(B.sum(axis=1), 1.0)
    assert np.all(B.max(axis=1) == 1.0)
    # each category picks a distinct column, so theta_r = gamma_k exactly
    assert len({int(np.argmax(row)) for row in B}) == M + 1


@given(st.integers(1, 60), st.integers(0, 3), st.data())
def test_partition_of_unity(M, degree, data):
    m = data.draw(st.integers(degree + 1, max(degree + 1, min(25, M + degree + 1))))
    B = bspline_matrix(M, m, degree)
    np.testing.assert_allclose(B.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(B >= 0)


def test_too_few_basis_functions():
    with pytest.raises(ValueError):
        bspline_matrix(10, 3, 3)


def test_points_outside_range():
    with pytest.raises(ValueError):
        BSplineBasis(10, 6).eval([11])


def test_difference_penalty_examples():
    assert difference_penalty(3, 1).quadratic_form([1, 2, 4]) == pytest.approx(5.0)
    assert difference_penalty(4, 1).quadratic_form(np.full(4, 3.3)) == pytest.approx(0.0, abs=1e-12)
    assert difference_penalty(4, 2).quadratic_form([0, 1, 2, 3]) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        difference_penalty(3, 3)


def test_theta_penalty_examples():
    P = theta_penalty(2)
    assert P.quadratic_form([1, 1, 1]) == 0.0
    assert P.quadratic_form([0, 1, 3]) == pytest.approx(5.0)


@given(st.integers(3, 30), st.integers(1, 2))
def test_penalty_psd_and_null_space(q, d):
    P = difference_penalty(q, d)
    np.testing.assert_array_equal(P.matrix, P.matrix.T)
    ev = np.linalg.eigvalsh(P.matrix)
    assert ev.min() >= -1e-10
    assert int(np.sum(np.abs(ev) < 1e-9)) == d


def test_constant_function_coefficients_unpenalized():
    # a constant function has equal B-spline coefficients (partition of unity)
    basis = BSplineBasis(20, 10)
    coef = np.full(10, 2.5)
    np.testing.assert_allclose(basis.eval(np.arange(21)) @ coef, 2.5)
    assert difference_penalty(10, 1).quadratic_form(coef) == pytest.approx(0.0, abs=1e-12)


@given(st.lists(st.floats(-5, 5), min_size=4, max_size=12))
def test_quadratic_form_nonnegative(coef):
    assert difference_penalty(len(coef), 1).quadratic_form(coef) >= 0
    assert theta_penalty(len(coef) - 1).quadratic_form(coef) >= 0
