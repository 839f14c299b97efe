import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from transcount import kernels, links


def brute_force(y, X, coef, link):
    """Loop over augmented records one at a time."""
    name = ("logit", "cloglog")[link]
    S, c = coef.shape
    ll, U, W = 0.0, np.zeros((S, c)), np.zeros((S, c, c))
    for i, yi in enumerate(y):
        z = np.concatenate([[1.0], X[i]])
        for s in range(yi + 1):
            eta = np.array([z @ coef[s]])
            t = float(s < yi)
            ll += float(links.log_cdf(eta, name)[0] if t else links.log_sf(eta, name)[0])
            u, w = links.score_weight(eta, np.array([t]), name)
            U[s] += u[0] * z
            W[s] += w[0] * np.outer(z, z)
    return ll, U, W


BACKENDS = [kernels.python_suff_stats] + ([kernels.compiled_suff_stats] if kernels.compiled_suff_stats else [])


@pytest.mark.parametrize("impl", BACKENDS)
@pytest.mark.parametrize("link", [0, 1])
def test_matches_brute_force(impl, link):
    rng = np.random.default_rng(link)
    y = rng.integers(0, 6, 25)
    X = rng.normal(size=(25, 2))
    coef = rng.normal(scale=0.5, size=(8, 3))
    ll, U, W = impl(y, X, coef, link)
    ll0, U0, W0 = brute_force(y, X, coef, link)
    assert ll == pytest.approx(ll0, rel=1e-12)
    np.testing.assert_allclose(U, U0, atol=1e-12)
    np.testing.assert_allclose(W, W0, atol=1e-12)


@pytest.mark.skipif(kernels.compiled_suff_stats is None, reason="extension not built")
@given(st.integers(0, 2**32 - 1), st.integers(0, 3), st.sampled_from([0, 1]))
def test_compiled_equals_python(seed, p, link):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 30))
    y = rng.integers(0, 9, n)
    X = rng.normal(size=(n, p))
    coef = rng.normal(size=(12, p + 1))
    a = kernels.compiled_suff_stats(y, X, coef, link)
    b = kernels.python_suff_stats(y, X, coef, link)
    assert a[0] == pytest.approx(b[0], rel=1e-12, abs=1e-12)
    np.testing.assert_allclose(a[1], b[1], atol=1e-10)
    np.testing.assert_allclose(a[2], b[2], atol=1e-10)


@pytest.mark.parametrize("impl", BACKENDS)
def test_loglik_only(impl):
    ll, U, W = impl(np.array([0, 2]), np.zeros((2, 0)), np.zeros((3, 1)), 0, False)
    assert U is None and W is None
    assert ll == pytest.approx(4 * np.log(0.5))


@pytest.mark.parametrize("impl", BACKENDS)
def test_count_beyond_table(impl):
    with pytest.raises(ValueError, match="exceeds"):
        impl(np.array([5]), np.zeros((1, 0)), np.zeros((3, 1)), 0)


@pytest.mark.parametrize("impl", BACKENDS)
def test_shape_errors(impl):
    with pytest.raises(ValueError):
        impl(np.array([1, 2]), np.zeros((3, 1)), np.zeros((3, 2)), 0)
    with pytest.raises(ValueError):
        impl(np.array([1]), np.zeros((1, 1)), np.zeros((3, 3)), 0)


@pytest.mark.parametrize("impl", BACKENDS)
def test_non_finite_predictor(impl):
    coef = np.zeros((3, 1))
    coef[1, 0] = np.inf
    with pytest.raises(ValueError, match="non-finite"):
        impl(np.array([2]), np.zeros((1, 0)), coef, 0)


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")
