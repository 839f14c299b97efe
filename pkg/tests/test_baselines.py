import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import optimize, stats
from scipy.special import expit

from transcount.baselines import (
    BaselineSpec,
    fit_hurdle,
    fit_negbin,
    fit_poisson,
    fit_zip,
    negbin_pmf,
    poisson_pmf,
    summarize_baseline,
)
from transcount.data import CountDataset, DataError

from conftest import random_dataset


def _X1(d):
    return np.hstack([np.ones((d.n, 1)), d.covariates])


def _mle(negll, x0):
    res = optimize.minimize(negll, x0, method="BFGS", options={"gtol": 1e-9, "maxiter": 10000})
    return res.x, -res.fun


@pytest.fixture(scope="module")
def sample():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(300, 2))
    mu = np.exp(0.8 + 0.4 * X[:, 0] - 0.2 * X[:, 1])
    zero = rng.random(300) < expit(-1.0 + 0.8 * X[:, 1])
    y = np.where(zero, 0, rng.poisson(rng.gamma(2.0, mu / 2.0)))
    return CountDataset(y, X, ("a", "b"))


def test_poisson_matches_direct_optimizer(sample):
    X1, y = _X1(sample), sample.outcomes
    f = fit_poisson(sample)
    b, ll = _mle(lambda b: -np.sum(stats.poisson.logpmf(y, np.exp(X1 @ b))), np.zeros(3))
    np.testing.assert_allclose(f.beta, b, atol=1e-5)
    assert f.loglik == pytest.approx(ll, abs=1e-6)
    # expected information of the Poisson GLM
    mu = np.exp(X1 @ f.beta)
    np.testing.assert_allclose(f.covariance, np.linalg.inv(X1.T @ (mu[:, None] * X1)), rtol=1e-6)


def test_negbin_matches_direct_optimizer(sample):
    X1, y = _X1(sample), sample.outcomes
    f = fit_negbin(sample)

    def negll(p):
        mu, nu = np.exp(X1 @ p[:3]), np.exp(p[3])
        return -np.sum(stats.nbinom.logpmf(y, nu, nu / (nu + mu)))

    p, ll = _mle(negll, np.zeros(4))
    np.testing.assert_allclose(f.beta, p[:3], atol=1e-4)
    assert f.nu == pytest.approx(np.exp(p[3]), rel=1e-3)
    assert f.loglik == pytest.approx(ll, abs=1e-6)


def test_zip_matches_direct_optimizer(sample):
    X1, y = _X1(sample), sample.outcomes
    f = fit_zip(sample)

    def negll(p):
        mu, pi = np.exp(X1 @ p[:3]), expit(X1 @ p[3:])
        with np.errstate(divide="ignore"):
            return -np.sum(np.log(np.where(y == 0, pi, 0.0) + (1 - pi) * stats.poisson.pmf(y, mu)))

    with np.errstate(invalid="ignore"):
        p, ll = _mle(negll, np.zeros(6))
    np.testing.assert_allclose(f.beta, p[:3], atol=1e-3)
    np.testing.assert_allclose(f.gamma, p[3:], atol=1e-3)
    assert f.loglik == pytest.approx(ll, abs=1e-5)
    assert f.converged


def test_hurdle_part_independence(sample):
    X1, y = _X1(sample), sample.outcomes
    f = fit_hurdle(sample)
    assert f.loglik == pytest.approx(sum(f.part_logliks), abs=1e-10)
    pos = y > 0
    g, ll_zero = _mle(lambda g: -np.sum(stats.bernoulli.logpmf(pos, expit(X1 @ g))), np.zeros(3))

    def trunc(b):
        mu = np.exp(X1[pos] @ b)
        return -np.sum(stats.poisson.logpmf(y[pos], mu) - np.log(-np.expm1(-mu)))

    b, ll_count = _mle(trunc, np.zeros(3))
    np.testing.assert_allclose(f.gamma, g, atol=1e-4)
    np.testing.assert_allclose(f.beta, b, atol=1e-4)
    assert f.part_logliks == pytest.approx((ll_zero, ll_count), abs=1e-6)


def test_negbin_dominates_poisson(sample):
    assert fit_negbin(sample).loglik >= fit_poisson(sample).loglik - 1e-9


def test_negbin_on_equidispersed_data_approaches_poisson():
    rng = np.random.default_rng(3)
    d = CountDataset(rng.binomial(20, 0.2, 400), np.zeros((400, 0)), ())  # underdispersed
    nb, po = fit_negbin(d), fit_poisson(d)
    assert nb.loglik >= po.loglik - 1e-8
    assert nb.nu > 1e4 and "poisson-limit" in nb.flags
    np.testing.assert_allclose(nb.beta, po.beta, atol=1e-4)


def test_poisson_pmf_closed_form():
    assert poisson_pmf(0, 1.0) == pytest.approx(np.exp(-1), abs=1e-15)
    assert poisson_pmf(0, 1.0) == pytest.approx(0.3679, abs=1e-4)


def test_negbin_limit_is_poisson():
    r = np.arange(40)
    assert np.max(np.abs(negbin_pmf(r, 5.0, 1e7) - poisson_pmf(r, 5.0))) < 1e-4


@pytest.mark.parametrize("kind", ["poisson", "negbin", "zip", "hurdle"])
def test_predicted_pmfs_normalized(kind, sample):
    f = BaselineSpec(kind).fit(sample)
    for M in (None, 3, 80):
        dist = f.predict_pmf(sample.covariates[:20], M=M)
        assert np.all(dist.pmf >= 0)
        np.testing.assert_allclose(dist.pmf.sum(axis=1), 1.0, atol=1e-12)
    cov = f.covariance
    np.testing.assert_allclose(cov, cov.T, atol=1e-10)
    assert np.linalg.eigvalsh(cov).min() > -1e-8


@given(st.integers(0, 2**32 - 1))
def test_poisson_recovers_truth(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(2000, 1))
    y = rng.poisson(np.exp(1.0 + 0.5 * X[:, 0]))
    f = fit_poisson(CountDataset(y, X, ("x",)))
    z = (f.beta - [1.0, 0.5]) / f.se
    assert np.all(np.abs(z) < 5)


def test_quine_negbin_table(quine):
    f = fit_negbin(quine)
    rows = {r.name: r for r in summarize_baseline(f)}
    assert rows["Eth"].coef == pytest.approx(0.569, abs=0.005)
    assert rows["Eth"].se == pytest.approx(0.153, abs=0.005)
    assert rows["Eth"].z == pytest.approx(3.713, abs=0.05)
    assert "log(nu)" not in rows


def test_degenerate_zero_parts():
    d = CountDataset(np.array([1, 2, 3, 1, 4, 2]), np.arange(6.0)[:, None], ("x",))
    h = fit_hurdle(d)
    assert "hurdle part degenerate" in h.flags
    assert h.predict_pmf(d.covariates).pmf[:, 0] == pytest.approx(0.0, abs=1e-6)


def test_unknown_kind():
    with pytest.raises(ValueError, match="unknown baseline"):
        BaselineSpec("geometric")


def test_zero_variance_column():
    with pytest.raises(DataError):
        fit_poisson(CountDataset(np.array([0, 1, 2]), np.ones((3, 1)), ("c",)))


def test_intercept_only_poisson_is_sample_mean():
    rng = np.random.default_rng(0)
    d = random_dataset(rng, n=50, p=0)
    f = fit_poisson(d)
    assert np.exp(f.beta[0]) == pytest.approx(d.outcomes.mean(), rel=1e-10)
