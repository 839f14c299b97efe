"""Reference count models: Poisson, negative binomial, zero-inflated
Poisson and the logit/Poisson hurdle model.

All models use a log link for the count mean and put an intercept in
front of the covariates.  Zero parts use the full covariate vector.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy import linalg, stats
from scipy.special import digamma, expit, gammaln, log_expit, polygamma

from .data import CountDataset, DataError
from .distribution import PredictedDistribution, from_pmf_with_tail
from .transition import CoefRow, _as_matrix, _check_design_matrix

logger = logging.getLogger(__name__)

KINDS = ("poisson", "negbin", "zip", "hurdle")
NU_MAX = 1e8


@dataclass(frozen=True)
class BaselineSpec:
    kind: str
    max_iter: int = 200
    tol: float = 1e-8

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown baseline {self.kind!r}; choose from {KINDS}")

    def fit(self, data: CountDataset) -> "BaselineFit":
        return FITTERS[self.kind](data, max_iter=self.max_iter, tol=self.tol)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "max_iter": self.max_iter, "tol": self.tol}


@dataclass(frozen=True)
class BaselineFit:
    """Fitted baseline.

    ``beta`` holds the count-part coefficients (intercept first); ``gamma``
    the zero-part coefficients, which model ``logit P(structural zero)`` for
    ``zip`` and ``logit P(Y > 0)`` for ``hurdle``.  ``covariance`` is over
    ``params`` = ``beta``, then ``gamma``, then ``log(nu)``.
    """

    kind: str
    column_names: tuple[str, ...]
    beta: np.ndarray
    covariance: np.ndarray
    loglik: float
    converged: bool
    iterations: int
    gamma: np.ndarray | None = None
    nu: float | None = None
    flags: tuple[str, ...] = ()
    part_logliks: tuple[float, ...] = ()
    encoder_meta: tuple = field(default=(), repr=False)

    @property
    def params(self) -> np.ndarray:
        parts = [self.beta]
        if self.gamma is not None:
            parts.append(self.gamma)
        if self.nu is not None:
            parts.append(np.array([np.log(self.nu)]))
        return np.concatenate(parts)

    @property
    def param_names(self) -> list[str]:
        names = ["(Intercept)", *self.column_names]
        out = list(names)
        if self.gamma is not None:
            out += [f"zero:{n}" for n in names]
        if self.nu is not None:
            out.append("log(nu)")
        return out

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def mean_parameters(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
        X1 = _with_intercept(X)
        mu = np.exp(X1 @ self.beta)
        zero = None if self.gamma is None else expit(X1 @ self.gamma)
        return mu, zero

    def predict_pmf(self, covariates=None, M: int | None = None) -> PredictedDistribution:
        return predict_pmf_baseline(self, covariates, M)

    def to_dict(self) -> dict[str, Any]:
        from .persist import model_to_dict

        return model_to_dict(self)


def _with_intercept(X: np.ndarray) -> np.ndarray:
    return np.hstack([np.ones((X.shape[0], 1)), X])


def _newton(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray, np.ndarray]],
    beta: np.ndarray,
    max_iter: int,
    tol: float,
    llfun: Callable[[np.ndarray], float] | None = None,
) -> tuple[np.ndarray, float, bool, int, np.ndarray]:
    """Fisher scoring with step halving.

    ``fun(b)`` returns (loglik, score, information).  Returns the estimate,
    loglik, convergence flag, iteration count and last accepted step.
    """
    llfun = llfun or (lambda b: fun(b)[0])
    ll, g, info = fun(beta)
    last = np.zeros_like(beta)
    for it in range(1, max_iter + 1):
        try:
            step = linalg.cho_solve(linalg.cho_factor(info), g)
        except (linalg.LinAlgError, ValueError):
            step = linalg.lstsq(info, g)[0]
        t = 1.0
        for _ in range(31):
            cand = beta + t * step
            ll_new = llfun(cand)
            if np.isfinite(ll_new) and ll_new >= ll:
                break
            t *= 0.5
        else:
            return beta, ll, bool(abs(g @ step) <= tol * (abs(ll) + 1.0)), it, last
        last = cand - beta
        beta = cand
        change = ll_new - ll
        ll, g, info = fun(beta)
        if change <= tol * (abs(ll) + 1.0) and np.linalg.norm(g) <= 1e-6 * max(1.0, np.sqrt(abs(ll))):
            return beta, ll, True, it, last
        if change <= 1e-14 * (abs(ll) + 1.0):
            return beta, ll, True, it, last
    return beta, ll, False, max_iter, last


def _divergent(beta: np.ndarray, last: np.ndarray) -> np.ndarray:
    return (np.abs(beta) > 10.0) & (np.abs(last) > 0.5)


def _inv(info: np.ndarray) -> np.ndarray:
    try:
        out = linalg.inv(info)
    except linalg.LinAlgError:
        out = linalg.pinvh(info)
    return 0.5 * (out + out.T)


# -- count-part building blocks -------------------------------------------

def _poisson_parts(X1, y, w=None):
    w = np.ones(len(y)) if w is None else w
    const = np.sum(w * gammaln(y + 1.0))

    def fun(b):
        eta = X1 @ b
        mu = np.exp(eta)
        ll = float(np.sum(w * (y * eta - mu)) - const)
        g = X1.T @ (w * (y - mu))
        info = (X1 * (w * mu)[:, None]).T @ X1
        return ll, g, info

    return fun


def _logistic_parts(X1, t, w=None):
    """Binary (or fractional) logistic log-likelihood with response ``t``."""
    w = np.ones(len(t)) if w is None else w

    def fun(b):
        eta = X1 @ b
        ll = float(np.sum(w * (t * log_expit(eta) + (1 - t) * log_expit(-eta))))
        p = expit(eta)
        g = X1.T @ (w * (t - p))
        info = (X1 * (w * p * (1 - p))[:, None]).T @ X1
        return ll, g, info

    return fun


def _truncated_poisson_parts(X1, y):
    const = np.sum(gammaln(y + 1.0))

    def fun(b):
        eta = X1 @ b
        mu = np.exp(eta)
        log1m = np.log(-np.expm1(-mu))
        ll = float(np.sum(y * eta - mu - log1m) - const)
        m = mu / -np.expm1(-mu)  # truncated mean
        g = X1.T @ (y - m)
        var = m * (1.0 + mu - m)
        info = (X1 * var[:, None]).T @ X1
        return ll, g, info

    return fun


def _start(X1, y):
    b = np.zeros(X1.shape[1])
    b[0] = np.log(max(float(np.mean(y)), 1e-3))
    return b


# -- fitters --------------------------------------------------------------

def fit_poisson(data: CountDataset, max_iter: int = 200, tol: float = 1e-8) -> BaselineFit:
    _check_design_matrix(data)
    X1 = _with_intercept(data.covariates)
    y = data.outcomes.astype(float)
    fun = _poisson_parts(X1, y)
    beta, ll, conv, it, last = _newton(fun, _start(X1, y), max_iter, tol)
    flags = ()
    if np.any(_divergent(beta, last)) or np.all(y == 0):
        flags = ("divergent coefficients",)
    info = fun(beta)[2]
    return BaselineFit("poisson", data.column_names, beta, _inv(info), ll, conv, it,
                       flags=flags, encoder_meta=data.encoder_meta)


def _nb_loglik(y, mu, nu):
    return float(np.sum(
        gammaln(y + nu) - gammaln(nu) - gammaln(y + 1.0)
        + nu * np.log(nu / (nu + mu)) + y * np.log(mu / (nu + mu))
    ))


def _nb_beta(X1, y, nu, beta, max_iter, tol):
    def fun(b):
        eta = X1 @ b
        mu = np.exp(eta)
        ll = _nb_loglik(y, mu, nu)
        wt = mu / (1.0 + mu / nu)
        g = X1.T @ ((y - mu) / (1.0 + mu / nu))
        info = (X1 * wt[:, None]).T @ X1
        return ll, g, info

    return _newton(fun, beta, max_iter, tol)


def _nb_nu_derivs(y, mu, nu):
    """First and expected-style second derivative of the loglik in log(nu)."""
    d1 = np.sum(digamma(y + nu) - digamma(nu) + np.log(nu) + 1.0 - np.log(nu + mu) - (y + nu) / (nu + mu))
    d2 = np.sum(polygamma(1, y + nu) - polygamma(1, nu) + 1.0 / nu - 2.0 / (nu + mu) + (y + nu) / (nu + mu) ** 2)
    g = nu * d1
    h = nu * nu * d2 + nu * d1
    return float(g), float(h)


def fit_negbin(data: CountDataset, max_iter: int = 200, tol: float = 1e-8) -> BaselineFit:
    """Negative binomial by profiling: Fisher scoring for ``beta`` at fixed
    ``nu``, Newton steps on ``log(nu)`` outside.

    Data without overdispersion drive ``nu`` to infinity; the fit then
    returns the Poisson estimate with ``nu = NU_MAX`` and a
    ``"poisson-limit"`` flag.
    """
    _check_design_matrix(data)
    X1 = _with_intercept(data.covariates)
    y = data.outcomes.astype(float)
    pois = fit_poisson(data, max_iter, tol)
    beta = pois.beta.copy()
    mu = np.exp(X1 @ beta)
    # moment start for nu
    excess = np.sum((y - mu) ** 2 - mu)
    nu = float(np.clip(np.sum(mu**2) / excess, 1e-3, 1e6)) if excess > 0 else 1e6
    log_nu = np.log(nu)
    ll = -np.inf
    converged = False
    flags: list[str] = []
    total = 0
    for total in range(1, max_iter + 1):
        beta, ll_b, _, _, _ = _nb_beta(X1, y, np.exp(log_nu), beta, max_iter, tol * 1e-2)
        mu = np.exp(X1 @ beta)
        g, h = _nb_nu_derivs(y, mu, np.exp(log_nu))
        step = -g / h if h < 0 else np.sign(g) * 1.0
        step = float(np.clip(step, -3.0, 3.0))
        t = 1.0
        for _ in range(31):
            cand = log_nu + t * step
            if _nb_loglik(y, mu, np.exp(cand)) >= ll_b:
                break
            t *= 0.5
        else:
            cand = log_nu
        moved = abs(cand - log_nu)
        log_nu = cand
        if log_nu > np.log(NU_MAX):
            # the supremum over nu is the Poisson limit; NU_MAX stands in for nu
            flags.append("poisson-limit")
            log_nu = np.log(NU_MAX)
            beta, ll = pois.beta.copy(), pois.loglik
            converged = pois.converged
            break
        ll_new = _nb_loglik(y, np.exp(X1 @ beta), np.exp(log_nu))
        if moved < 1e-10 or abs(ll_new - ll) <= tol * (abs(ll_new) + 1.0) * 1e-2:
            ll = ll_new
            beta, ll, _, _, _ = _nb_beta(X1, y, np.exp(log_nu), beta, max_iter, tol * 1e-2)
            converged = True
            break
        ll = ll_new
    nu = float(np.exp(log_nu))
    mu = np.exp(X1 @ beta)
    wt = mu / (1.0 + mu / nu)
    cov_b = _inv((X1 * wt[:, None]).T @ X1)
    _, h = _nb_nu_derivs(y, mu, nu)
    var_lognu = 1.0 / -h if h < 0 else np.inf
    q = len(beta)
    cov = np.zeros((q + 1, q + 1))
    cov[:q, :q] = cov_b
    cov[q, q] = var_lognu
    return BaselineFit("negbin", data.column_names, beta, cov, float(ll), converged, total, nu=nu,
                       flags=tuple(flags), encoder_meta=data.encoder_meta)


def _zip_loglik_parts(X1, y):
    zero = y == 0
    const = np.sum(gammaln(y + 1.0))
    q = X1.shape[1]

    def ll(params):
        b, c = params[:q], params[q:]
        eta, zeta = X1 @ b, X1 @ c
        mu = np.exp(eta)
        lz = np.logaddexp(log_expit(zeta), log_expit(-zeta) - mu)
        lp = log_expit(-zeta) + y * eta - mu
        return float(np.sum(np.where(zero, lz, lp)) - const)

    def grad(params):
        b, c = params[:q], params[q:]
        eta, zeta = X1 @ b, X1 @ c
        mu = np.exp(eta)
        pi = expit(zeta)
        p0 = pi + (1 - pi) * np.exp(-mu)
        gb = np.where(zero, -(1 - pi) * np.exp(-mu) * mu / p0, y - mu)
        gc = np.where(zero, pi * (1 - pi) * (1 - np.exp(-mu)) / p0, -pi)
        return np.concatenate([X1.T @ gb, X1.T @ gc])

    return ll, grad


def _numeric_hessian(grad, x, h=1e-5):
    k = x.size
    H = np.empty((k, k))
    for j in range(k):
        step = h * max(1.0, abs(x[j]))
        e = np.zeros(k)
        e[j] = step
        H[:, j] = (grad(x + e) - grad(x - e)) / (2 * step)
    return 0.5 * (H + H.T)


def fit_zip(data: CountDataset, max_iter: int = 2000, tol: float = 1e-8) -> BaselineFit:
    """Zero-inflated Poisson by EM; converged once the loglik changes by
    less than ``tol``."""
    _check_design_matrix(data)
    X1 = _with_intercept(data.covariates)
    y = data.outcomes.astype(float)
    q = X1.shape[1]
    ll_fun, grad_fun = _zip_loglik_parts(X1, y)
    zero = y == 0
    flags: list[str] = []
    if not np.any(zero):
        pois = fit_poisson(data)
        gamma = np.zeros(q)
        gamma[0] = -np.inf
        flags.append("zero part degenerate: no zero counts")
        cov = np.full((2 * q, 2 * q), np.nan)
        cov[:q, :q] = pois.covariance
        return BaselineFit("zip", data.column_names, pois.beta, cov, pois.loglik, pois.converged,
                           pois.iterations, gamma=gamma, flags=tuple(flags), encoder_meta=data.encoder_meta)

    beta = _start(X1, y[~zero]) if np.any(~zero) else _start(X1, y)
    gamma = np.zeros(q)
    gamma[0] = np.log(max(zero.mean(), 1e-3) / max(1 - zero.mean(), 1e-3))
    ll = ll_fun(np.concatenate([beta, gamma]))
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        mu = np.exp(X1 @ beta)
        pi = expit(X1 @ gamma)
        tau = np.where(zero, pi / (pi + (1 - pi) * np.exp(-mu)), 0.0)
        beta = _newton(_poisson_parts(X1, y, 1.0 - tau), beta, 50, 1e-12)[0]
        gamma = _newton(_logistic_parts(X1, tau), gamma, 50, 1e-12)[0]
        ll_new = ll_fun(np.concatenate([beta, gamma]))
        if abs(ll_new - ll) < tol:
            ll = ll_new
            converged = True
            break
        ll = ll_new
    params = np.concatenate([beta, gamma])
    pi = expit(X1 @ gamma)
    if pi.max() < 1e-4:
        flags.append("zero inflation vanishing (zero-part intercept diverging)")
    if np.any(np.abs(gamma) > 10.0):
        flags.append("divergent zero-part coefficients")
    H = _numeric_hessian(grad_fun, params)
    cov = _inv(-H)
    return BaselineFit("zip", data.column_names, beta, cov, float(ll), converged, it, gamma=gamma,
                       flags=tuple(flags), encoder_meta=data.encoder_meta)


def fit_hurdle(data: CountDataset, max_iter: int = 200, tol: float = 1e-8) -> BaselineFit:
    """Logit hurdle for ``Y > 0`` plus a zero-truncated Poisson for the
    positive counts; the two parts are fitted independently."""
    _check_design_matrix(data)
    X1 = _with_intercept(data.covariates)
    y = data.outcomes.astype(float)
    q = X1.shape[1]
    pos = y > 0
    flags: list[str] = []

    hfun = _logistic_parts(X1, pos.astype(float))
    gamma0 = np.zeros(q)
    gamma0[0] = np.log(max(pos.mean(), 1e-3) / max(1 - pos.mean(), 1e-3))
    gamma, ll_zero, conv_z, it_z, last_z = _newton(hfun, gamma0, max_iter, tol)
    if pos.all() or (~pos).all():
        flags.append("hurdle part degenerate")
    if np.any(_divergent(gamma, last_z)):
        flags.append("divergent hurdle coefficients")
    cov_g = _inv(hfun(gamma)[2])

    if pos.sum() >= 1:
        Xp, yp = X1[pos], y[pos]
        tfun = _truncated_poisson_parts(Xp, yp)
        beta, ll_count, conv_c, it_c, last_c = _newton(tfun, _start(Xp, yp), max_iter, tol)
        if np.all(yp == 1) or np.any(_divergent(beta, last_c)):
            flags.append("count part degenerate")
        cov_b = _inv(tfun(beta)[2])
    else:
        beta = np.zeros(q)
        ll_count, conv_c, it_c = 0.0, True, 0
        cov_b = np.full((q, q), np.nan)
        flags.append("count part degenerate: no positive counts")
    cov = linalg.block_diag(cov_b, cov_g)
    return BaselineFit("hurdle", data.column_names, beta, cov, float(ll_zero + ll_count),
                       bool(conv_z and conv_c), max(it_z, it_c), gamma=gamma, flags=tuple(flags),
                       part_logliks=(float(ll_zero), float(ll_count)), encoder_meta=data.encoder_meta)


FITTERS = {"poisson": fit_poisson, "negbin": fit_negbin, "zip": fit_zip, "hurdle": fit_hurdle}


def fit_baseline(data: CountDataset, kind: str) -> BaselineFit:
    return BaselineSpec(kind).fit(data)


# -- prediction -----------------------------------------------------------

def poisson_pmf(r, mu):
    return stats.poisson.pmf(r, mu)


def negbin_pmf(r, mu, nu):
    return stats.nbinom.pmf(r, nu, nu / (nu + mu))


def zip_pmf(r, mu, pi):
    base = (1 - pi) * stats.poisson.pmf(r, mu)
    return base + np.where(np.asarray(r) == 0, pi, 0.0)


def hurdle_pmf(r, mu, p_pos):
    """Hurdle pmf with ``P(Y > 0) = p_pos`` and a zero-truncated Poisson(mu)."""
    r = np.asarray(r)
    trunc = np.exp(stats.poisson.logpmf(r, mu) - np.log(-np.expm1(-mu)))
    return np.where(r == 0, 1.0 - p_pos, p_pos * trunc)


def predict_pmf_baseline(fit: BaselineFit, covariates=None, M: int | None = None) -> PredictedDistribution:
    """Pmf on ``0..M`` with the tail above ``M`` folded into ``M``.

    ``M`` defaults to the 99.99% quantile of the largest predicted mean,
    rounded up.
    """
    X = _as_matrix(fit, covariates)
    mu, zero = fit.mean_parameters(X)
    if M is None:
        M = int(stats.poisson.ppf(0.9999, mu.max())) + 1
        if fit.nu is not None:
            M = int(negbin_pmf_ppf(0.9999, mu.max(), fit.nu)) + 1
    if M < 1:
        raise DataError("M must be >= 1")
    r = np.arange(M)[None, :]
    m = mu[:, None]
    if fit.kind == "poisson":
        head = poisson_pmf(r, m)
    elif fit.kind == "negbin":
        head = negbin_pmf(r, m, fit.nu)
    elif fit.kind == "zip":
        head = zip_pmf(r, m, zero[:, None])
    else:
        head = hurdle_pmf(r, m, zero[:, None])
    return from_pmf_with_tail(head)


def negbin_pmf_ppf(q, mu, nu):
    return stats.nbinom.ppf(q, nu, nu / (nu + mu))


def summarize_baseline(fit: BaselineFit) -> list[CoefRow]:
    se = fit.se
    rows = []
    for name, coef, s in zip(fit.param_names, fit.params, se):
        if name == "log(nu)":
            continue
        z = coef / s if s > 0 else float("nan")
        rows.append(CoefRow(name, float(coef), float(s), float(z)))
    return rows
