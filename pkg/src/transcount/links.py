"""Binary link functions: logit and complementary log-log.

Everything is computed on the log scale where it matters so that the
fitter survives linear predictors far into the tails (separation).
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit, log_expit, logit

LINKS = ("logit", "cloglog")
LINK_CODES = {"logit": 0, "cloglog": 1}


def check_link(link: str) -> int:
    try:
        return LINK_CODES[link]
    except KeyError:
        raise ValueError(f"unknown link {link!r}; choose from {LINKS}") from None


def cdf(eta, link: str = "logit") -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    if link == "logit":
        return expit(eta)
    check_link(link)
    return -np.expm1(-np.exp(eta))


def log_cdf(eta, link: str = "logit") -> np.ndarray:
    """``log F(eta)``."""
    eta = np.asarray(eta, dtype=float)
    if link == "logit":
        return log_expit(eta)
    check_link(link)
    return np.log(-np.expm1(-np.exp(eta)))


def log_sf(eta, link: str = "logit") -> np.ndarray:
    """``log(1 - F(eta))``."""
    eta = np.asarray(eta, dtype=float)
    if link == "logit":
        return log_expit(-eta)
    check_link(link)
    return -np.exp(eta)


def inverse(prob, link: str = "logit") -> np.ndarray:
    prob = np.asarray(prob, dtype=float)
    if link == "logit":
        return logit(prob)
    check_link(link)
    return np.log(-np.log1p(-prob))


def score_weight(eta, ytilde, link: str = "logit") -> tuple[np.ndarray, np.ndarray]:
    """Per-record score ``u = dl/deta`` and Fisher weight ``w = E[-d2l/deta2]``."""
    eta = np.asarray(eta, dtype=float)
    if link == "logit":
        F = expit(eta)
        return ytilde - F, F * (1.0 - F)
    check_link(link)
    e = np.exp(eta)
    F = -np.expm1(-e)
    ratio = e / F  # f / (F (1 - F)) with f = e (1 - F)
    u = ratio * (ytilde - F)
    w = ratio * np.exp(eta - e)
    return u, w
