"""Pure numpy version of the compiled kernels (same signatures)."""

from __future__ import annotations

import numpy as np

from . import links

_LINK_NAMES = {0: "logit", 1: "cloglog"}


def _records_by_category(y: np.ndarray):
    """Return (obs, cat) for all augmented records, grouped by category."""
    ymax = int(y.max()) if y.size else -1
    counts = (y[None, :] >= np.arange(ymax + 1)[:, None]).sum(axis=1)
    obs = np.concatenate([np.flatnonzero(y >= s) for s in range(ymax + 1)]) if ymax >= 0 else np.zeros(0, int)
    cat = np.repeat(np.arange(ymax + 1), counts)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.int64)
    return obs, cat, starts


def suff_stats(y, X, coef, link: int, want_derivs: bool = True):
    y = np.asarray(y, dtype=np.int64)
    X = np.asarray(X, dtype=float)
    coef = np.asarray(coef, dtype=float)
    n, p = X.shape
    S = coef.shape[0]
    if y.shape[0] != n:
        raise ValueError("X and y differ in length")
    if coef.shape[1] != p + 1:
        raise ValueError("coef must have p + 1 columns")
    if n and y.max() >= S:
        i = int(np.argmax(y))
        raise ValueError(f"observation {i}: count {y[i]} exceeds largest category {S - 1}")
    name = _LINK_NAMES[link]
    obs, cat, starts = _records_by_category(y)
    Z = np.empty((obs.size, p + 1))
    Z[:, 0] = 1.0
    Z[:, 1:] = X[obs]
    eta = np.einsum("rc,rc->r", Z, coef[cat])
    if not np.all(np.isfinite(eta)):
        k = int(np.flatnonzero(~np.isfinite(eta))[0])
        raise ValueError(f"non-finite linear predictor at record (obs={obs[k]}, category={cat[k]})")
    yt = (cat < y[obs]).astype(float)
    ll = float(np.sum(np.where(yt > 0, links.log_cdf(eta, name), links.log_sf(eta, name))))
    if not want_derivs:
        return ll, None, None
    u, w = links.score_weight(eta, yt, name)
    U = np.zeros((S, p + 1))
    W = np.zeros((S, p + 1, p + 1))
    if obs.size:
        k = starts.size
        U[:k] = np.add.reduceat(u[:, None] * Z, starts, axis=0)
        W[:k] = np.add.reduceat(w[:, None, None] * Z[:, :, None] * Z[:, None, :], starts, axis=0)
    return ll, U, W
