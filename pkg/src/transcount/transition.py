"""Penalized transition models for counts.

The model sets ``P(Y > r | Y >= r, x) = F(theta_r + x' beta_r)``.  Three
variants are supported:

``basic``
    one ``beta`` shared by all transitions.
``zero-split``
    the first transition (0 vs. >0) gets its own intercept and ``beta_0``;
    transitions ``r >= 1`` share ``beta`` and smoothed intercepts.
``varying``
    selected coefficients vary smoothly with ``r`` through a B-spline
    expansion with a difference penalty.

Intercepts are smoothed either directly (``smoother="theta"``, squared
first differences of adjacent ``theta_r``) or through P-splines
(``smoother="psplines"``).  All variants are linear in the parameter
vector: a fixed tensor ``L[s, c, k]`` maps parameters to the coefficient
table ``C[s, c]`` (column 0 the intercept, column ``1 + j`` covariate
``j``).  Fitting is Fisher scoring on the penalized log-likelihood
``l(a) - a' P a`` with step halving.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from scipy import linalg

from . import links
from .basis import BSplineBasis, difference_penalty, theta_penalty
from .data import AugmentedDataset, CountDataset, DataError, max_observed, round_half_up
from .distribution import PredictedDistribution
from .kernels import suff_stats

logger = logging.getLogger(__name__)

VARIANTS = ("basic", "varying", "zero-split")
SMOOTHERS = ("theta", "psplines")
SEPARATION_MAGNITUDE = 10.0
SEPARATION_GROWTH = 0.5
MAX_HALVINGS = 30
# objective decreases smaller than this (relative) are rounding noise
ROUNDING_SLACK = 64 * np.finfo(float).eps


class SingularInformationError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class TransitionSpec:
    """Configuration of a transition model fit.

    ``lam`` weights every smoothing penalty; ``lam_overrides`` maps a
    covariate name (or ``"theta"``) to its own weight.  ``M=None`` picks
    the integer closest to ``1.2 * max(Y)``.  ``n_basis=None`` uses
    ``min(20, number of categories)``.  ``varying=None`` with
    ``variant="varying"`` lets every covariate vary.
    """

    link: str = "logit"
    smoother: str = "psplines"
    lam: float = 1.0
    M: int | None = None
    n_basis: int | None = None
    degree: int = 3
    diff_order: int = 1
    variant: str = "basic"
    varying: tuple[str, ...] | None = None
    lam_overrides: tuple[tuple[str, float], ...] = ()
    max_iter: int = 100
    tol: float = 1e-8
    gtol: float = 1e-6
    se: str = "model"

    def __post_init__(self) -> None:
        links.check_link(self.link)
        if self.smoother not in SMOOTHERS:
            raise ValueError(f"unknown smoother {self.smoother!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if not self.lam >= 0:
            raise ValueError("lam must be >= 0")
        if self.diff_order not in (1, 2):
            raise ValueError("diff_order must be 1 or 2")
        if self.se not in ("model", "sandwich"):
            raise ValueError("se must be 'model' or 'sandwich'")
        if isinstance(self.lam_overrides, Mapping):
            object.__setattr__(self, "lam_overrides", tuple(sorted(self.lam_overrides.items())))
        if self.varying is not None:
            object.__setattr__(self, "varying", tuple(self.varying))

    def replace(self, **changes: Any) -> "TransitionSpec":
        return dataclasses.replace(self, **changes)

    def resolve_M(self, m_max: int) -> int:
        if self.M is not None:
            if self.M < m_max:
                raise DataError(f"M={self.M} is below the largest observed count {m_max}")
            return max(int(self.M), 1)
        return max(round_half_up(1.2 * m_max), m_max + 1)

    def lam_for(self, term: str) -> float:
        return dict(self.lam_overrides).get(term, self.lam)

    def fit(self, data: CountDataset, start: np.ndarray | None = None) -> "FittedTransitionModel":
        return fit(data, self, start=start)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["varying"] = None if self.varying is None else list(self.varying)
        d["lam_overrides"] = [list(t) for t in self.lam_overrides]
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "TransitionSpec":
        d = dict(d)
        if d.get("varying") is not None:
            d["varying"] = tuple(d["varying"])
        d["lam_overrides"] = tuple((k, float(v)) for k, v in d.get("lam_overrides", ()))
        return cls(**d)


@dataclass(frozen=True)
class ParamBlock:
    name: str
    start: int
    size: int
    labels: tuple[str, ...]
    penalty: np.ndarray | None = None
    lam: float = 0.0

    @property
    def slice(self) -> slice:
        return slice(self.start, self.start + self.size)


class TransitionDesign:
    """Parameter layout of one transition model on categories ``0..M``."""

    def __init__(self, spec: TransitionSpec, M: int, column_names: Sequence[str]):
        self.spec = spec
        self.M = int(M)
        self.S = self.M + 1
        self.column_names = tuple(column_names)
        self.p = len(self.column_names)
        self.link_code = links.LINK_CODES[spec.link]
        if spec.variant == "zero-split" and self.M < 2:
            raise DataError("zero-split model needs M >= 2")
        if spec.variant == "varying":
            wanted = self.column_names if spec.varying is None else spec.varying
            unknown = set(wanted) - set(self.column_names)
            if unknown:
                raise DataError(f"unknown varying covariates: {sorted(unknown)}")
            self.varying = tuple(c for c in self.column_names if c in wanted)
        else:
            self.varying = ()

        self.blocks: list[ParamBlock] = []
        cols: list[tuple[int, np.ndarray]] = []  # (coef-table column, (S, size) map)
        lo = 1 if spec.variant == "zero-split" else 0

        if spec.variant == "zero-split":
            first = np.zeros((self.S, 1))
            first[0, 0] = 1.0
            self._add("theta0", ("theta[0]",), None, 0.0, cols, [(0, first)])

        n_cat = self.S - lo
        if spec.smoother == "theta":
            T = np.zeros((self.S, n_cat))
            T[lo:, :] = np.eye(n_cat)
            pen = theta_penalty(n_cat - 1).matrix if n_cat >= 2 else None
            labels = tuple(f"theta[{s}]" for s in range(lo, self.S))
        else:
            # the smooth spans every category; under zero-split theta[0] is an
            # extra offset at r=0, so the smooth is not cut at the boundary
            self.basis = self._basis(0)
            T = self.basis.eval(np.arange(self.S))
            B = T
            pen = difference_penalty(B.shape[1], min(spec.diff_order, B.shape[1] - 1)).matrix
            labels = tuple(f"gamma[{k}]" for k in range(B.shape[1]))
        self._add("theta", labels, pen, spec.lam_for("theta"), cols, [(0, T)])

        if spec.variant == "zero-split":
            zero_rows = np.zeros((self.S, 1))
            zero_rows[0, 0] = 1.0
            rest = np.zeros((self.S, 1))
            rest[1:, 0] = 1.0
            for j, name in enumerate(self.column_names):
                self._add(f"zero:{name}", (f"zero:{name}",), None, 0.0, cols, [(1 + j, zero_rows)])
            for j, name in enumerate(self.column_names):
                self._add(name, (name,), None, 0.0, cols, [(1 + j, rest)])
        else:
            ones = np.ones((self.S, 1))
            for j, name in enumerate(self.column_names):
                if name in self.varying:
                    if not hasattr(self, "basis"):
                        self.basis = self._basis(0)
                    B = self.basis.eval(np.arange(self.S))
                    pen = difference_penalty(B.shape[1], min(spec.diff_order, B.shape[1] - 1)).matrix
                    labels = tuple(f"{name}:gamma[{k}]" for k in range(B.shape[1]))
                    self._add(name, labels, pen, spec.lam_for(name), cols, [(1 + j, B)])
                else:
                    self._add(name, (name,), None, 0.0, cols, [(1 + j, ones)])

        q = self.n_params
        self.L = np.zeros((self.S, self.p + 1, q))
        for start, parts in cols:
            for c, mat in parts:
                self.L[:, c, start : start + mat.shape[1]] += mat
        self.P = np.zeros((q, q))
        for b in self.blocks:
            if b.penalty is not None and b.lam > 0:
                self.P[b.slice, b.slice] = b.lam * b.penalty
        self._Lflat = self.L.reshape(self.S * (self.p + 1), q)

    def _basis(self, lo: int) -> BSplineBasis:
        n_cat = self.S - lo
        m = self.spec.n_basis or min(20, n_cat)
        m = max(2, min(m, n_cat))
        degree = min(self.spec.degree, m - 1)
        return BSplineBasis(self.M, m, degree, lower=lo)

    def _add(self, name, labels, penalty, lam, cols, parts) -> None:
        start = self.n_params
        self.blocks.append(ParamBlock(name, start, len(labels), tuple(labels), penalty, lam))
        cols.append((start, parts))

    @property
    def n_params(self) -> int:
        return sum(b.size for b in self.blocks)

    @property
    def labels(self) -> list[str]:
        return [lab for b in self.blocks for lab in b.labels]

    def block(self, name: str) -> ParamBlock:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def coef_table(self, alpha: np.ndarray) -> np.ndarray:
        return self.L @ alpha

    def penalty(self, alpha: np.ndarray) -> float:
        return float(alpha @ self.P @ alpha)

    def score(self, U: np.ndarray) -> np.ndarray:
        return np.einsum("sc,sck->k", U, self.L)

    def information(self, W: np.ndarray) -> np.ndarray:
        tmp = np.einsum("scd,sdk->sck", W, self.L).reshape(self._Lflat.shape)
        info = self._Lflat.T @ tmp
        return 0.5 * (info + info.T)

    def initial(self, y: np.ndarray) -> np.ndarray:
        """Intercepts from clamped empirical hazards, all slopes zero."""
        y = np.asarray(y)
        s = np.arange(self.S)
        at_risk = (y[None, :] >= s[:, None]).sum(axis=1)
        moved = (y[None, :] > s[:, None]).sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            haz = np.where(at_risk > 0, moved / np.maximum(at_risk, 1), np.nan)
        last = int(np.flatnonzero(at_risk > 0)[-1]) if np.any(at_risk > 0) else 0
        haz[last + 1 :] = haz[last]
        theta = links.inverse(np.clip(haz, 0.01, 0.99), self.spec.link)
        alpha = np.zeros(self.n_params)
        b = self.block("theta")
        T = self.L[:, 0, b.slice]
        lo = 1 if self.spec.variant == "zero-split" else 0
        alpha[b.slice] = np.linalg.lstsq(T[lo:], theta[lo:], rcond=None)[0]
        if self.spec.variant == "zero-split":
            alpha[self.block("theta0").start] = theta[0] - T[0] @ alpha[b.slice]
        return alpha


@dataclass
class _Iterate:
    alpha: np.ndarray
    loglik: float
    pen_loglik: float
    grad: np.ndarray
    info: np.ndarray


def _evaluate(design: TransitionDesign, y, X, alpha, derivs: bool = True):
    ll, U, W = suff_stats(y, X, design.coef_table(alpha), design.link_code, derivs)
    pen = design.penalty(alpha)
    if not derivs:
        return ll, ll - pen
    g = design.score(U) - 2.0 * design.P @ alpha
    info = design.information(W) + 2.0 * design.P
    return _Iterate(alpha, ll, ll - pen, g, info)


def _counts_from_augmented(augmented: AugmentedDataset) -> tuple[np.ndarray, np.ndarray]:
    if augmented.covariates is None:
        raise DataError("augmented dataset was built without covariates")
    n = augmented.covariates.shape[0]
    y = np.bincount(augmented.obs_index, minlength=n) - 1
    return y, augmented.covariates


def loglik_binary(params, augmented: AugmentedDataset, design: TransitionDesign) -> float:
    """Sum of binary log-likelihood contributions over augmented records."""
    C = design.coef_table(np.asarray(params, dtype=float))
    X = augmented.design_rows()
    cat = augmented.category
    if np.any(cat > design.M):
        raise DataError("augmented records exceed the model's largest category")
    eta = C[cat, 0] + np.einsum("rj,rj->r", X, C[cat, 1:])
    if not np.all(np.isfinite(eta)):
        k = int(np.flatnonzero(~np.isfinite(eta))[0])
        raise DataError(f"non-finite linear predictor at record {k}")
    yt = augmented.transition.astype(bool)
    return float(np.sum(np.where(yt, links.log_cdf(eta, design.spec.link), links.log_sf(eta, design.spec.link))))


def _log_pmf_matrix(C: np.ndarray, X: np.ndarray, link: str) -> np.ndarray:
    """``log P(Y = r | x_i)`` for ``r = 0..M``, all survival mass beyond
    ``M - 1`` assigned to ``M``."""
    eta = C[None, :, 0] + X @ C[:, 1:].T
    ld = links.log_cdf(eta[:, :-1], link)
    lsf = links.log_sf(eta[:, :-1], link)
    surv = np.concatenate([np.zeros((X.shape[0], 1)), np.cumsum(ld, axis=1)], axis=1)
    out = surv.copy()
    out[:, :-1] += lsf
    return out


def loglik_direct(params, data: CountDataset, design: TransitionDesign) -> float:
    """``sum_i log pi_{i, Y_i}`` from the product form
    ``(1 - F(eta_{iY})) * prod_{s<Y} F(eta_{is})``."""
    C = design.coef_table(np.asarray(params, dtype=float))
    y = data.outcomes
    if y.max() > design.M:
        raise DataError("counts exceed the model's largest category")
    eta = C[None, :, 0] + data.covariates @ C[:, 1:].T
    if not np.all(np.isfinite(eta)):
        i = int(np.flatnonzero(~np.all(np.isfinite(eta), axis=1))[0])
        raise DataError(f"non-finite linear predictor for observation {i}")
    ld = links.log_cdf(eta, design.spec.link)
    surv = np.concatenate([np.zeros((data.n, 1)), np.cumsum(ld, axis=1)], axis=1)
    rows = np.arange(data.n)
    return float(np.sum(surv[rows, y] + links.log_sf(eta[rows, y], design.spec.link)))


def gradient(params, augmented: AugmentedDataset, design: TransitionDesign) -> np.ndarray:
    """Gradient of the penalized log-likelihood."""
    y, X = _counts_from_augmented(augmented)
    return _evaluate(design, y, X, np.asarray(params, dtype=float)).grad


def penalized_information(params, augmented: AugmentedDataset, design: TransitionDesign) -> np.ndarray:
    """Expected information of the penalized log-likelihood."""
    y, X = _counts_from_augmented(augmented)
    return _evaluate(design, y, X, np.asarray(params, dtype=float)).info


def penalized_loglik(params, augmented: AugmentedDataset, design: TransitionDesign) -> float:
    a = np.asarray(params, dtype=float)
    return loglik_binary(a, augmented, design) - design.penalty(a)


def _check_design_matrix(data: CountDataset) -> None:
    if data.n == 0:
        raise DataError("empty dataset")
    if data.p and data.n > 1:
        const = np.ptp(data.covariates, axis=0) == 0
        if np.any(const):
            bad = [data.column_names[j] for j in np.flatnonzero(const)]
            raise DataError(f"covariates with zero variance: {bad}")


@dataclass(frozen=True)
class FittedTransitionModel:
    spec: TransitionSpec
    M: int
    column_names: tuple[str, ...]
    params: np.ndarray
    covariance: np.ndarray
    loglik: float
    penalized_loglik: float
    converged: bool
    iterations: int
    separation_flags: np.ndarray
    grad_norm: float
    encoder_meta: tuple = ()
    history: tuple[float, ...] = ()
    notes: tuple[str, ...] = ()
    edf: float = float("nan")
    _design: TransitionDesign | None = field(default=None, repr=False, compare=False)

    @property
    def design(self) -> TransitionDesign:
        if self._design is None:
            object.__setattr__(self, "_design", TransitionDesign(self.spec, self.M, self.column_names))
        return self._design

    @property
    def lambda_used(self) -> float:
        return self.spec.lam

    @property
    def aic(self) -> float:
        """``-2 loglik + 2 edf`` with the effective degrees of freedom of the penalized fit."""
        return -2.0 * self.loglik + 2.0 * self.edf

    @property
    def kind(self) -> str:
        return {"basic": "transition", "zero-split": "transition-zero", "varying": "transition-varying"}[
            self.spec.variant
        ]

    @property
    def param_names(self) -> list[str]:
        return self.design.labels

    @property
    def coef_table(self) -> np.ndarray:
        return self.design.coef_table(self.params)

    @property
    def theta(self) -> np.ndarray:
        """Intercepts ``theta_0..theta_M``."""
        return self.coef_table[:, 0].copy()

    @property
    def beta(self) -> dict[str, float]:
        """Category-constant slopes (non-zero part for the zero-split model)."""
        out = {}
        for name in self.column_names:
            b = self.design.block(name)
            if b.size == 1:
                out[name] = float(self.params[b.start])
        return out

    @property
    def beta_zero(self) -> dict[str, float]:
        if self.spec.variant != "zero-split":
            raise ValueError("only the zero-split model has a zero part")
        return {n: float(self.params[self.design.block(f"zero:{n}").start]) for n in self.column_names}

    @property
    def se(self) -> np.ndarray:
        se = np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))
        se[self.separation_flags] = np.nan
        return se

    def beta_curve(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """``beta_j(r)`` and pointwise standard errors over ``r = 0..M``."""
        j = self.column_names.index(name)
        Lj = self.design.L[:, 1 + j, :]
        values = Lj @ self.params
        var = np.einsum("sk,kl,sl->s", Lj, self.covariance, Lj)
        return values, np.sqrt(np.clip(var, 0.0, None))

    def predict_pmf(self, covariates=None, M: int | None = None) -> PredictedDistribution:
        return predict_pmf(self, covariates, M)

    def to_dict(self) -> dict[str, Any]:
        from .persist import model_to_dict

        return model_to_dict(self)


def _covariance(design, y, X, it: _Iterate, spec: TransitionSpec) -> tuple[np.ndarray, float]:
    """Covariance of the estimates and effective degrees of freedom
    ``tr(I_pen^-1 I) = q - tr(I_pen^-1 2P)``."""
    try:
        cf = linalg.cho_factor(it.info)
        inv = linalg.cho_solve(cf, np.eye(it.info.shape[0]))
    except linalg.LinAlgError:
        inv = linalg.pinvh(it.info)
    inv = 0.5 * (inv + inv.T)
    edf = float(inv.shape[0] - np.sum(inv * (2.0 * design.P)))
    if spec.se == "sandwich":
        G = _per_observation_scores(design, y, X, it.alpha)
        inv = inv @ (G.T @ G) @ inv
        inv = 0.5 * (inv + inv.T)
    return inv, edf


def _per_observation_scores(design: TransitionDesign, y, X, alpha) -> np.ndarray:
    from ._kernels_py import _records_by_category

    obs, cat, _ = _records_by_category(np.asarray(y))
    Z = np.hstack([np.ones((obs.size, 1)), X[obs]])
    C = design.coef_table(alpha)
    eta = np.einsum("rc,rc->r", Z, C[cat])
    u, _ = links.score_weight(eta, (cat < y[obs]).astype(float), design.spec.link)
    A = np.einsum("rc,rck->rk", Z, design.L[cat])
    G = np.zeros((len(y), design.n_params))
    np.add.at(G, obs, u[:, None] * A)
    return G


def fit(data: CountDataset, spec: TransitionSpec | None = None, start: np.ndarray | None = None) -> FittedTransitionModel:
    """Penalized ML fit by Fisher scoring with step halving.

    Raises :class:`SingularInformationError` when the penalized information
    is not positive definite (typically ``lam=0`` with categories that carry
    no data); a larger ``lam`` fixes it.
    """
    spec = spec or TransitionSpec()
    _check_design_matrix(data)
    y, X = data.outcomes, data.covariates
    M = spec.resolve_M(max_observed(data))
    design = TransitionDesign(spec, M, data.column_names)
    alpha = design.initial(y) if start is None else np.array(start, dtype=float)
    if alpha.shape != (design.n_params,):
        raise ValueError("start vector has the wrong length")

    it = _evaluate(design, y, X, alpha)
    history = [it.pen_loglik]
    prev_alpha = alpha.copy()
    converged = False
    n_iter = 0
    for n_iter in range(1, spec.max_iter + 1):
        if np.linalg.norm(it.grad) <= spec.gtol:
            converged = True
            n_iter -= 1
            break
        try:
            cf = linalg.cho_factor(it.info)
        except linalg.LinAlgError:
            raise SingularInformationError(
                f"penalized information is singular (lam={spec.lam}); use a larger smoothing parameter"
            ) from None
        step = linalg.cho_solve(cf, it.grad)
        decrement = float(it.grad @ step)
        if 0.5 * decrement <= spec.tol * 1e-8 * (1.0 + abs(it.pen_loglik)):
            converged = True
            break
        t = 1.0
        accepted = None
        floor = it.pen_loglik - ROUNDING_SLACK * (1.0 + abs(it.pen_loglik))
        for _ in range(MAX_HALVINGS + 1):
            cand = it.alpha + t * step
            try:
                _, lp = _evaluate(design, y, X, cand, derivs=False)
            except ValueError:
                lp = -np.inf
            if np.isfinite(lp) and lp >= floor:
                accepted = cand
                break
            t *= 0.5
        if accepted is None:
            converged = 0.5 * decrement <= spec.tol * (1.0 + abs(it.pen_loglik))
            break
        prev_alpha = it.alpha
        it = _evaluate(design, y, X, accepted)
        history.append(it.pen_loglik)
    else:
        converged = np.linalg.norm(it.grad) <= spec.gtol

    growth = np.abs(it.alpha - prev_alpha)
    flags = (np.abs(it.alpha) > SEPARATION_MAGNITUDE) & (growth > SEPARATION_GROWTH)
    notes = []
    if spec.variant == "zero-split":
        if np.all(y > 0):
            notes.append("zero part degenerate: no zero counts")
        elif np.all(y == 0):
            notes.append("non-zero part degenerate: all counts are zero")
    if np.any(flags):
        names = [design.labels[k] for k in np.flatnonzero(flags)]
        notes.append(f"divergent coefficients (separation): {', '.join(names)}")
        logger.warning("separation detected for %s", names)
    if not converged:
        logger.warning("transition fit did not converge in %d iterations", spec.max_iter)

    cov, edf = _covariance(design, y, X, it, spec)
    return FittedTransitionModel(
        spec=spec,
        M=M,
        column_names=data.column_names,
        params=it.alpha,
        covariance=cov,
        loglik=it.loglik,
        penalized_loglik=it.pen_loglik,
        converged=bool(converged),
        iterations=n_iter,
        separation_flags=flags,
        grad_norm=float(np.linalg.norm(it.grad)),
        encoder_meta=data.encoder_meta,
        history=tuple(history),
        notes=tuple(notes),
        edf=edf,
        _design=design,
    )


def fit_zero_split(data: CountDataset, spec: TransitionSpec | None = None, **kw) -> FittedTransitionModel:
    spec = (spec or TransitionSpec()).replace(variant="zero-split")
    return fit(data, spec, **kw)


def fit_varying(data: CountDataset, spec: TransitionSpec | None = None, **kw) -> FittedTransitionModel:
    spec = spec or TransitionSpec()
    if spec.varying is not None and len(spec.varying) == 0:
        return fit(data, spec.replace(variant="basic", varying=None), **kw)
    return fit(data, spec.replace(variant="varying"), **kw)


def _as_matrix(model, covariates) -> np.ndarray:
    p = len(model.column_names)
    if covariates is None:
        if p:
            raise ValueError("covariates required")
        return np.zeros((1, 0))
    if isinstance(covariates, CountDataset):
        if covariates.column_names != tuple(model.column_names):
            raise DataError("covariate columns do not match the training encoding")
        return covariates.covariates
    X = np.atleast_2d(np.asarray(covariates, dtype=float))
    if p == 0 and X.shape[1] != 0:
        X = np.zeros((X.shape[0], 0))
    if X.shape[1] != p:
        raise DataError(f"expected {p} covariate columns, got {X.shape[1]}")
    return X


def predict_pmf(model: FittedTransitionModel, covariates=None, M: int | None = None) -> PredictedDistribution:
    """Predictive pmf on ``0..model.M`` (padded with zeros up to ``M``)."""
    X = _as_matrix(model, covariates)
    lp = _log_pmf_matrix(model.coef_table, X, model.spec.link)
    dist = PredictedDistribution(np.exp(lp))
    return dist.extend(M) if M is not None else dist


def continuation_ratio_effect(model: FittedTransitionModel, x, x_tilde) -> np.ndarray:
    """Multiplicative change of the continuation ratio ``P(Y>r)/P(Y=r)``
    when moving from ``x_tilde`` to ``x``, for ``r = 0..M``.

    Constant in ``r`` for the basic model; a curve otherwise.
    """
    dx = np.asarray(x, dtype=float) - np.asarray(x_tilde, dtype=float)
    if dx.shape != (len(model.column_names),):
        raise DataError("covariate vectors have the wrong length")
    return np.exp(model.coef_table[:, 1:] @ dx)


@dataclass(frozen=True)
class CoefRow:
    name: str
    coef: float
    se: float
    z: float
    separated: bool = False


def summarize(model: FittedTransitionModel) -> list[CoefRow]:
    """Coefficient table (coef, se, z) for all non-intercept parameters.

    For the zero-split model the zero part (labelled ``zero:<name>``, with
    its intercept ``zero:theta[0]``) comes first.
    """
    se = model.se
    rows = []
    for k, name in enumerate(model.param_names):
        if name.startswith("theta[") or name.startswith("gamma["):
            if not (model.spec.variant == "zero-split" and name == "theta[0]"):
                continue
            name = "zero:theta[0]"
        sep = bool(model.separation_flags[k])
        s = float("nan") if sep else float(se[k])
        rows.append(CoefRow(name, float(model.params[k]), s, float(model.params[k] / s) if not sep else float("nan"), sep))
    if model.spec.variant == "zero-split":
        rows.sort(key=lambda r: 0 if r.name.startswith("zero:") else 1)
    return rows


def format_table(rows: Sequence[CoefRow], align: bool = True) -> str:
    """Three-decimal table; separated rows print ``---`` for se and z.

    ``align=False`` separates fields by single spaces, which is easier to grep.
    """
    width = max([len(r.name) for r in rows] + [4]) if align else 0
    num = 8 if align else 0

    def line(*fields: str) -> str:
        head, *rest = fields
        return " ".join([f"{head:<{width}}", *[f"{f:>{num}}" for f in rest]])

    lines = [line("" if align else "term", "coef", "se", "z")]
    for r in rows:
        if r.separated or not np.isfinite(r.se):
            lines.append(line(r.name, f"{r.coef:.3f}", "---", "---"))
        else:
            lines.append(line(r.name, f"{r.coef:.3f}", f"{r.se:.3f}", f"{r.z:.3f}"))
    return "\n".join(lines)
