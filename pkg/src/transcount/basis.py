"""B-spline bases over count categories and difference penalties."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline


@dataclass(frozen=True)
class BSplineBasis:
    """Clamped B-spline basis with equally spaced knots on ``[lower, upper]``
    (``degree`` repeated boundary knots at each end)."""

    upper: int
    num_basis: int
    degree: int = 3
    lower: int = 0

    def __post_init__(self) -> None:
        if self.degree < 0:
            raise ValueError("degree must be nonnegative")
        if self.num_basis < self.degree + 1:
            raise ValueError(
                f"num_basis={self.num_basis} too small for degree {self.degree} (need >= {self.degree + 1})"
            )
        if self.upper <= self.lower:
            raise ValueError("basis range must have positive length")

    @property
    def knots(self) -> np.ndarray:
        k = self.degree
        inner = np.linspace(self.lower, self.upper, self.num_basis - k + 1)
        return np.concatenate([np.full(k, float(self.lower)), inner, np.full(k, float(self.upper))])

    def eval(self, points) -> np.ndarray:
        x = np.atleast_1d(np.asarray(points, dtype=float))
        if np.any((x < self.lower) | (x > self.upper)):
            raise ValueError(f"points outside basis range [{self.lower}, {self.upper}]")
        t = self.knots
        if self.degree == 0:
            # half-open intervals, last one closed
            idx = np.clip(np.searchsorted(t, x, side="right") - 1, 0, self.num_basis - 1)
            out = np.zeros((x.size, self.num_basis))
            out[np.arange(x.size), idx] = 1.0
            return out
        return BSpline.design_matrix(x, t, self.degree).toarray()


def bspline_matrix(M: int, m: int, degree: int = 3, points=None) -> np.ndarray:
    """Evaluate an ``m``-function B-spline basis on ``[0, M]`` at ``points``.

    ``points`` defaults to all categories ``0..M``.
    """
    basis = BSplineBasis(int(M), int(m), int(degree))
    pts = np.arange(M + 1) if points is None else np.asarray(points)
    if np.any(pts != np.round(pts)) or np.any(pts < 0) or np.any(pts > M):
        raise ValueError("points must be categories in 0..M")
    return basis.eval(pts)


@dataclass(frozen=True)
class PenaltyMatrix:
    matrix: np.ndarray
    order: int
    kind: str  # "theta-difference" | "coef-difference"

    def quadratic_form(self, coef) -> float:
        c = np.asarray(coef, dtype=float)
        return float(c @ self.matrix @ c)


def difference_operator(q: int, d: int) -> np.ndarray:
    return np.diff(np.eye(q), n=d, axis=0)


def difference_penalty(q: int, d: int = 1) -> PenaltyMatrix:
    """``D_d^T D_d`` so that ``c' P c = sum (Delta^d c_k)^2``."""
    if d < 1:
        raise ValueError("difference order must be >= 1")
    if d >= q:
        raise ValueError(f"difference order {d} needs more than {d} coefficients, got {q}")
    D = difference_operator(q, d)
    return PenaltyMatrix(D.T @ D, d, "coef-difference")


def theta_penalty(M: int) -> PenaltyMatrix:
    """First-order differences over adjacent intercepts ``theta_0..theta_M``."""
    if M < 1:
        raise ValueError("M must be >= 1")
    D = difference_operator(M + 1, 1)
    return PenaltyMatrix(D.T @ D, 1, "theta-difference")
