"""Predictive count distributions on a truncated support ``0..M``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PredictedDistribution:
    """Row ``i`` holds ``P(Y_i = r)`` for ``r = 0..M``; all mass above ``M``
    is folded into the last column so that every row sums to one."""

    pmf: np.ndarray

    def __post_init__(self) -> None:
        pmf = np.atleast_2d(np.asarray(self.pmf, dtype=float))
        object.__setattr__(self, "pmf", pmf)

    @property
    def M(self) -> int:
        return self.pmf.shape[1] - 1

    @property
    def n(self) -> int:
        return self.pmf.shape[0]

    @property
    def cdf(self) -> np.ndarray:
        c = np.minimum(np.cumsum(self.pmf, axis=1), 1.0)
        c[:, -1] = 1.0
        return c

    @property
    def mean(self) -> np.ndarray:
        return self.pmf @ np.arange(self.M + 1)

    def extend(self, M: int) -> "PredictedDistribution":
        """Pad with zero-mass categories up to ``M`` (never truncates)."""
        if M <= self.M:
            return self
        pad = np.zeros((self.n, M - self.M))
        return PredictedDistribution(np.hstack([self.pmf, pad]))

    def with_support(self, M: int) -> "PredictedDistribution":
        """Exactly ``0..M``: zero padding above, or the tail folded into ``M``."""
        if M < 0:
            raise ValueError("M must be >= 0")
        if M >= self.M:
            return self.extend(M)
        head = self.pmf[:, :M]
        return PredictedDistribution(np.hstack([head, self.pmf[:, M:].sum(axis=1, keepdims=True)]))

    def __getitem__(self, idx) -> "PredictedDistribution":
        return PredictedDistribution(self.pmf[idx])


def from_pmf_with_tail(pmf_head: np.ndarray) -> PredictedDistribution:
    """Close a pmf evaluated on ``0..M-1`` by putting the remaining mass at ``M``."""
    head = np.atleast_2d(np.asarray(pmf_head, dtype=float))
    tail = np.clip(1.0 - head.sum(axis=1), 0.0, None)
    return PredictedDistribution(np.hstack([head, tail[:, None]]))
