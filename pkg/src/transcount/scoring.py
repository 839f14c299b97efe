"""Proper scoring rules for count forecasts and resampling-based model
comparison / smoothing-parameter selection."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .data import CountDataset, DataError, subsample
from .distribution import PredictedDistribution

logger = logging.getLogger(__name__)

RULES = ("rps", "brier", "log")
DEFAULT_R_MAX = 30
DEFAULT_GRID = tuple(sorted({2.0**k for k in range(-2, 13)} | {5.0, 16.0}))


# -- single-observation rules ---------------------------------------------

def _pmf_vector(pmf) -> np.ndarray:
    if isinstance(pmf, PredictedDistribution):
        if pmf.n != 1:
            raise ValueError("expected a single distribution")
        return pmf.pmf[0]
    return np.asarray(pmf, dtype=float)


def brier(y: int, pmf) -> float:
    """``(1 - p_Y)^2 + sum_{r != Y} p_r^2``."""
    p = _pmf_vector(pmf)
    if y > p.size - 1 or y < 0:
        raise DataError(f"observation {y} outside the support 0..{p.size - 1}")
    return float((1.0 - p[y]) ** 2 + np.sum(p**2) - p[y] ** 2)


def log_score(y: int, pmf) -> float:
    """``-log p_Y``; ``inf`` (with a warning) when ``p_Y = 0``."""
    p = _pmf_vector(pmf)
    py = p[y] if 0 <= y < p.size else 0.0
    if py <= 0.0:
        warnings.warn(f"zero predicted probability at observation {y}; log score is infinite", RuntimeWarning)
        return math.inf
    return float(-np.log(py))


def rps(y: int, pmf, r_max: int | None = None) -> float:
    """Ranked probability score ``sum_{r=0}^{r_max} (cdf(r) - 1{y <= r})^2``.

    Categories past the pmf's support count with cdf 1.
    """
    p = _pmf_vector(pmf)
    return float(rps_many(np.array([y]), p[None, :], r_max)[0])


# -- vectorised versions --------------------------------------------------

def _as_pmf(dist) -> np.ndarray:
    return dist.pmf if isinstance(dist, PredictedDistribution) else np.atleast_2d(np.asarray(dist, dtype=float))


def rps_many(y, dist, r_max: int | None = None) -> np.ndarray:
    pmf = _as_pmf(dist)
    y = np.asarray(y)
    M = pmf.shape[1] - 1
    top = M if r_max is None else int(r_max)
    cdf = np.minimum(np.cumsum(pmf, axis=1), 1.0)
    cdf[:, -1] = 1.0
    if top > M:
        cdf = np.hstack([cdf, np.ones((cdf.shape[0], top - M))])
    cdf = cdf[:, : top + 1]
    step = (y[:, None] <= np.arange(top + 1)[None, :]).astype(float)
    return np.sum((cdf - step) ** 2, axis=1)


def brier_many(y, dist) -> np.ndarray:
    pmf = _as_pmf(dist)
    y = np.asarray(y)
    if np.any(y > pmf.shape[1] - 1):
        raise DataError("observation outside the predictive support")
    rows = np.arange(y.size)
    py = pmf[rows, y]
    return (1.0 - py) ** 2 + np.sum(pmf**2, axis=1) - py**2


def log_many(y, dist) -> np.ndarray:
    pmf = _as_pmf(dist)
    y = np.asarray(y)
    inside = y < pmf.shape[1]
    py = np.zeros(y.size)
    py[inside] = pmf[np.flatnonzero(inside), y[inside]]
    if np.any(py <= 0):
        warnings.warn("zero predicted probability; log score is infinite", RuntimeWarning)
    with np.errstate(divide="ignore"):
        return -np.log(py)


def score_many(rule: str, y, dist, r_max: int | None = DEFAULT_R_MAX) -> np.ndarray:
    if rule == "rps":
        return rps_many(y, dist, r_max)
    if rule == "brier":
        return brier_many(y, dist)
    if rule == "log":
        return log_many(y, dist)
    raise ValueError(f"unknown rule {rule!r}; choose from {RULES}")


@dataclass(frozen=True)
class ScoreReport:
    rule: str
    per_observation: np.ndarray
    r_max: int | None = None
    replication_id: int | None = None
    seed: int | None = None

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_observation))


def score_report(rule, y, dist, r_max=DEFAULT_R_MAX, replication_id=None, seed=None) -> ScoreReport:
    return ScoreReport(rule, score_many(rule, y, dist, r_max), r_max if rule == "rps" else None, replication_id, seed)


# -- resampling -----------------------------------------------------------

@dataclass(frozen=True)
class Protocol:
    """Repeated train/test subsampling without replacement."""

    replications: int = 100
    fraction: float = 2 / 3
    train_size: int | None = None
    seed: int = 0
    r_max: int | None = DEFAULT_R_MAX
    rule: str = "rps"

    def replication_seed(self, rep: int) -> int:
        return replication_seed(self.seed, rep)

    def split(self, n: int, rep: int):
        return subsample(n, self.fraction, self.replication_seed(rep), self.train_size)

    def to_dict(self) -> dict[str, Any]:
        return {
            "replications": self.replications, "fraction": self.fraction, "train_size": self.train_size,
            "seed": self.seed, "r_max": self.r_max, "rule": self.rule,
        }


def replication_seed(master: int, rep: int) -> int:
    """Seed of replication ``rep``; independent of how many replications run."""
    return int(np.random.SeedSequence([int(master), int(rep)]).generate_state(1, np.uint32)[0])


def evaluation_support(model, test: CountDataset, r_max: int | None) -> int:
    m = int(test.outcomes.max()) + 1
    if r_max is not None:
        m = max(m, r_max + 1)
    return max(m, getattr(model, "M", 0))


def test_score(model, test: CountDataset, rule: str = "rps", r_max: int | None = DEFAULT_R_MAX) -> float:
    dist = model.predict_pmf(test.covariates, M=evaluation_support(model, test, r_max))
    return float(np.mean(score_many(rule, test.outcomes, dist, r_max)))


test_score.__test__ = False  # public name, not a pytest test


def _replication(data, specs: Mapping[str, Any], protocol: Protocol, rep: int) -> dict[str, Any]:
    split = protocol.split(data.n, rep)
    train, test = data.take(split.train_indices), data.take(split.test_indices)
    scores: dict[str, float] = {}
    errors: dict[str, str] = {}
    for name, spec in specs.items():
        try:
            model = spec.fit(train)
            if not getattr(model, "converged", True):
                raise RuntimeError("fit did not converge")
            scores[name] = test_score(model, test, protocol.rule, protocol.r_max)
            if not np.isfinite(scores[name]) and protocol.rule != "log":
                raise RuntimeError("non-finite score")
        except Exception as exc:  # recorded, replication excluded below
            errors[name] = f"{type(exc).__name__}: {exc}"
            scores.pop(name, None)
    return {"replication": rep, "seed": split.seed, "scores": scores, "errors": errors}


def _run(fn: Callable, args: list, jobs: int) -> list:
    if jobs <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(fn, *a) for a in args]
        return [f.result() for f in futures]


@dataclass
class Comparison:
    """Per-replication test scores of several models."""

    models: tuple[str, ...]
    protocol: Protocol
    rows: list[dict[str, Any]] = field(default_factory=list)
    failures: dict[int, dict[str, str]] = field(default_factory=dict)

    def scores(self, model: str) -> np.ndarray:
        return np.array([r["score"] for r in self.rows if r["model"] == model])

    @property
    def means(self) -> dict[str, float]:
        return {m: float(np.mean(self.scores(m))) for m in self.models}

    @property
    def excluded(self) -> int:
        return len(self.failures)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "replication", self.protocol.rule, "seed"])
        for r in self.rows:
            w.writerow([r["model"], r["replication"], repr(float(r["score"])), r["seed"]])
        return buf.getvalue()

    def summary(self) -> dict[str, Any]:
        return {
            "protocol": self.protocol.to_dict(),
            "models": list(self.models),
            "mean": self.means,
            "replications_used": len({r["replication"] for r in self.rows}),
            "replications_excluded": self.excluded,
            "failures": {str(k): v for k, v in sorted(self.failures.items())},
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def compare_models(
    data: CountDataset,
    specs: Mapping[str, Any],
    protocol: Protocol | None = None,
    jobs: int = 1,
) -> Comparison:
    """Fit every spec on each training subsample and score it on the rest.

    A replication in which any model fails is dropped for all models.
    """
    protocol = protocol or Protocol()
    if not specs:
        raise ValueError("need at least one model spec")
    results = _run(_replication, [(data, dict(specs), protocol, k) for k in range(protocol.replications)], jobs)
    comp = Comparison(tuple(specs), protocol)
    for res in sorted(results, key=lambda r: r["replication"]):
        if res["errors"]:
            comp.failures[res["replication"]] = res["errors"]
            continue
        for name in specs:
            comp.rows.append({"model": name, "replication": res["replication"],
                              "score": res["scores"][name], "seed": res["seed"]})
    if comp.failures:
        logger.warning("%d replications excluded after fit failures", len(comp.failures))
    if not comp.rows:
        raise RuntimeError("every replication failed")
    return comp


@dataclass(frozen=True)
class LambdaSelection:
    lam: float
    grid: tuple[float, ...]
    mean_scores: tuple[float, ...]
    failures: tuple[int, ...]
    protocol: Protocol

    def curve(self) -> list[tuple[float, float]]:
        return list(zip(self.grid, self.mean_scores))

    def near_optimal(self, rel: float = 0.005) -> list[float]:
        best = min(s for s in self.mean_scores if np.isfinite(s))
        return [lam for lam, s in zip(self.grid, self.mean_scores) if s <= best * (1 + rel)]


def _lambda_replication(data, spec, grid, protocol: Protocol, rep: int):
    split = protocol.split(data.n, rep)
    train, test = data.take(split.train_indices), data.take(split.test_indices)
    out = np.full(len(grid), np.nan)
    start = None
    # warm start from the largest lambda downwards
    for k in sorted(range(len(grid)), key=lambda k: -grid[k]):
        try:
            model = spec.replace(lam=grid[k]).fit(train, start=start)
        except Exception as exc:
            logger.debug("replication %d, lam=%g failed: %s", rep, grid[k], exc)
            start = None
            continue
        if not model.converged:
            start = None
            continue
        start = model.params
        out[k] = test_score(model, test, protocol.rule, protocol.r_max)
    return out


def select_lambda(
    data: CountDataset,
    spec,
    grid: Sequence[float] = DEFAULT_GRID,
    protocol: Protocol | None = None,
    jobs: int = 1,
) -> LambdaSelection:
    """Smoothing parameter minimising the mean test score over replications."""
    protocol = protocol or Protocol()
    grid = tuple(float(g) for g in grid)
    if not grid:
        raise ValueError("empty lambda grid")
    per_rep = np.array(_run(_lambda_replication, [(data, spec, grid, protocol, k) for k in range(protocol.replications)], jobs))
    failures = tuple(int(v) for v in np.sum(~np.isfinite(per_rep), axis=0))
    means = []
    for k, lam in enumerate(grid):
        col = per_rep[:, k]
        ok = np.isfinite(col)
        if not ok.any():
            warnings.warn(f"all fits failed at lam={lam}; dropped", RuntimeWarning)
            means.append(math.inf)
        else:
            means.append(float(np.mean(col[ok])))
    if all(not np.isfinite(m) for m in means):
        raise RuntimeError("all lambda values failed")
    best = int(np.argmin(means))
    return LambdaSelection(grid[best], grid, tuple(means), failures, protocol)


# -- per-term selection by AIC --------------------------------------------

AIC_GRID = tuple(sorted(set(DEFAULT_GRID) | {2.0**k for k in range(13, 21)}))


@dataclass(frozen=True)
class TermSelection:
    spec: Any
    lambdas: dict[str, float]
    aic: float
    sweeps: int


def select_lambda_aic(
    data: CountDataset,
    spec,
    grid: Sequence[float] = AIC_GRID,
    max_sweeps: int = 10,
) -> TermSelection:
    """Separate smoothing parameter for every penalized term by coordinate
    search on ``grid``, minimising ``-2 loglik + 2 edf`` on the full data.

    Terms are ``"theta"`` plus each varying covariate.  Sweeps stop once a
    full pass leaves every term unchanged.
    """
    from .transition import TransitionDesign

    grid = tuple(sorted(float(g) for g in grid))
    if not grid:
        raise ValueError("empty lambda grid")
    probe = TransitionDesign(spec, spec.resolve_M(int(data.outcomes.max())), data.column_names)
    terms = [b.name for b in probe.blocks if b.penalty is not None]
    current = {t: spec.lam_for(t) for t in terms}
    cache: dict[tuple, Any] = {}

    def fit(lams: dict[str, float]):
        key = tuple(lams[t] for t in terms)
        if key not in cache:
            try:
                model = spec.replace(lam_overrides=tuple(sorted(lams.items()))).fit(data)
                cache[key] = model if model.converged else None
            except Exception:
                cache[key] = None
        return cache[key]

    best = fit(current)
    if best is None:
        raise RuntimeError("starting fit failed")
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        changed = False
        for t in terms:
            for g in grid:
                trial = {**current, t: g}
                model = fit(trial)
                if model is not None and model.aic < best.aic - 1e-9:
                    best, current, changed = model, trial, True
        if not changed:
            break
    return TermSelection(best.spec, current, best.aic, sweeps)
