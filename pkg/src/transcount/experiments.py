"""Count simulators, the flexibility study and the three application studies."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .baselines import KINDS as BASELINE_KINDS
from .baselines import BaselineSpec, negbin_pmf, poisson_pmf
from .data import CountDataset, load_dataset
from .scoring import DEFAULT_GRID, Comparison, LambdaSelection, Protocol, _run, compare_models, replication_seed, select_lambda
from .transition import TransitionSpec

logger = logging.getLogger(__name__)

FAMILIES = ("poisson", "negbin")
MODEL_KINDS = (*BASELINE_KINDS, "transition", "transition-zero", "transition-varying")


def build_spec(kind: str, lam: float = 1.0, smoother: str = "psplines", **options: Any):
    """Spec object for a model name as used on the command line.

    Extra ``options`` go to :class:`TransitionSpec` (ignored for baselines
    apart from ``max_iter`` and ``tol``).
    """
    if kind in BASELINE_KINDS:
        keep = {k: v for k, v in options.items() if k in ("max_iter", "tol")}
        return BaselineSpec(kind, **keep)
    variant = {"transition": "basic", "transition-zero": "zero-split", "transition-varying": "varying"}.get(kind)
    if variant is None:
        raise ValueError(f"unknown model {kind!r}; choose from {', '.join(MODEL_KINDS)}")
    return TransitionSpec(smoother=smoother, lam=float(lam), variant=variant, **options)


# -- simulation -----------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    """I.i.d. counts from Poisson(mu) or NegBin(nu, mu) (variance mu + mu^2/nu)."""

    family: str = "poisson"
    mu: float = 5.0
    nu: float | None = None
    n: int = 100
    replications: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if not self.mu > 0:
            raise ValueError("mu must be > 0")
        if self.family == "negbin" and not (self.nu is not None and self.nu > 0):
            raise ValueError("negbin needs nu > 0")
        if self.n < 1 or self.replications < 1:
            raise ValueError("n and replications must be >= 1")

    def true_pmf(self, M: int) -> np.ndarray:
        """Pmf on ``0..M`` with the tail folded into ``M``."""
        r = np.arange(M)
        head = poisson_pmf(r, self.mu) if self.family == "poisson" else negbin_pmf(r, self.mu, self.nu)
        return np.append(head, max(0.0, 1.0 - head.sum()))

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "mu": self.mu, "nu": self.nu, "n": self.n,
                "replications": self.replications, "seed": self.seed}


def simulate_counts(config: SimConfig, replication: int = 0) -> CountDataset:
    """One sample of ``config.n`` counts; NegBin draws use the gamma-Poisson mixture."""
    rng = np.random.default_rng(replication_seed(config.seed, replication))
    if config.family == "poisson":
        y = rng.poisson(config.mu, config.n)
    else:
        y = rng.poisson(rng.gamma(config.nu, config.mu / config.nu, config.n))
    return CountDataset(y.astype(np.int64), np.zeros((config.n, 0)), ())


@dataclass
class FlexibilityResult:
    config: SimConfig
    support: int
    true: np.ndarray
    transition: np.ndarray  # (replications used, support + 1)
    family: np.ndarray
    lambdas: np.ndarray
    excluded: int = 0

    @property
    def avg_transition(self) -> np.ndarray:
        return self.transition.mean(axis=0)

    @property
    def avg_family(self) -> np.ndarray:
        return self.family.mean(axis=0)

    def max_gap(self, which: str = "transition") -> float:
        avg = self.avg_transition if which == "transition" else self.avg_family
        return float(np.max(np.abs(avg - self.true)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "true", "avg_transition", "avg_family"])
        for r in range(self.support + 1):
            w.writerow([r, repr(float(self.true[r])), repr(float(self.avg_transition[r])), repr(float(self.avg_family[r]))])
        return buf.getvalue()


def _flex_replication(config: SimConfig, spec: TransitionSpec, lam, cv: Protocol, support: int, rep: int):
    data = simulate_counts(config, rep)
    try:
        if lam is None:
            sel = select_lambda(data, spec, DEFAULT_GRID, Protocol(cv.replications, cv.fraction, None,
                                                                    replication_seed(config.seed, rep), cv.r_max))
            chosen = sel.lam
        else:
            chosen = float(lam)
        model = spec.replace(lam=chosen).fit(data)
        fam = BaselineSpec(config.family).fit(data)
        if not (model.converged and fam.converged):
            raise RuntimeError("fit did not converge")
    except Exception as exc:
        logger.info("replication %d excluded: %s", rep, exc)
        return None
    pt = model.predict_pmf(None, M=support).pmf[0]
    pf = fam.predict_pmf(None, M=support).pmf[0]
    # both are folded at or below `support`; keep 0..support
    return pt[: support + 1], pf[: support + 1], chosen


def flexibility_study(
    config: SimConfig,
    spec: TransitionSpec | None = None,
    lam: float | None = None,
    support: int | None = None,
    cv_replications: int = 10,
    jobs: int = 1,
) -> FlexibilityResult:
    """Fit the transition model and the true family to every simulated sample
    and average the fitted pmfs.

    ``lam=None`` chooses the smoothing parameter per sample by resampling
    (``cv_replications`` splits, RPS over the full support).  Replications
    whose fits fail are dropped and counted.
    """
    spec = spec or TransitionSpec(smoother="psplines")
    if support is None:
        support = int(np.flatnonzero(config.true_pmf(2000)[:-1] > 1e-6)[-1]) + 1
    cv = Protocol(replications=cv_replications, r_max=None)
    args = [(config, spec, lam, cv, support, rep) for rep in range(config.replications)]
    results = _run(_flex_replication, args, jobs)
    ok = [r for r in results if r is not None]
    if not ok:
        raise RuntimeError("every replication failed")
    return FlexibilityResult(
        config=config,
        support=support,
        true=config.true_pmf(support),
        transition=np.array([r[0] for r in ok]),
        family=np.array([r[1] for r in ok]),
        lambdas=np.array([r[2] for r in ok]),
        excluded=len(results) - len(ok),
    )


# -- application studies --------------------------------------------------

@dataclass(frozen=True)
class Study:
    """One application: dataset, resampling protocol and the competing models.

    ``models`` maps a display label to ``(kind, smoother)``; transition models
    take their smoothing parameter from ``lambdas`` or, when absent there,
    from :func:`select_lambda` under the same protocol.
    """

    dataset: str
    protocol: Protocol
    models: tuple[tuple[str, tuple[str, str]], ...]
    lambdas: tuple[tuple[str, float], ...] = ()

    def specs(self, lambdas: Mapping[str, float]) -> dict[str, Any]:
        return {label: build_spec(kind, lambdas.get(label, 1.0), smoother) for label, (kind, smoother) in self.models}

    @property
    def smoothed(self) -> list[str]:
        return [label for label, (kind, _) in self.models if kind.startswith("transition")]


_CLASSICAL = (
    ("Poisson", ("poisson", "")),
    ("NegBin", ("negbin", "")),
    ("ZIP", ("zip", "")),
    ("Hurdle", ("hurdle", "")),
    ("QuadPen", ("transition", "theta")),
    ("P-Splines", ("transition", "psplines")),
)

STUDIES: dict[str, Study] = {
    "quine": Study("quine", Protocol(train_size=100), _CLASSICAL),
    "nmes_males": Study(
        "nmes_males", Protocol(), _CLASSICAL + (("ZeroSplit", ("transition-zero", "psplines")),),
        lambdas=(("ZeroSplit", 16.0),),
    ),
    "boating": Study("boating", Protocol(), _CLASSICAL + (("ZeroSplit", ("transition-zero", "psplines")),)),
}


@dataclass
class StudyResult:
    study: Study
    selections: dict[str, LambdaSelection] = field(default_factory=dict)
    lambdas: dict[str, float] = field(default_factory=dict)
    comparison: Comparison | None = None


def run_study(
    name: str,
    replications: int | None = None,
    seed: int = 0,
    jobs: int = 1,
    grid=DEFAULT_GRID,
    compare: bool = True,
) -> StudyResult:
    """Select smoothing parameters, then compare all models on fresh splits."""
    study = STUDIES[name]
    proto = study.protocol
    proto = Protocol(replications or proto.replications, proto.fraction, proto.train_size, seed, proto.r_max, proto.rule)
    data = load_dataset(study.dataset)
    result = StudyResult(study)
    fixed = dict(study.lambdas)
    for label, (kind, smoother) in study.models:
        if not kind.startswith("transition"):
            continue
        if label in fixed:
            result.lambdas[label] = fixed[label]
            continue
        sel = select_lambda(data, build_spec(kind, 1.0, smoother), grid, proto, jobs)
        result.selections[label] = sel
        result.lambdas[label] = sel.lam
    if compare:
        result.comparison = compare_models(data, study.specs(result.lambdas), proto, jobs)
    return result
