"""Compare the compiled and numpy likelihood kernels.

Run with ``python benchmarks/bench_kernels.py``.  Reports the median time
of one sufficient-statistics pass and of a full P-spline fit per backend.
"""

from __future__ import annotations

import argparse
import logging
import timeit

import numpy as np

from transcount import kernels, transition
from transcount.data import CountDataset, load_dataset
from transcount.transition import TransitionDesign, TransitionSpec


def _synthetic(n: int, p: int, seed: int = 0) -> CountDataset:
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    y = rng.negative_binomial(1.0, 1.0 / (1.0 + np.exp(1.5 + 0.3 * X[:, 0])))
    return CountDataset(y.astype(np.int64), X, tuple(f"x{j}" for j in range(p)))


def _median(fn, repeat: int) -> float:
    return float(np.median(timeit.repeat(fn, number=1, repeat=repeat)))


def bench(data: CountDataset, label: str, repeat: int) -> list[tuple[str, str, float, float]]:
    spec = TransitionSpec(smoother="psplines", lam=16.0)
    M = spec.resolve_M(int(data.outcomes.max()))
    design = TransitionDesign(spec, M, data.column_names)
    coef = design.coef_table(design.initial(data.outcomes))
    backends = {"python": kernels.python_suff_stats}
    if kernels.compiled_suff_stats is not None:
        backends["cython"] = kernels.compiled_suff_stats
    rows = []
    for name, impl in backends.items():
        t_kernel = _median(lambda: impl(data.outcomes, data.covariates, coef, design.link_code), repeat)
        original = transition.suff_stats
        transition.suff_stats = impl
        try:
            t_fit = _median(lambda: spec.fit(data), max(3, repeat // 5))
        finally:
            transition.suff_stats = original
        rows.append((label, name, t_kernel, t_fit))
    return rows


def main() -> None:
    logging.disable(logging.WARNING)
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=25)
    args = ap.parse_args()
    cases = [
        (load_dataset("quine"), "quine (n=146)"),
        (load_dataset("boating"), "boating (n=657)"),
        (_synthetic(20000, 5), "synthetic (n=20000, p=5)"),
    ]
    rows = [r for data, label in cases for r in bench(data, label, args.repeat)]
    print(f"{'dataset':<26} {'backend':<8} {'kernel ms':>10} {'fit ms':>10}")
    for label, name, tk, tf in rows:
        print(f"{label:<26} {name:<8} {1e3 * tk:>10.3f} {1e3 * tf:>10.2f}")
    for label in dict.fromkeys(r[0] for r in rows):
        by = {r[1]: r for r in rows if r[0] == label}
        if "cython" in by:
            print(f"{label}: kernel speed-up {by['python'][2] / by['cython'][2]:.1f}x, "
                  f"fit speed-up {by['python'][3] / by['cython'][3]:.1f}x")


if __name__ == "__main__":
    main()
