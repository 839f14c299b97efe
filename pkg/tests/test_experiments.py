import math

import numpy as np
import pytest

from transcount.baselines import BaselineSpec
from transcount.experiments import (
    MODEL_KINDS,
    STUDIES,
    SimConfig,
    build_spec,
    flexibility_study,
    run_study,
    simulate_counts,
)
from transcount.transition import TransitionSpec


def test_poisson_moments():
    y = simulate_counts(SimConfig("poisson", mu=5.0, n=100_000, seed=1)).outcomes
    assert y.mean() == pytest.approx(5.0, abs=0.05)
    assert y.var() == pytest.approx(5.0, abs=0.2)


def test_negbin_moments():
    y = simulate_counts(SimConfig("negbin", mu=5.0, nu=5 / 8, n=100_000, seed=1)).outcomes
    assert y.mean() == pytest.approx(5.0, abs=0.1)
    assert y.var() == pytest.approx(45.0, abs=2.0)


def test_simulation_is_seeded():
    cfg = SimConfig("negbin", nu=1.0, n=50, seed=3)
    np.testing.assert_array_equal(simulate_counts(cfg, 2).outcomes, simulate_counts(cfg, 2).outcomes)
    assert not np.array_equal(simulate_counts(cfg, 2).outcomes, simulate_counts(cfg, 3).outcomes)
    assert simulate_counts(cfg).p == 0


@pytest.mark.parametrize("kw", [dict(family="binomial"), dict(mu=0.0), dict(family="negbin"),
                                dict(family="negbin", nu=-1.0), dict(n=0), dict(replications=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SimConfig(**kw)


def test_true_pmf_folds_tail():
    p = SimConfig("poisson", mu=5.0).true_pmf(8)
    assert p.sum() == pytest.approx(1.0, abs=1e-15)
    assert p[-1] == pytest.approx(1 - sum(np.exp(-5) * 5.0**r / math.factorial(r) for r in range(8)))


def test_single_replication_average_is_that_fit():
    cfg = SimConfig("poisson", n=100, replications=1, seed=7)
    res = flexibility_study(cfg, lam=16.0)
    data = simulate_counts(cfg, 0)
    direct = TransitionSpec(lam=16.0).fit(data).predict_pmf(None, M=res.support).pmf[0]
    np.testing.assert_allclose(res.avg_transition, direct, atol=1e-15)
    fam = BaselineSpec("poisson").fit(data).predict_pmf(None, M=res.support).pmf[0]
    np.testing.assert_allclose(res.avg_family, fam, atol=1e-15)


def test_flexibility_averages_normalized():
    res = flexibility_study(SimConfig("negbin", nu=0.625, n=100, replications=3), cv_replications=2)
    assert res.transition.shape == (3, res.support + 1)
    for avg in (res.avg_transition, res.avg_family, res.true):
        assert avg.sum() == pytest.approx(1.0, abs=1e-12)
    assert res.lambdas.shape == (3,)
    lines = res.to_csv().splitlines()
    assert lines[0] == "r,true,avg_transition,avg_family" and len(lines) == res.support + 2
    assert res.max_gap("family") >= 0


def test_build_spec():
    assert isinstance(build_spec("zip"), BaselineSpec)
    s = build_spec("transition-zero", 16.0, "theta", link="cloglog")
    assert (s.variant, s.smoother, s.lam, s.link) == ("zero-split", "theta", 16.0, "cloglog")
    assert build_spec("transition-varying").variant == "varying"
    assert len(MODEL_KINDS) == 7
    with pytest.raises(ValueError, match="unknown model"):
        build_spec("tobit")


def test_study_definitions():
    assert STUDIES["quine"].protocol.train_size == 100
    assert dict(STUDIES["nmes_males"].lambdas) == {"ZeroSplit": 16.0}
    assert STUDIES["boating"].smoothed == ["QuadPen", "P-Splines", "ZeroSplit"]


def test_run_study_smoke():
    res = run_study("nmes_males", replications=2, grid=(4.0, 16.0))
    assert set(res.lambdas) == {"QuadPen", "P-Splines", "ZeroSplit"}
    assert res.lambdas["ZeroSplit"] == 16.0 and "ZeroSplit" not in res.selections
    assert set(res.comparison.means) == {"Poisson", "NegBin", "ZIP", "Hurdle", "QuadPen", "P-Splines", "ZeroSplit"}
