import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toruswalk.config import ConfigError, load_config
from toruswalk.experiments import (binomial_term, combinatorial_sandwich, fit_line, map_trials,
                                   mean_se, paley_zygmund_check, run_experiment,
                                   upcrossing_probabilities)
from toruswalk.geometry import GeometryError, build_levels

SMALL = {
    "coupling": dict(K=48, n=8, s=3, trials=40),
    "excursions": dict(K=48, r=1, s=1, R=2, trials=4, excursions=100, N_list=(25, 50, 100)),
    "cover": dict(K_list=(8, 12), trials=12),
    "late": dict(K=16, trials=12),
    "tail": dict(K=16, trials=12),
    "successful": dict(n=14, K=128, trials=4, a_list=(1.0,)),
}


def cfg(experiment, **kw):
    return load_config(None, dict(SMALL[experiment], experiment=experiment, **kw))


def _square(i):
    return i * i


def test_map_trials_order_independent_of_workers():
    assert map_trials(_square, 9, 1) == map_trials(_square, 9, 3) == [i * i for i in range(9)]


def test_mean_se_and_fit_line():
    assert mean_se([]) == (pytest.approx(math.nan, nan_ok=True), pytest.approx(math.nan, nan_ok=True))
    assert mean_se([2.0]) == (2.0, 0.0)
    m, se = mean_se([1.0, 3.0])
    assert m == 2.0 and se == pytest.approx(1.0)
    x = np.arange(6.0)
    slope, se = fit_line(x, 2.5 * x - 1.0)
    assert slope == pytest.approx(2.5) and se == pytest.approx(0.0, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=1, max_size=200)
       .filter(lambda v: any(x > 0 for x in v)),
       st.floats(0.01, 0.99))
def test_paley_zygmund_holds_on_any_sample(values, lam):
    # the inequality is a theorem, so it holds for the empirical law itself
    out = paley_zygmund_check(values, lam)
    assert out["holds"] or out["lhs"] >= out["rhs"] * (1 - 1e-12)
    assert not out["flag"]


def test_paley_zygmund_errors():
    with pytest.raises(ValueError):
        paley_zygmund_check([1.0], 1.0)
    with pytest.raises(ValueError):
        paley_zygmund_check([-1.0, 2.0], 0.5)
    with pytest.raises(ValueError):
        paley_zygmund_check([0.0, 0.0], 0.5)


@pytest.mark.parametrize("m,l", [(0, 0), (3, 5), (20, 17)])
def test_binomial_term(m, l):
    assert binomial_term(m, l) == pytest.approx(math.comb(m + l, l) / 2 ** (m + l + 1), rel=1e-12)


def test_combinatorial_sandwich():
    sw = combinatorial_sandwich(1.0, ks=range(10, 31))
    assert 1 <= sw["C"] < math.inf
    assert sw["lo"] <= sw["hi"]
    assert abs(sw["drift"]) < 0.5


def test_upcrossings_near_half():
    n = 14
    ups = upcrossing_probabilities(build_levels(n))
    for u in ups:
        assert u["a_min"] <= u["a_max"]
        assert u["b_min"] == pytest.approx(1 - u["a_max"])
        assert abs(u["a_min"] - 0.5) <= n ** -2.0


@pytest.mark.parametrize("name", sorted(SMALL))
def test_small_runs_are_worker_independent(name):
    a = run_experiment(cfg(name, seed=3, workers=1))
    b = run_experiment(cfg(name, seed=3, workers=2))
    assert a.to_json() == b.to_json()
    assert a.config_hash == cfg(name, seed=3, workers=5).hash()
    for m in a.metrics:
        assert m.stderr is None or m.stderr >= 0


def test_seed_changes_results():
    a = run_experiment(cfg("cover", seed=1))
    b = run_experiment(cfg("cover", seed=2))
    assert a.metric("mean_K8").estimate != b.metric("mean_K8").estimate


@pytest.mark.parametrize("name,kw,pattern", [
    ("excursions", dict(K=48, R=4, r=1), "R <= K/24"),
    ("excursions", dict(r=1.5, s=1, R=2), "r \\+ s <= R"),
    ("coupling", dict(K=40, n=8, s=3), "n \\+ s < K/4"),
    ("successful", dict(n=13), "n > 13"),
])
def test_preconditions_name_the_inequality(name, kw, pattern):
    with pytest.raises(GeometryError, match=pattern):
        run_experiment(cfg(name, **kw))


def test_config_level_errors():
    with pytest.raises(ConfigError):
        run_experiment(cfg("cover", K_list=(16, 8)))
    with pytest.raises(ConfigError):
        run_experiment(cfg("excursions", N_list=(50, 200)))
    with pytest.raises(ConfigError):
        run_experiment(load_config(None, {"experiment": "nope"}))


def test_cover_censoring_reported():
    res = run_experiment(cfg("cover", cap_multiplier=0.05))
    m = res.metric("mean_K12")
    assert m.censored > 0
    assert m.trials == 12


def test_tail_at_zero_is_one():
    res = run_experiment(cfg("tail", b_list=(0.0, 0.2, 0.4)))
    assert res.metric("tail_b0").estimate == 1.0
    assert res.metric("tail_not_decreasing").estimate == 0


def test_tolerance_override_changes_verdict():
    base = run_experiment(cfg("cover"))
    assert base.metric("mean_K8").passed is not None
    strict = run_experiment(cfg("cover", **{"tol.band_hi": 0.01}))
    assert strict.metric("mean_K8").passed is False
    assert "mean_K8" in strict.failures


def test_successful_rejects_full_construction():
    res = run_experiment(cfg("successful"))
    assert res.metric("log10_K_n").estimate > 60
    assert "rejected" in res.details["full_construction"]
    assert res.metric("upcrossing_a_dev").passed
    assert res.metric("sandwich_drift_a1").passed


def test_excursion_small_run_has_exact_comparison():
    res = run_experiment(cfg("excursions"))
    assert res.metric("exact_ratio").estimate > 0
    assert res.metric("zero_width_prob").estimate == 1.0
    assert "deviation_prob_delta_0.3" in res.series
