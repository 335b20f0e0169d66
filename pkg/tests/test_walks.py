import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toruswalk.geometry import GeometryError, LevelStructure, disc, disc_complement
from toruswalk.solvers import exact_cover_time
from toruswalk.steps import build_lazy_srw, build_poisson_jump, build_srw
from toruswalk.walks import (WalkState, census_levels, coupled_run, cover_run, decompose_excursions,
                             late_count, late_points, late_threshold, run_until, trial_rng)

SRW = build_srw()


def test_run_until_start_inside():
    st_ = WalkState.planar(SRW, trial_rng(0, 0), (0, 0))
    rec = run_until(st_, disc((0, 0), 3), 100)
    assert rec.stop_time == 0 and not rec.censored


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 400), st.integers(2, 12))
def test_run_until_contract(seed, cap, n):
    target = disc_complement((0, 0), n)
    state = WalkState.planar(SRW, trial_rng(seed, 0))
    rec = run_until(state, target, cap)
    if rec.censored:
        assert rec.stop_time == cap
    else:
        assert target.contains(rec.stop_position)
    assert state.time == rec.stop_time


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([9, 16, 25]))
def test_toral_walk_stays_in_window(seed, K):
    state = WalkState.toral(build_poisson_jump(0.3, 3), trial_rng(seed, 1), K, (K + 2, -K + 1))
    assert state.position == (2, 1)
    h = K // 2
    target = disc((h - 1, h - 1), 1, K)
    with pytest.raises(GeometryError):
        run_until(state, disc((0, 0), 1, 4 * K), 10)  # a different torus
    for step in range(1, 30):
        rec = run_until(state, target, 1)
        assert all(-h <= c <= K - 1 - h for c in state.position)
        assert state.time == step or not rec.censored
        if not rec.censored:
            break


def test_toral_walk_rejects_planar_target():
    state = WalkState.toral(SRW, trial_rng(0, 0), 16, (5, 5))
    with pytest.raises(GeometryError):
        run_until(state, disc((0, 0), 2), 10)


def test_same_seed_same_path():
    def path(seed):
        st_ = WalkState.planar(build_poisson_jump(0.3, 3), trial_rng(seed, 4))
        return [run_until(st_, disc_complement((0, 0), 5 + k), 10**6).stop_position for k in range(10)]
    assert path(3) == path(3)
    assert path(3) != path(4)


def test_coupling_pathwise():
    K, n, s = 48, 8, 3
    for dist in (SRW, build_lazy_srw(0.5)):
        for i in range(300):
            rec = coupled_run(WalkState.planar(dist, trial_rng(1, i)), K, n, s)
            assert rec.chain_holds
            assert rec.pullback_equal
    with pytest.raises(GeometryError):
        coupled_run(WalkState.planar(SRW, trial_rng(1, 0), (9, 0)), K, n, s)
    with pytest.raises(GeometryError):
        coupled_run(WalkState.planar(SRW, trial_rng(1, 0)), 40, 8, 3)


def test_coupling_poisson_pullback_equal():
    d = build_poisson_jump(0.3, 7)
    for i in range(300):
        rec = coupled_run(WalkState.planar(d, trial_rng(2, i)), 49, 8, 3, cap=20_000)
        assert rec.pullback_equal
        if all(t is not None for t in rec.times.values()):
            assert rec.chain_holds


def test_excursion_additivity():
    K = 48
    state = WalkState.toral(SRW, trial_rng(5, 0), K, (10, 10))
    rec = decompose_excursions((0, 0), 3, 1, 2 * 3 - 2 + 2, state, 50)
    assert rec.total_time == state.time
    assert rec.cumulative[-1] == rec.total_time
    assert np.all(np.diff(rec.cumulative) > 0)
    assert np.all((rec.sigma >= 0) & (rec.sigma <= rec.tau))
    assert np.all(rec.visits >= 0)
    assert rec.to_csv().splitlines()[0] == "j,tau,sigma,Y"
    assert len(rec.to_csv().splitlines()) == 52


def test_excursion_guards():
    st_ = WalkState.toral(SRW, trial_rng(0, 0), 48)
    with pytest.raises(GeometryError, match="R <= K/24"):
        decompose_excursions((0, 0), 2, 1, 3, st_, 5, enforce_far_bound=True)
    with pytest.raises(GeometryError, match="r \\+ s <= R"):
        decompose_excursions((0, 0), 2, 2, 3, st_, 5)
    with pytest.raises(GeometryError):
        decompose_excursions((0, 0), 2, 1, 4, WalkState.planar(SRW, trial_rng(0, 0)), 5)


def test_cover_run_visit_table():
    res = cover_run(12, SRW, trial_rng(0, 0), start=(3, -2))
    h = 6
    assert not res.censored
    assert res.visit_times[3 + h, -2 + h] == 0
    assert res.visit_times.min() == 0
    assert res.visit_times.max() == res.cover_time
    assert len(np.unique(res.visit_times)) == 144  # one new site per first visit
    li = res.last_point.point
    assert res.visit_times[li[0] + h, li[1] + h] == res.cover_time
    assert res.to_csv().splitlines()[0] == "x,y,first_visit_time"


def test_cover_run_censoring():
    res = cover_run(32, SRW, trial_rng(0, 0), cap_multiplier=0.01)
    assert res.censored and res.cover_time == res.cap
    assert (res.visit_times < 0).any()
    with pytest.raises(ValueError):
        late_points(res.visit_times, 32, 0.5, SRW.pi_gamma, cap=res.cap)


def _mean_cover(K, dist, trials, seed):
    t = np.array([cover_run(K, dist, trial_rng(seed, i)).cover_time for i in range(trials)], float)
    return t.mean(), t.std(ddof=1) / math.sqrt(trials)


@pytest.mark.parametrize("K,dist", [(2, build_lazy_srw(0.25)), (3, SRW), (2, SRW)])
def test_cover_mc_vs_exact(K, dist):
    exact = exact_cover_time(K, dist)
    m, se = _mean_cover(K, dist, 20_000, 6)
    assert abs(m - exact) <= 4 * se


def test_lazy_cover_rescaling():
    # a lazy walk is the SRW slowed by geometric holding times of mean 1/(1-eps)
    eps = 0.5
    m0, se0 = _mean_cover(6, SRW, 3000, 7)
    m1, se1 = _mean_cover(6, build_lazy_srw(eps), 3000, 8)
    assert abs(m1 * (1 - eps) - m0) <= 4 * math.hypot(se1 * (1 - eps), se0)


def test_late_points_nested():
    K = 24
    res = cover_run(K, SRW, trial_rng(3, 0))
    sets = [late_points(res.visit_times, K, a, SRW.pi_gamma) for a in (0.1, 0.3, 0.6, 0.9)]
    for a, b in zip(sets, sets[1:]):
        assert b <= a
    for a, s in zip((0.1, 0.3, 0.6, 0.9), sets):
        assert late_count(res.visit_times, K, a, SRW.pi_gamma) == len(s)
    assert late_threshold(K, 1.0, SRW.pi_gamma) == pytest.approx(4 / math.pi * (K * math.log(K)) ** 2)


def test_census_levels():
    K = 128
    levels = LevelStructure.custom((3, 6, 12, 24), (1, 1, 1, 1), K, {2: 2.0, 3: 3.0}, lowest_level=2)
    for i in range(20):
        state = WalkState.toral(SRW, trial_rng(4, i), K, (40, 40))
        cen = census_levels((0, 0), levels, state)
        assert cen.band_faithful  # unit steps never jump a band of width 1
        if cen.completion_time is not None:
            assert cen.counts[3] >= 3
        expect = cen.band_faithful and cen.completion_time is not None and cen.counts[0] == 0 and \
            all(abs(cen.counts[k] - levels.v[k]) <= k for k in range(2, 3))
        assert cen.successful == expect
    with pytest.raises(GeometryError):
        census_levels((0, 0), levels, WalkState.toral(SRW, trial_rng(0, 0), 64))
    with pytest.raises(GeometryError):
        census_levels((0, 0), levels, WalkState.toral(SRW, trial_rng(0, 0), 128), max_K=100)


def test_census_detects_band_jumps():
    d = build_poisson_jump(0.3, 7)
    K = 343
    levels = LevelStructure.custom((3, 6, 12, 24), (1, 1, 1, 1), K, {2: 2.0, 3: 3.0}, lowest_level=2)
    seen = [census_levels((0, 0), levels, WalkState.toral(d, trial_rng(5, i), K, (60, 60))).band_faithful
            for i in range(30)]
    assert not all(seen)
