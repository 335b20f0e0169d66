import math

import numpy as np
import pytest

from toruswalk.geometry import GeometryError, annulus, disc, disc_complement
from toruswalk.solvers import (SolverError, System, exact_cover_time, expected_escape_time,
                               expected_toral_entry_time, gamblers_ruin, gamblers_ruin_table,
                               green_internal, green_toral, hit_point_before_exit, hit_point_table,
                               hitting_distribution, hitting_time_moments)
from toruswalk.steps import build_lazy_srw, build_poisson_jump, build_srw
from toruswalk.walks import WalkState, run_until, trial_rng

SRW = build_srw()


# oracles from a 9-state hand solve of SRW on D(0,2): E(0)=9/2, E(e1)=7/2, E(1,1)=11/4,
# G(0,0)=3/2, P=1/3
def test_disc2_oracles():
    E, info = expected_escape_time(disc((0, 0), 2), SRW)
    assert info.unknowns == 9
    assert E[(0, 0)] == pytest.approx(4.5, abs=1e-12)
    assert E[(1, 1)] == pytest.approx(2.75, abs=1e-12)
    assert E[(1, 0)] == pytest.approx(3.5, abs=1e-12)
    assert green_internal(disc((0, 0), 2), SRW).value((0, 0), (0, 0)) == pytest.approx(1.5, abs=1e-12)
    assert hit_point_before_exit(2, (1, 0), SRW) == pytest.approx(1 / 3, abs=1e-12)


def test_green_outside_domain_is_zero():
    G = green_internal(disc((0, 0), 3), SRW)
    assert G.value((5, 0), (0, 0)) == 0.0
    assert G.value((0, 0), (5, 0)) == 0.0
    assert not G.row((9, 9)).any()


def test_green_rows_sum_to_escape_time():
    dom = disc((0, 0), 6)
    G = green_internal(dom, SRW).matrix()
    E, _ = expected_escape_time(dom, SRW)
    pts = green_internal(dom, SRW).points
    for k, p in enumerate(pts):
        assert G[k].sum() == pytest.approx(E[tuple(p)], rel=1e-12)


@pytest.mark.parametrize("dist", [SRW, build_poisson_jump(0.3, 3)])
def test_green_symmetric_and_nested(dist):
    small = green_internal(disc((0, 0), 4), dist)
    big = green_internal(disc((0, 0), 7), dist)
    M = small.matrix()
    assert np.allclose(M, M.T, atol=1e-12)
    for x in small.points[::3]:
        for y in small.points[::2]:
            assert small.value(x, y) <= big.value(x, y) + 1e-12


@pytest.mark.parametrize("K", [None, 32])
def test_strong_markov_factorization(K):
    n = 6
    dom = disc((0, 0), n, K)
    G = green_toral(K, dom, SRW) if K else green_internal(dom, SRW)
    g00 = G.value((0, 0), (0, 0))
    h = hit_point_table(n, SRW, K)
    for x in [(1, 0), (2, 3), (-4, 1), (5, 0)]:
        assert G.value(x, (0, 0)) == pytest.approx(h[x] * g00, abs=1e-9)


def test_toral_green_matches_planar_for_small_disc():
    ratio = green_toral(64, disc((0, 0), 8, 64), SRW).value((0, 0), (0, 0)) / \
        green_internal(disc((0, 0), 8), SRW).value((0, 0), (0, 0))
    assert abs(ratio - 1) <= 1e-6


def test_toral_green_dominates_planar():
    d = build_poisson_jump(0.3, 7)
    T = green_toral(49, disc((0, 0), 8, 49), d)
    P = green_internal(disc((0, 0), 8), d)
    for x in P.points[::5]:
        for y in P.points[::4]:
            assert T.value(x, y) >= P.value(x, y) - 1e-12
    # wrapped jumps make the toral value strictly bigger somewhere
    assert T.value((0, 0), (0, 0)) > P.value((0, 0), (0, 0))


def test_toral_cap():
    with pytest.raises(SolverError):
        green_toral(65, disc((0, 0), 4, 65), SRW)
    with pytest.raises(GeometryError):
        green_toral(64, disc((0, 0), 4), SRW)


def test_hitting_methods_agree_on_random_instances():
    rng = np.random.default_rng(3)
    for _ in range(20):
        if rng.random() < 0.5:
            K = int(rng.choice([15, 17, 21]))
            A = disc(tuple(int(v) for v in rng.integers(-3, 4, 2)), int(rng.integers(1, 3)), K)
            sup = None
            while True:
                x = tuple(int(v) for v in rng.integers(-K // 2, K // 2, 2))
                if not A.contains(x):
                    break
        else:
            K = None
            A = disc((0, 0), int(rng.integers(1, 4)))
            sup = disc((0, 0), int(rng.integers(6, 10)))
            x = (int(rng.integers(4, 6)), int(rng.integers(-1, 2)))
        dist = SRW if rng.random() < 0.5 else build_lazy_srw(0.3)
        a = hitting_distribution(A, x, sup, dist, "absorbing", K)
        b = hitting_distribution(A, x, sup, dist, "last-exit", K)
        assert np.allclose(a.probs, b.probs, atol=1e-10)
        assert abs(a.truncation - b.truncation) <= 1e-10
        if K:
            assert a.mass == pytest.approx(1.0, abs=1e-9)
        else:
            assert a.mass <= 1 + 1e-12


def test_hitting_monotone_in_target():
    K = 21
    A = disc((0, 0), 2, K)
    B = disc((0, 0), 3, K)
    x = (8, 3)
    hA = hitting_distribution(A, x, None, SRW).as_dict()
    hB = hitting_distribution(B, x, None, SRW).as_dict()
    for y, p in hA.items():
        assert p >= hB.get(y, 0.0) - 1e-12


def test_hitting_e1_to_origin_matches_oracle():
    H = hitting_distribution([(0, 0)], (1, 0), disc((0, 0), 2), SRW)
    assert H.as_dict()[(0, 0)] == pytest.approx(1 / 3, abs=1e-12)
    assert H.truncation == pytest.approx(2 / 3, abs=1e-12)


def test_hitting_start_in_target_rejected():
    with pytest.raises(GeometryError):
        hitting_distribution(disc((0, 0), 2, 15), (1, 0), None, SRW)


def test_kac_moment_bound():
    K = 16
    target = annulus((0, 0), 2, 1, K).members()
    rest, m1, m2 = hitting_time_moments(K, target, SRW)
    sup = m1.max()
    assert np.all(m2 <= 2 * m1 * sup + 1e-6)
    assert np.all(m2 >= m1 ** 2 - 1e-6)


def test_gamblers_ruin_complementary():
    tab = gamblers_ruin_table(4, 16, SRW)
    assert np.allclose(tab.p_in + tab.p_out, 1.0, atol=1e-10)
    with pytest.raises(GeometryError):
        gamblers_ruin(5, 5, (5, 0), SRW)


# exact expected cover times of tiny tori, frozen from the visited-set chain solve
def test_exact_cover_small():
    assert exact_cover_time(1, SRW) == 0.0
    assert exact_cover_time(2, build_lazy_srw(0.25)) == pytest.approx(8.0, abs=1e-9)
    with pytest.raises(SolverError):
        exact_cover_time(4, SRW)


# ---------------------------------------------------------------- Monte Carlo vs exact

TRIALS = 100_000


def z_ok(samples, exact, sigmas=4.0):
    samples = np.asarray(samples, float)
    se = samples.std(ddof=1) / math.sqrt(len(samples))
    return abs(samples.mean() - exact) <= sigmas * se + 1e-12


def test_mc_escape_time():
    exact, _ = expected_escape_time(disc((0, 0), 4), SRW)
    target = disc_complement((0, 0), 4)
    t = [run_until(WalkState.planar(SRW, trial_rng(1, i), (1, 1)), target, 10**6).stop_time
         for i in range(TRIALS)]
    assert z_ok(t, exact[(1, 1)])


def test_mc_toral_entry_time():
    K = 16
    target = disc((0, 0), 2, K)
    exact = expected_toral_entry_time(K, target, SRW)
    t = [run_until(WalkState.toral(SRW, trial_rng(2, i), K, (5, 6)), target, 10**7).stop_time
         for i in range(TRIALS)]
    assert z_ok(t, exact[(5, 6)])


def _vector_walk(start, absorbed, rng, n_walkers, max_steps=100_000):
    """Run many SRW walkers until ``absorbed(x, y)`` returns a label >= 0."""
    x = np.full(n_walkers, start[0])
    y = np.full(n_walkers, start[1])
    label = np.full(n_walkers, -1)
    steps = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]])
    for _ in range(max_steps):
        live = label < 0
        if not live.any():
            break
        k = rng.integers(0, 4, live.sum())
        x[live] += steps[k, 0]
        y[live] += steps[k, 1]
        label[live] = absorbed(x[live], y[live])
    return label


def test_mc_hit_before_exit():
    n = 5
    exact = hit_point_before_exit(n, (2, 1), SRW)
    lab = _vector_walk((2, 1), lambda x, y: np.where((x == 0) & (y == 0), 1,
                                                       np.where(x * x + y * y >= n * n, 0, -1)),
                       np.random.default_rng(4), TRIALS)
    assert z_ok(lab == 1, exact)


def test_mc_gamblers_ruin():
    r, R = 3, 9
    start = (5, 2)
    p_out, p_in = gamblers_ruin(r, R, start, SRW)

    def absorbed(x, y):
        d2 = x * x + y * y
        return np.where(d2 < r * r, 1, np.where(d2 >= R * R, 0, -1))
    lab = _vector_walk(start, absorbed, np.random.default_rng(5), TRIALS)
    assert z_ok(lab == 1, p_in)
    assert z_ok(lab == 0, p_out)
