import numpy as np
import pytest

from toruswalk.geometry import GeometryError, annulus, disc, disc_complement
from toruswalk.partition import (band_escape_probability, disc_band_partition,
                                 excursion_mean_exact, three_set)
from toruswalk.steps import build_poisson_jump, build_srw
from toruswalk.walks import WalkState, decompose_excursions, run_until, trial_rng

SRW = build_srw()


def test_partition_guard():
    with pytest.raises(GeometryError):
        disc_band_partition(48, 8, 4)
    A, B, C = disc_band_partition(48, 8, 3)
    assert len(A) + len(B) + len(C) == 48 * 48


def test_three_set_srw_cannot_jump_band():
    q = three_set(*disc_band_partition(40, 5, 2), SRW, K=40)
    assert q.psi == 0.0 and q.sigma == 0.0
    assert q.holds()


def test_three_set_empty_B():
    K = 32
    A = disc((0, 0), 4, K).members()
    C = disc_complement((0, 0), 4, K).members()
    q = three_set(A, np.zeros((0, 2), dtype=np.int64), C, SRW, K=K)
    assert q.psi == 0.0
    assert not q.rho_a.any()
    assert q.holds()


def test_three_set_poisson_nontrivial():
    d = build_poisson_jump(0.3, 3)
    q = three_set(*disc_band_partition(40, 5, 2), d, K=40)
    assert 0 < q.psi < 1 and 0 < q.sigma <= 1
    assert np.all(q.psi_a >= q.rho_a - 1e-12)
    assert np.all(q.sigma_b >= q.phi_b - 1e-12)
    assert np.all((q.psi_a >= 0) & (q.psi_a <= 1 + 1e-12))
    assert q.f_A >= 0 and q.f_B >= 0
    assert q.holds()


def test_three_set_rejects_overlap():
    K = 32
    A = disc((0, 0), 4, K).members()
    with pytest.raises(GeometryError):
        three_set(A, A, disc_complement((0, 0), 4, K).members(), SRW, K=K)


def test_band_escape():
    assert band_escape_probability(8, 1, SRW).sup == 0.0
    d = build_poisson_jump(0.3, 3)
    vals = [band_escape_probability(8, s, d).sup for s in (1, 2, 3)]
    assert vals[0] > vals[1] > vals[2] > 0


def test_band_escape_mc():
    d = build_poisson_jump(0.3, 3)
    n, s = 8, 2
    be = band_escape_probability(n, s, d)
    out = disc_complement((0, 0), n)
    hits = []
    for i in range(20_000):
        st = WalkState.planar(d, trial_rng(9, i), be.argmax)
        rec = run_until(st, out, 10**6)
        x, y = rec.stop_position
        hits.append(x * x + y * y >= (n + s) ** 2)
    hits = np.array(hits, float)
    se = hits.std(ddof=1) / np.sqrt(len(hits))
    assert abs(hits.mean() - be.sup) <= 4 * se


def test_excursion_mean_exact_vs_mc():
    K, r, s, R = 24, 2, 1, 4
    ex = excursion_mean_exact(K, r, s, R, SRW)
    assert ex.stationary.sum() == pytest.approx(1.0)
    assert np.all(ex.stationary >= -1e-12)
    assert 0 < ex.mean_sigma < ex.mean_tau
    means = []
    for i in range(40):
        st = WalkState.toral(SRW, trial_rng(10, i), K, (r, 0))
        rec = decompose_excursions((0, 0), r, s, R, st, 500)
        means.append(rec.tau.mean())
    means = np.array(means)
    se = means.std(ddof=1) / np.sqrt(len(means))
    assert abs(means.mean() - ex.mean_tau) <= 4 * se


# frozen value of the exact oracle at the excursion acceptance geometry
def test_excursion_ratio_frozen():
    ex = excursion_mean_exact(240, 8, 1, 10, SRW)
    assert ex.ratio == pytest.approx(0.8204, abs=5e-4)
