"""Harnack ratio checks for hitting distributions.

interior:       H_{D(0,R)^c}(x, y) for x in D(0, 2r), R = 4 m r (planar, exact).
interior-toral: the same on the K-torus.
exterior:       H_{D(0,r+s)}(x, y) for x in the band [R, R + sqrt(R)), on the
                whole plane, through the finite-set formula
                H_A(x, y) = mu_A(y) + sum_t a(x - t) M(t, y),
                M = Kinv - (Kinv 1)(1' Kinv)/(1' Kinv 1),  Kinv = [a(t - t')]^-1,
                which is the unique bounded solution that equals delta_y on A.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import GeometryError, annulus, disc
from .potential import kernel_grid
from .solvers import PointIndex, System

INTERIOR_DIRECT_MAX = 400_000


@dataclass
class HarnackResult:
    setting: str
    r: int
    m: int
    R: int
    deviation: float
    starts: int
    targets: int
    excluded_targets: int
    mass_error: float  # max |1 - row sum|

    def as_dict(self):
        return dict(self.__dict__)


def _deviation(H):
    """max over targets of max_x H / min_x H - 1, ignoring all-zero columns."""
    col_max = H.max(axis=0)
    col_min = H.min(axis=0)
    live = col_max > 0
    excluded = int((~live).sum())
    if np.any(col_min[live] <= 0):
        return math.inf, excluded
    dev = float(np.max(col_max[live] / col_min[live] - 1.0)) if live.any() else 0.0
    return dev, excluded


def interior_table(dist, r, m, K=None):
    R = 4 * m * r
    dom = disc((0, 0), R, K) if K else disc((0, 0), R)
    # one factorisation serves every start, so use the direct route throughout
    sysm = System(dom.members(), dist, K, direct_max=INTERIOR_DIRECT_MAX)
    starts = (disc((0, 0), 2 * r, K) if K else disc((0, 0), 2 * r)).members()
    # exit targets: every point reachable in one step from the domain
    off = dist.projected(K)[0] if K else dist.offsets
    cand = (sysm.pts[:, None, :] + off[None, :, :]).reshape(-1, 2)
    if K:
        h = K // 2
        cand = np.mod(cand + h, K) - h
    cand = np.unique(cand, axis=0)
    cand = cand[sysm.index.lookup(cand) < 0]
    tidx = PointIndex(cand, K)
    B = sysm.into(tidx)
    E = np.stack([sysm.unit(x) for x in starts], axis=1)
    H = (B.T @ sysm.solve(E)).T
    return starts, cand, H, R


def exterior_table(dist, r, m, s=1, kernel=None):
    R = 4 * m * r
    width = math.ceil(math.sqrt(R))
    A = disc((0, 0), r + s).members()
    starts = annulus((0, 0), R, width).members()
    reach = int(np.max(np.abs(starts))) + r + s + 1
    if kernel is None or kernel.radius < reach:
        kernel = kernel_grid(dist, reach)
    Kmat = kernel(A[:, None, :] - A[None, :, :])
    Kinv = np.linalg.inv(Kmat)
    u = Kinv.sum(axis=1)
    tot = u.sum()
    mu = u / tot
    M = Kinv - np.outer(u, u) / tot
    H = mu[None, :] + kernel(starts[:, None, :] - A[None, :, :]) @ M
    return starts, A, H, R, kernel


def harnack_ratio(setting, dist, r=4, m=2, s=1, K=None, kernel=None):
    if setting == "interior":
        starts, targets, H, R = interior_table(dist, r, m)
    elif setting == "interior-toral":
        if K is None:
            raise GeometryError("interior-toral needs K")
        starts, targets, H, R = interior_table(dist, r, m, K)
    elif setting == "exterior":
        if s > r:
            raise GeometryError("band width s must not exceed r")
        starts, targets, H, R, _ = exterior_table(dist, r, m, s, kernel)
        H = np.where(np.abs(H) < 1e-13, 0.0, H)
    else:
        raise ValueError(f"unknown Harnack setting {setting!r}")
    dev, excluded = _deviation(H)
    mass_err = float(np.max(np.abs(1.0 - H.sum(axis=1))))
    return HarnackResult(setting, r, m, R, dev, len(starts), H.shape[1] - excluded, excluded,
                         mass_err), H


def fit_harnack_constant(ms, devs, setting):
    """Least-squares C in dev ~ C * g(m), g = 1/m (interior) or log(m)/m (exterior)."""
    ms = np.asarray(ms, dtype=float)
    g = np.log(ms) / ms if setting == "exterior" else 1.0 / ms
    keep = g > 0
    g, d = g[keep], np.asarray(devs, dtype=float)[keep]
    return float(np.dot(g, d) / np.dot(g, g)) if len(g) else math.nan
