"""Potential kernel a(x) = sum_j [p_j(0) - p_j(x)].

Partial sums are evaluated in closed form on a periodic grid of side L much
larger than the walk's spread after J steps: with phi the characteristic
function sampled on the grid, sum_{j<=J} p_j = IFFT((1 - phi^(J+1)) / (1 - phi)).
Consecutive partial sums are averaged (SRW-type walks oscillate with parity)
and then Richardson-extrapolated in J (tail ~ 1/J).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EULER_GAMMA = 0.5772156649015329
SRW_CONSTANT = (2 * EULER_GAMMA + math.log(8)) / math.pi


def characteristic_grid(dist, L):
    """phi(theta) at theta = 2 pi k / L, from the step table wrapped mod L."""
    g = np.zeros((L, L))
    np.add.at(g, (np.mod(dist.offsets[:, 0], L), np.mod(dist.offsets[:, 1], L)), dist.probs)
    return np.real(np.fft.fft2(g))


def _partial_sum_grid(phi, J):
    one_minus = 1.0 - phi
    with np.errstate(divide="ignore", invalid="ignore"):
        geo = np.where(np.abs(one_minus) > 1e-300, (1.0 - phi ** (J + 1)) / one_minus, J + 1.0)
    f = np.real(np.fft.ifft2(geo))
    return f[0, 0] - f


def _gather(grid, pts, L):
    pts = np.asarray(pts, dtype=np.int64).reshape(-1, 2)
    return grid[np.mod(pts[:, 0], L), np.mod(pts[:, 1], L)]


@dataclass
class PotentialKernelTable:
    points: list
    partial: np.ndarray  # averaged partial sums at the final J
    accelerated: np.ndarray
    error: np.ndarray  # |difference of the last two accelerated estimates|
    J: int
    L: int
    converged: bool
    wrap_sigmas: float  # distance to the grid edge in units of the spread

    def value(self, x):
        for p, v in zip(self.points, self.accelerated):
            if p == (int(x[0]), int(x[1])):
                return float(v)
        raise KeyError(x)

    def as_dict(self):
        return {p: float(v) for p, v in zip(self.points, self.accelerated)}


def _grid_side(dist, J, reach, L_max):
    spread = math.sqrt(max(dist.c, 1e-12) * J)
    need = 2 * (reach + 8 * spread) + 2
    L = 1 << max(6, math.ceil(math.log2(need)))
    L = min(L, L_max)
    return L, (L / 2 - reach) / spread


def potential_kernel(dist, points, tolerance=1e-6, J0=64, J_max=1 << 16, L_max=4096):
    """a(x) for the requested points by accelerated partial sums."""
    pts = [(int(p[0]), int(p[1])) for p in points]
    reach = max([max(abs(a), abs(b)) for a, b in pts] + [1])
    J = J0
    prev = None
    history = []
    while True:
        L, sig = _grid_side(dist, 2 * J + 1, reach, L_max)
        phi = characteristic_grid(dist, L)
        avg = []
        for jj in (J, 2 * J):
            s0 = _gather(_partial_sum_grid(phi, jj), pts, L)
            s1 = _gather(_partial_sum_grid(phi, jj + 1), pts, L)
            avg.append(0.5 * (s0 + s1))
        acc = 2 * avg[1] - avg[0]
        history.append(acc)
        err = np.abs(acc - prev) if prev is not None else np.full(len(pts), np.inf)
        done = prev is not None and float(np.max(err)) < tolerance
        if done or 2 * J >= J_max:
            zero = np.array([p == (0, 0) for p in pts])
            acc = np.where(zero, 0.0, acc)
            part = np.where(zero, 0.0, avg[1])
            return PotentialKernelTable(pts, part, acc, err, 2 * J, L, bool(done), sig)
        prev = acc
        J *= 2


@dataclass
class KernelGrid:
    """a(x) on the window |x_i| <= radius, extrapolated in the grid side."""
    radius: int
    values: np.ndarray  # indexed [x + radius, y + radius]
    error: float
    sides: tuple

    def __call__(self, d):
        d = np.asarray(d, dtype=np.int64)
        if np.any(np.abs(d) > self.radius):
            raise ValueError("difference vector outside the tabulated window")
        return self.values[d[..., 0] + self.radius, d[..., 1] + self.radius]


def _torus_kernel(dist, L):
    phi = characteristic_grid(dist, L)
    g = np.zeros_like(phi)
    nz = np.abs(1.0 - phi) > 1e-13
    nz[0, 0] = False
    g[nz] = 1.0 / (1.0 - phi[nz])
    f = np.real(np.fft.ifft2(g))
    return f[0, 0] - f


def kernel_grid(dist, radius, L=None):
    """Limit of the partial sums on an L-torus (J -> infinity), then L -> infinity.

    The torus kernel differs from the planar one by O(|x|^2 / L^2); one
    Richardson step over (L, 2L) removes that term."""
    if L is None:
        L = 1 << max(8, math.ceil(math.log2(8 * radius)))
    idx = np.arange(-radius, radius + 1)
    a1 = _torus_kernel(dist, L)[np.ix_(np.mod(idx, L), np.mod(idx, L))]
    a2 = _torus_kernel(dist, 2 * L)[np.ix_(np.mod(idx, 2 * L), np.mod(idx, 2 * L))]
    ext = (4.0 * a2 - a1) / 3.0
    ext[radius, radius] = 0.0
    err = float(np.max(np.abs(ext - a2)))
    return KernelGrid(radius, ext, err, (L, 2 * L))
