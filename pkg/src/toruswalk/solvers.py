"""Exact absorbing-chain solves: Green's functions, hitting laws, escape times.

All systems are restricted to a finite state set S (a planar region or a
subset of the torus).  Steps leaving S are absorbed.  I - Q is symmetric for
symmetric walks, so row and column solves coincide.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import GeometryError, Region, annulus, disc, disc_complement, project

DIRECT_MAX = 20_000
ITER_RESIDUAL = 1e-11
DEFAULT_CAP = 20_000
TORUS_CAP = 64


class SolverError(RuntimeError):
    pass


class PointIndex:
    """Vectorized point -> row lookup (planar bounding box or full torus)."""

    def __init__(self, pts, K=None):
        self.pts = np.asarray(pts, dtype=np.int64).reshape(-1, 2)
        self.K = K
        if K is not None:
            self.lo = np.array([-(K // 2), -(K // 2)])
            self.grid = np.full((K, K), -1, dtype=np.int64)
        else:
            if len(self.pts) == 0:
                self.lo = np.zeros(2, dtype=np.int64)
                self.grid = np.full((1, 1), -1, dtype=np.int64)
                return
            self.lo = self.pts.min(axis=0)
            shape = self.pts.max(axis=0) - self.lo + 1
            self.grid = np.full(tuple(shape), -1, dtype=np.int64)
        if len(self.pts):
            self.grid[self.pts[:, 0] - self.lo[0], self.pts[:, 1] - self.lo[1]] = np.arange(len(self.pts))

    def __len__(self):
        return len(self.pts)

    def lookup(self, q):
        q = np.asarray(q, dtype=np.int64).reshape(-1, 2)
        if self.K is not None:
            h = self.K // 2
            q = np.mod(q + h, self.K) - h
        i = q[:, 0] - self.lo[0]
        j = q[:, 1] - self.lo[1]
        ok = (i >= 0) & (j >= 0) & (i < self.grid.shape[0]) & (j < self.grid.shape[1])
        out = np.full(len(q), -1, dtype=np.int64)
        out[ok] = self.grid[i[ok], j[ok]]
        return out

    def index_of(self, p):
        k = int(self.lookup([p])[0])
        return k


def _step_table(dist, K):
    if K is None:
        return dist.offsets, dist.probs
    off, pr = dist.projected(K)
    return off, pr


def transition(src, dst: PointIndex, dist, K=None):
    """Sparse matrix of one-step probabilities from src points into dst points."""
    src = np.asarray(src, dtype=np.int64).reshape(-1, 2)
    off, pr = _step_table(dist, K)
    rows, cols, vals = [], [], []
    ar = np.arange(len(src))
    for o, p in zip(off, pr):
        j = dst.lookup(src + o)
        ok = j >= 0
        rows.append(ar[ok])
        cols.append(j[ok])
        vals.append(np.full(int(ok.sum()), p))
    if rows:
        rows, cols, vals = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    m = sp.csr_matrix((vals, (rows, cols)), shape=(len(src), len(dst)))
    m.sum_duplicates()
    return m


@dataclass
class SolveInfo:
    method: str
    unknowns: int
    residual: float = 0.0


class System:
    """Walk killed on leaving the finite state set ``pts``."""

    def __init__(self, pts, dist, K=None, direct_max=DIRECT_MAX):
        self.index = PointIndex(pts, K)
        self.pts = self.index.pts
        self.dist = dist
        self.K = K
        self.direct_max = direct_max
        self.Q = transition(self.pts, self.index, dist, K)
        n = len(self.pts)
        self.A = (sp.identity(n, format="csr") - self.Q).tocsc()
        self._lu = None
        self.info = SolveInfo("direct" if n <= direct_max else "cg", n)

    def __len__(self):
        return len(self.pts)

    def solve(self, b):
        """Solve (I - Q) x = b for a vector or a column block."""
        b = np.asarray(b, dtype=float)
        n = len(self.pts)
        if n == 0:
            return b.copy()
        if n <= self.direct_max:
            if self._lu is None:
                self._lu = spla.splu(self.A)
            x = self._lu.solve(b)
            x = x + self._lu.solve(b - self.A @ x)  # one refinement sweep
        else:
            cols = b.reshape(n, -1)
            out = np.empty_like(cols)
            for k in range(cols.shape[1]):
                out[:, k] = self._cg(cols[:, k])
            x = out.reshape(b.shape)
        res = float(np.max(np.abs(self.A @ x - b))) if b.size else 0.0
        self.info.residual = max(self.info.residual, res)
        return x

    def _cg(self, b):
        nb = float(np.linalg.norm(b))
        if nb == 0:
            return np.zeros_like(b)
        x, flag = spla.cg(self.A, b, rtol=0.0, atol=ITER_RESIDUAL * 1e-2, maxiter=50 * len(b))
        # polish with a few refinement sweeps against the true residual
        for _ in range(3):
            r = b - self.A @ x
            if np.max(np.abs(r)) < ITER_RESIDUAL:
                break
            dx, _ = spla.cg(self.A, r, rtol=0.0, atol=ITER_RESIDUAL * 1e-2, maxiter=50 * len(b))
            x = x + dx
        if np.max(np.abs(b - self.A @ x)) >= ITER_RESIDUAL:
            raise SolverError(f"iterative solve did not reach residual {ITER_RESIDUAL}")
        return x

    def unit(self, p):
        e = np.zeros(len(self.pts))
        k = self.index.index_of(p)
        if k < 0:
            raise GeometryError(f"{tuple(p)} is outside the state set")
        e[k] = 1.0
        return e

    def into(self, targets: PointIndex):
        return transition(self.pts, targets, self.dist, self.K)


def _domain_points(domain: Region, cap):
    pts = domain.members()
    if cap is not None and len(pts) > cap:
        raise SolverError(f"domain has {len(pts)} points, above the exact-solve cap {cap}")
    return pts


@dataclass
class GreenTable:
    domain: Region
    system: System
    _rows: dict = field(default_factory=dict, repr=False)

    @property
    def points(self):
        return self.system.pts

    def row(self, x):
        key = (int(x[0]), int(x[1]))
        k = self.system.index.index_of(key)
        if k < 0:
            return np.zeros(len(self.system))
        if key not in self._rows:
            self._rows[key] = self.system.solve(self.system.unit(key))
        return self._rows[key]

    def value(self, x, y):
        j = self.system.index.index_of(y)
        if j < 0:
            return 0.0
        return float(self.row(x)[j])

    def matrix(self):
        n = len(self.system)
        return self.system.solve(np.eye(n))

    @property
    def info(self):
        return self.system.info

    def to_csv(self, starts=None):
        pts = self.points if starts is None else np.asarray(starts).reshape(-1, 2)
        lines = ["x1,y1,x2,y2,value"]
        for x in pts:
            r = self.row(x)
            for y, v in zip(self.points, r):
                lines.append(f"{x[0]},{x[1]},{y[0]},{y[1]},{float(v)!r}")
        return "\n".join(lines) + "\n"


def green_internal(domain: Region, dist, cap=DEFAULT_CAP, direct_max=DIRECT_MAX) -> GreenTable:
    if domain.toral:
        raise GeometryError("use green_toral for toral domains")
    pts = _domain_points(domain, cap)
    return GreenTable(domain, System(pts, dist, None, direct_max))


def green_toral(K, domain: Region, dist, cap=TORUS_CAP) -> GreenTable:
    if not domain.toral or domain.K != K:
        raise GeometryError("green_toral needs a toral domain on the same torus")
    if K > cap:
        raise SolverError(f"K={K} above the toral exact-solve cap {cap}")
    return GreenTable(domain, System(domain.members(), dist, K))


def expected_escape_time(domain: Region, dist, cap=DEFAULT_CAP, direct_max=DIRECT_MAX):
    """E^x(T_{domain^c}) for every x in the domain, as a dict point -> value."""
    K = domain.K if domain.toral else None
    pts = _domain_points(domain, cap)
    sysm = System(pts, dist, K, direct_max)
    t = sysm.solve(np.ones(len(pts)))
    return {(int(a), int(b)): float(v) for (a, b), v in zip(pts, t)}, sysm.info


def escape_time_at(domain, dist, x, **kw):
    table, _ = expected_escape_time(domain, dist, **kw)
    return table.get((int(x[0]), int(x[1])), 0.0)


def torus_points(K):
    h = K // 2
    u = np.arange(K) - h
    gx, gy = np.meshgrid(u, u, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel()], axis=1).astype(np.int64)


def _complement_points(K, region_pts):
    allp = torus_points(K)
    idx = PointIndex(region_pts, K)
    keep = idx.lookup(allp) < 0
    return allp[keep]


def expected_toral_entry_time(K, target: Region, dist, cap=TORUS_CAP):
    """Exact E^y(T_target) for every torus point y."""
    if not target.toral or target.K != K:
        raise GeometryError("target must be a toral region on the same torus")
    if K > cap:
        raise SolverError(f"K={K} above the exact cap {cap}; use Monte Carlo")
    tpts = target.members()
    rest = _complement_points(K, tpts)
    sysm = System(rest, dist, K)
    t = sysm.solve(np.ones(len(rest)))
    out = {(int(a), int(b)): 0.0 for a, b in tpts}
    out.update({(int(a), int(b)): float(v) for (a, b), v in zip(rest, t)})
    return out


def hitting_time_moments(K, target_pts, dist):
    """First and second moments of T_target for all non-target torus points."""
    rest = _complement_points(K, target_pts)
    sysm = System(rest, dist, K)
    m1 = sysm.solve(np.ones(len(rest)))
    m2 = sysm.solve(2.0 * m1 - 1.0)
    return rest, m1, m2


@dataclass
class HitTable:
    target: np.ndarray  # points of A
    start: tuple
    probs: np.ndarray
    method: str
    truncation: float  # escape mass lost to the superdomain boundary

    @property
    def mass(self):
        return float(self.probs.sum())

    def as_dict(self):
        return {(int(a), int(b)): float(p) for (a, b), p in zip(self.target, self.probs)}

    def to_csv(self):
        lines = ["x1,y1,x2,y2,value"]
        for (a, b), p in zip(self.target, self.probs):
            lines.append(f"{self.start[0]},{self.start[1]},{a},{b},{float(p)!r}")
        return "\n".join(lines) + "\n"


def _hitting_setup(A, superdomain, dist, K):
    apts = A.members() if isinstance(A, Region) else np.asarray(A, dtype=np.int64).reshape(-1, 2)
    aidx = PointIndex(apts, K)
    if superdomain is None:
        if K is None:
            raise GeometryError("planar hitting problems need a bounded superdomain")
        space = torus_points(K)
    else:
        space = superdomain.members() if isinstance(superdomain, Region) else np.asarray(superdomain)
    trans = space[aidx.lookup(space) < 0]
    sysm = System(trans, dist, K)
    return apts, aidx, sysm


def hitting_distribution(A, x, superdomain, dist, method="absorbing", K=None):
    """H_A(x, .) computed inside ``superdomain`` (None = whole torus)."""
    if isinstance(A, Region) and A.toral:
        K = A.K
    apts, aidx, sysm = _hitting_setup(A, superdomain, dist, K)
    x = tuple(project(x, K).point) if K else (int(x[0]), int(x[1]))
    if aidx.index_of(x) >= 0:
        raise GeometryError("start point lies in the target set")
    B = sysm.into(aidx)
    k = sysm.index.index_of(x)
    if k < 0:
        raise GeometryError("start point outside the superdomain")
    if method == "absorbing":
        X = sysm.solve(B.toarray())
        probs = np.asarray(X[k]).ravel()
    elif method == "last-exit":
        g = sysm.solve(sysm.unit(x))
        probs = np.asarray(B.T @ g).ravel()
    else:
        raise ValueError(f"unknown method {method!r}")
    probs = np.clip(probs, 0.0, None)
    return HitTable(apts, x, probs, method, max(0.0, 1.0 - float(probs.sum())))


def hit_point_before_exit(n, x, dist, K=None):
    """P^x(T_0 < T_{D(0,n)^c}) with {0} and the exterior absorbing."""
    if tuple(x) == (0, 0):
        return 1.0
    dom = disc((0, 0), n, K) if K else disc((0, 0), n)
    pts = dom.members()
    if not dom.contains(x):
        raise GeometryError("start must lie in D(0, n)")
    keep = np.any(pts != 0, axis=1)
    sysm = System(pts[keep], dist, K)
    b = np.asarray(sysm.into(PointIndex(np.zeros((1, 2), dtype=np.int64), K)).todense()).ravel()
    h = sysm.solve(b)
    xx = tuple(project(x, K).point) if K else x
    return float(h[sysm.index.index_of(xx)])


def hit_point_table(n, dist, K=None):
    """P^x(T_0 < T_exit) for all x in D(0, n), as a dict."""
    dom = disc((0, 0), n, K) if K else disc((0, 0), n)
    pts = dom.members()
    keep = np.any(pts != 0, axis=1)
    sysm = System(pts[keep], dist, K)
    b = np.asarray(sysm.into(PointIndex(np.zeros((1, 2), dtype=np.int64), K)).todense()).ravel()
    h = sysm.solve(b)
    out = {(int(a), int(c)): float(v) for (a, c), v in zip(sysm.pts, h)}
    out[(0, 0)] = 1.0
    return out


@dataclass
class RuinTable:
    points: np.ndarray
    p_out: np.ndarray
    p_in: np.ndarray

    def at(self, x):
        k = PointIndex(self.points).index_of(x)
        if k < 0:
            raise GeometryError(f"{tuple(x)} not in the annulus")
        return float(self.p_out[k]), float(self.p_in[k])


def gamblers_ruin_table(r, R, dist, K=None):
    """p_out = P^x(T_{D(0,r)} > T_{D(0,R)^c}) and p_in over the annulus r <= |x| < R."""
    if not r < R:
        raise GeometryError("need r < R")
    ring = annulus((0, 0), r, R - r, K) if K else annulus((0, 0), r, R - r)
    pts = ring.members()
    inner = (disc((0, 0), r, K) if K else disc((0, 0), r)).members()
    sysm = System(pts, dist, K)
    b_in = np.asarray(sysm.into(PointIndex(inner, K)).sum(axis=1)).ravel()
    b_stay = np.asarray(sysm.Q.sum(axis=1)).ravel()
    b_out = 1.0 - b_stay - b_in
    p_in = sysm.solve(b_in)
    p_out = sysm.solve(b_out)
    return RuinTable(pts, p_out, p_in)


def gamblers_ruin(r, R, x, dist, K=None):
    table = gamblers_ruin_table(r, R, dist, K)
    xx = tuple(project(x, K).point) if K else x
    return table.at(xx)


def exact_cover_time(K, dist, start=(0, 0)):
    """Expected cover time of the K-torus from the (position, visited set) chain."""
    if K == 1:
        return 0.0
    nsites = K * K
    if nsites > 12:
        raise SolverError("exact cover oracle limited to K*K <= 12 sites")
    off, pr = dist.projected(K)
    h = K // 2

    def site(i, j):
        return (i % K) * K + (j % K)

    moves = []
    for s in range(nsites):
        i, j = divmod(s, K)
        moves.append([(site(i + o[0], j + o[1]), p) for o, p in zip(off, pr)])
    full = (1 << nsites) - 1
    states = {}
    for mask in range(1, full):
        for s in range(nsites):
            if mask >> s & 1:
                states[(s, mask)] = len(states)
    n = len(states)
    rows, cols, vals = [], [], []
    for (s, mask), a in states.items():
        rows.append(a)
        cols.append(a)
        vals.append(1.0)
        for t, p in moves[s]:
            m2 = mask | (1 << t)
            if m2 == full:
                continue
            rows.append(a)
            cols.append(states[(t, m2)])
            vals.append(-p)
    A = sp.csc_matrix((vals, (rows, cols)), shape=(n, n))
    sol = spla.spsolve(A, np.ones(n))
    s0 = site(start[0] + h, start[1] + h)
    return float(sol[states[(s0, 1 << s0)]])
