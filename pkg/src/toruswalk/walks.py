"""Planar and toral walks: stopping times, coupling, excursions, cover runs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kern
from .geometry import GeometryError, Region, TorusPoint, annulus, disc, disc_complement, project
from .steps import alias_for

CHUNK = 1 << 16
FIRST_CHUNK = 64


def trial_rng(seed, trial):
    """Independent stream for one trial, derived from (seed, trial index) only."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(trial),)))


class StepStream:
    """Buffered step offsets drawn from a distribution with a private generator."""

    def __init__(self, dist, rng):
        self.dist = dist
        self.rng = rng
        self._alias = alias_for(dist)
        self._uniform = bool(np.all(dist.probs == dist.probs[0]))
        self.dx = np.empty(0, dtype=np.int64)
        self.dy = np.empty(0, dtype=np.int64)
        self.pos = 0
        self._next = FIRST_CHUNK

    def ensure(self):
        if self.pos >= len(self.dx):
            # chunk sizes grow geometrically on a fixed schedule, so short
            # walks stay cheap and the draw sequence is still deterministic
            size = self._next
            self._next = min(2 * size, CHUNK)
            if self._uniform:
                idx = self.rng.integers(0, len(self.dist.probs), size=size)
            else:
                idx = self._alias.draw(self.rng, size)
            off = self.dist.offsets[idx]
            self.dx = np.ascontiguousarray(off[:, 0])
            self.dy = np.ascontiguousarray(off[:, 1])
            self.pos = 0


@dataclass
class WalkState:
    position: tuple
    stream: StepStream
    K: int | None = None  # None = planar
    time: int = 0

    def __post_init__(self):
        if self.K is not None:
            self.position = tuple(project(self.position, self.K).point)
        self.position = (int(self.position[0]), int(self.position[1]))

    @property
    def mode(self):
        return "planar" if self.K is None else "toral"

    @classmethod
    def planar(cls, dist, rng, start=(0, 0)):
        return cls(start, StepStream(dist, rng))

    @classmethod
    def toral(cls, dist, rng, K, start=(0, 0)):
        return cls(start, StepStream(dist, rng), K=K)


@dataclass
class HittingRecord:
    stop_time: int
    stop_position: tuple
    censored: bool
    cap: int


def _target_spec(target, K_state):
    """Translate a target into kernel arguments (kind, cx, cy, lo, hi, mask, K)."""
    if isinstance(target, TorusPoint):
        mask = np.zeros((target.K, target.K), dtype=np.bool_)
        h = target.K // 2
        mask[target.point[0] + h, target.point[1] + h] = True
        return kern.TORAL_MASK, 0, 0, 0, -1, mask, target.K
    if isinstance(target, tuple) and len(target) == 2:
        return kern.PLANAR, int(target[0]), int(target[1]), 0, 0, kern.empty_mask(1), 1
    if not isinstance(target, Region):
        raise TypeError("target must be a Region, a TorusPoint, or a lattice point")
    if target.toral:
        return kern.TORAL_MASK, 0, 0, 0, -1, target.mask(), target.K
    lo, hi = target.d2_bounds
    return kern.PLANAR, target.center[0], target.center[1], lo, (-1 if hi is None else hi), \
        kern.empty_mask(1), 1


def _contains_now(state, target):
    if isinstance(target, TorusPoint):
        p = project(state.position, target.K).point
        return tuple(p) == tuple(target.point)
    if isinstance(target, tuple):
        if state.K is not None:
            return tuple(project(target, state.K).point) == state.position
        return state.position == (int(target[0]), int(target[1]))
    return target.contains(state.position)


def run_until(state: WalkState, target, cap: int) -> HittingRecord:
    """Advance until the first time t >= 0 the walk is in ``target`` or ``cap`` steps pass.

    Stop times are measured from the state's current time."""
    if cap <= 0:
        raise ValueError("cap must be positive")
    if _contains_now(state, target):
        return HittingRecord(0, state.position, False, cap)
    kind, cx, cy, lo, hi, mask, K = _target_spec(target, state.K)
    stream = state.stream
    elapsed = 0
    if state.K is not None:
        if kind == kern.PLANAR:
            # a planar point/disc target seen from the torus: use its projection
            raise GeometryError("toral walks need toral targets")
        if K != state.K:
            raise GeometryError(f"target torus K={K} differs from walk K={state.K}")
        h = K // 2
        u, v = state.position[0] + h, state.position[1] + h
        while elapsed < cap:
            stream.ensure()
            used, u, v, hit = kern.run_toral(u, v, stream.dx, stream.dy, stream.pos,
                                             cap - elapsed, mask, K)
            stream.pos += used
            elapsed += used
            if hit:
                break
        state.position = (int(u) - h, int(v) - h)
    else:
        x, y = state.position
        hit = False
        while elapsed < cap:
            stream.ensure()
            used, x, y, hit = kern.run_planar(x, y, stream.dx, stream.dy, stream.pos,
                                              cap - elapsed, kind, cx, cy, lo, hi, mask, K)
            stream.pos += used
            elapsed += used
            if hit:
                break
        state.position = (int(x), int(y))
    state.time += elapsed
    return HittingRecord(elapsed, state.position, not hit, cap)


COUPLED_NAMES = ("planar_band", "pullback_band", "pullback_toral_complement",
                 "planar_complement", "toral_band", "toral_complement")


@dataclass
class CoupledRecord:
    start: tuple
    times: dict  # name -> stop time, or None when censored
    cap: int

    def _t(self, name):
        t = self.times[name]
        return math.inf if t is None else t

    @property
    def chain_holds(self):
        a, b, c, d = (self._t(n) for n in COUPLED_NAMES[:4])
        return a >= b >= c >= d >= 1

    @property
    def pullback_equal(self):
        return (self.times["pullback_band"] == self.times["toral_band"]
                and self.times["pullback_toral_complement"] == self.times["toral_complement"])


def coupled_run(state: WalkState, K: int, n, s, cap: int = 10**6) -> CoupledRecord:
    """Drive a planar walk and its projection with one step sequence."""
    if state.K is not None:
        raise GeometryError("coupled_run starts from a planar state")
    band_t = annulus((0, 0), n, s, K)  # raises when n + s >= K/4
    disc_t = disc((0, 0), n, K)
    band_p = annulus((0, 0), n, s)
    disc_p = disc((0, 0), n)
    if not disc_p.contains(state.position):
        raise GeometryError("coupled_run must start inside D(0, n)")
    blo, bhi = band_p.d2_bounds
    _, dhi = disc_p.d2_bounds
    times = np.full(6, -1, dtype=np.int64)
    h = K // 2
    x, y = state.position
    u, v = (x + h) % K, (y + h) % K
    stream = state.stream
    elapsed = 0
    while elapsed < cap:
        stream.ensure()
        used, x, y, u, v, done = kern.coupled(x, y, u, v, stream.dx, stream.dy, stream.pos,
                                              cap - elapsed, elapsed, K, blo, bhi, dhi,
                                              band_t.mask(), disc_t.mask(), times)
        stream.pos += used
        elapsed += used
        if done:
            break
    start = state.position
    state.position = (int(x), int(y))
    state.time += elapsed
    rec = {name: (int(t) if t >= 0 else None) for name, t in zip(COUPLED_NAMES, times)}
    return CoupledRecord(start, rec, cap)


@dataclass
class ExcursionRecord:
    center: tuple
    r: float
    s: float
    R: float
    K: int
    tau0: int
    tau: np.ndarray
    sigma: np.ndarray
    visits_before: np.ndarray
    visits_after: np.ndarray

    @property
    def visits(self):
        return self.visits_before + self.visits_after

    @property
    def cumulative(self):
        return self.tau0 + np.cumsum(self.tau)

    @property
    def total_time(self):
        return int(self.tau0 + self.tau.sum())

    def to_csv(self):
        lines = ["j,tau,sigma,Y"]
        lines.append(f"0,{self.tau0},0,0")
        for j, (t, sg, y) in enumerate(zip(self.tau, self.sigma, self.visits), start=1):
            lines.append(f"{j},{int(t)},{int(sg)},{int(y)}")
        return "\n".join(lines) + "\n"


def decompose_excursions(center, r, s, R, state: WalkState, count: int,
                         enforce_far_bound=False, cap=None) -> ExcursionRecord:
    """Split a toral trajectory into ``count`` band -> far set -> band excursions."""
    if state.K is None:
        raise GeometryError("excursions are defined for toral walks")
    K = state.K
    if not r + s <= R:
        raise GeometryError(f"need r + s <= R (r={r}, s={s}, R={R})")
    if enforce_far_bound and not R <= K / 24:
        raise GeometryError(f"concentration check needs R <= K/24 (R={R}, K={K})")
    cpt = center.point if isinstance(center, TorusPoint) else project(center, K).point
    band = annulus(cpt, r, s, K)
    far = disc_complement(cpt, R, K)
    h = K // 2
    cu, cv = cpt[0] + h, cpt[1] + h
    tau = np.zeros(count, dtype=np.int64)
    sigma = np.zeros(count, dtype=np.int64)
    yb = np.zeros(count, dtype=np.int64)
    ya = np.zeros(count, dtype=np.int64)
    u, v = state.position[0] + h, state.position[1] + h
    bmask, fmask = band.mask(), far.mask()
    t = 0
    if bmask[u, v]:
        phase, seg_start = 1, 0
    else:
        phase, seg_start = 0, 0
    sigma_mark, vb, va, done = 0, 0, 0, 0
    stream = state.stream
    cap = cap or np.iinfo(np.int64).max
    while done < count and t < cap:
        stream.ensure()
        used, u, v, phase, t, seg_start, sigma_mark, vb, va, done = kern.excursions(
            u, v, stream.dx, stream.dy, stream.pos, K, cu, cv, bmask, fmask,
            phase, t, seg_start, sigma_mark, vb, va, count, tau, sigma, yb, ya, done)
        stream.pos += used
    if done < count:
        raise RuntimeError(f"only {done} of {count} excursions completed before the cap")
    # the kernel stops exactly at the end of the last excursion
    tau0 = int(t - tau.sum())
    state.position = (int(u) - h, int(v) - h)
    state.time += int(t)
    return ExcursionRecord(tuple(cpt), r, s, R, K, tau0, tau, sigma, yb, ya)


@dataclass
class LevelCensus:
    counts: dict  # level -> N_{n,level}; level 0 = visits to the centre
    band_faithful: bool
    completion_time: int | None
    successful: bool
    checked_levels: tuple


def census_levels(center, levels, state: WalkState, max_K=4096, cap=None) -> LevelCensus:
    if state.K is None:
        raise GeometryError("census runs on the torus")
    K = state.K
    if K != levels.K:
        raise GeometryError(f"walk torus K={K} differs from level structure K={levels.K}")
    if K > max_K:
        raise GeometryError(f"K={K} exceeds the desk-scale limit {max_K}")
    n = levels.n
    radii = levels.radii
    if radii[n] + levels.widths[n] >= K / 2:
        raise GeometryError("level structure does not fit in the torus")
    big = np.iinfo(np.int64).max // 4
    out_lo = np.array([math.ceil(r * r) for r in radii], dtype=np.int64)
    enter_hi = np.array([math.ceil((r + w) ** 2) - 1 for r, w in zip(radii, levels.widths)],
                        dtype=np.int64)
    enter_hi[n - 1] = math.ceil((radii[n - 1] + levels.wide_width) ** 2) - 1
    band_out_hi = np.full(n + 1, big, dtype=np.int64)
    band_in_lo = np.zeros(n + 1, dtype=np.int64)
    checked = tuple(range(max(levels.lowest_level - 1, 0), n))
    for k in checked:
        band_out_hi[k] = enter_hi[k] if k != n - 1 else math.ceil((radii[k] + levels.widths[k]) ** 2) - 1
        band_in_lo[k] = out_lo[k]
    cpt = center.point if isinstance(center, TorusPoint) else project(center, K).point
    h = K // 2
    cu, cv = cpt[0] + h, cpt[1] + h
    u, v = state.position[0] + h, state.position[1] + h
    counts = np.zeros(n + 1, dtype=np.int64)
    armed = np.zeros(n + 1, dtype=np.int64)
    st = np.array([1, 0, -1], dtype=np.int64)
    top = int(math.ceil(levels.v[n]))
    stream = state.stream
    t = 0
    cap = cap or np.iinfo(np.int64).max // 2
    while st[0] == 1 and st[1] == 0 and t < cap:
        stream.ensure()
        used, u, v, t = kern.census(u, v, stream.dx, stream.dy, stream.pos, cap - t, t, K, cu, cv,
                                    out_lo, out_lo, band_out_hi, enter_hi, band_in_lo,
                                    armed, counts, top, st)
        stream.pos += used
    state.position = (int(u) - h, int(v) - h)
    state.time += int(t)
    faithful = bool(st[0])
    finished = bool(st[1])
    cnt = {k: int(counts[k]) for k in range(n + 1)}
    ok = faithful and finished and cnt[0] == 0 and all(
        abs(cnt[k] - levels.v[k]) <= k for k in range(levels.lowest_level, n))
    return LevelCensus(cnt, faithful, int(st[2]) if finished else None, ok, checked)


def cover_cap(K, dist, cap_multiplier=64.0):
    if K <= 1:
        return 0
    return int(math.ceil(cap_multiplier * (4.0 / dist.pi_gamma) * (K * math.log(K)) ** 2))


@dataclass
class CoverResult:
    K: int
    cover_time: int
    last_point: TorusPoint | None
    visit_times: np.ndarray  # K x K, index = window coordinate + K//2, -1 if unvisited
    censored: bool
    cap: int

    @property
    def normalized(self):
        return self.cover_time / (self.K * math.log(self.K)) ** 2 if self.K > 1 else 0.0

    def to_csv(self):
        h = self.K // 2
        lines = ["x,y,first_visit_time"]
        for i in range(self.K):
            for j in range(self.K):
                lines.append(f"{i - h},{j - h},{int(self.visit_times[i, j])}")
        return "\n".join(lines) + "\n"


def cover_run(K, dist, rng, cap_multiplier=64.0, start=(0, 0)) -> CoverResult:
    if K < 1:
        raise ValueError("K must be positive")
    h = K // 2
    start = project(start, K).point
    first = np.full((K, K), -1, dtype=np.int64)
    u, v = start[0] + h, start[1] + h
    first[u, v] = 0
    remaining = K * K - 1
    cap = cover_cap(K, dist, cap_multiplier)
    stream = StepStream(dist, rng)
    t = 0
    while remaining > 0 and t < cap:
        stream.ensure()
        used, u, v, t, remaining = kern.cover(u, v, stream.dx, stream.dy, stream.pos,
                                              cap - t, t, K, first, remaining)
        stream.pos += used
    censored = remaining > 0
    if censored:
        return CoverResult(K, cap, None, first, True, cap)
    idx = np.unravel_index(int(np.argmax(first)), first.shape)
    last = TorusPoint(project((idx[0] - h, idx[1] - h), K).point, K)
    return CoverResult(K, int(first.max()), last, first, False, cap)


def late_threshold(K, alpha, pi_gamma):
    return (4.0 * alpha / pi_gamma) * (K * math.log(K)) ** 2


def late_points(visit_times, K, alpha, pi_gamma, cap=None):
    """Points whose first visit time is at least (4 alpha / pi_Gamma)(K log K)^2.

    Unvisited entries (-1) count as late while the threshold does not exceed
    the cap; beyond it their status is unknown and the call is rejected."""
    visit_times = np.asarray(visit_times)
    thr = late_threshold(K, alpha, pi_gamma) if K > 1 else 0.0
    unvisited = visit_times < 0
    if unvisited.any():
        if cap is None or thr > cap:
            raise ValueError("censored visit table cannot decide lateness at this alpha")
    late = (visit_times >= thr) | unvisited
    h = K // 2
    ii, jj = np.nonzero(late)
    return {(int(i) - h, int(j) - h) for i, j in zip(ii, jj)}


def late_count(visit_times, K, alpha, pi_gamma):
    thr = late_threshold(K, alpha, pi_gamma)
    return int(np.sum(np.asarray(visit_times) >= thr))
