"""Symmetric step distributions on Z^2: construction, validation, sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class DistributionError(ValueError):
    """Raised when a step table violates one of the admissibility invariants.

    ``invariant`` names the failing check ("sum", "nonnegative", "symmetry",
    "isotropy", "parameter").
    """

    def __init__(self, invariant, message):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


SUM_TOL = 1e-12
ISOTROPY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class StepDistribution:
    offsets: np.ndarray  # (m, 2) int64
    probs: np.ndarray  # (m,) float64
    beta: float = 1.0
    support_bounded: bool = True
    name: str = "custom"
    truncated_mass: float = 0.0
    irreducible: bool = True
    strongly_aperiodic: bool = True
    c: float = field(init=False)

    def __post_init__(self):
        second = float(np.sum(self.probs * np.sum(self.offsets.astype(float) ** 2, axis=1)))
        object.__setattr__(self, "c", second / 2.0)

    @property
    def entries(self):
        return [((int(x), int(y)), float(p)) for (x, y), p in zip(self.offsets, self.probs)]

    @property
    def covariance_scalar(self):
        return self.c

    @property
    def gamma_sq(self):
        return 2.0 * self.c

    @property
    def pi_gamma(self):
        return 2.0 * math.pi * self.c

    @property
    def moment_order(self):
        return 4.0 + 2.0 * self.beta

    @property
    def moment_M(self):
        return moment(self, self.moment_order)

    @property
    def max_jump(self):
        return float(np.sqrt(np.max(np.sum(self.offsets.astype(float) ** 2, axis=1))))

    def tail_mass(self, radius):
        """Probability of a step with |offset| > radius."""
        norms = np.sqrt(np.sum(self.offsets.astype(float) ** 2, axis=1))
        return float(np.sum(self.probs[norms > radius]))

    def prob(self, offset):
        hit = np.flatnonzero((self.offsets[:, 0] == offset[0]) & (self.offsets[:, 1] == offset[1]))
        return float(self.probs[hit[0]]) if hit.size else 0.0

    def projected(self, K):
        """Offsets reduced mod K with merged probabilities (the toral step law)."""
        red = np.mod(self.offsets, K)
        keys = red[:, 0] * K + red[:, 1]
        uniq, inv = np.unique(keys, return_inverse=True)
        probs = np.bincount(inv, weights=self.probs)
        return np.stack([uniq // K, uniq % K], axis=1), probs

    def to_text(self):
        lines = [f"c={self.c!r} beta={float(self.beta)!r}"]
        for (x, y), p in zip(self.offsets, self.probs):
            lines.append(f"{int(x)} {int(y)} {float(p)!r}")
        return "\n".join(lines) + "\n"


def _merge(offsets, probs):
    offsets = np.asarray(offsets, dtype=np.int64).reshape(-1, 2)
    probs = np.asarray(probs, dtype=float)
    out, inv = np.unique(offsets, axis=0, return_inverse=True)
    merged = np.bincount(inv.ravel(), weights=probs)
    keep = merged > 0
    return out[keep].astype(np.int64), merged[keep]


def _lattice_index(vectors):
    """Index in Z^2 of the lattice generated by integer vectors (0 if rank < 2)."""
    # basis kept in Hermite form: rows (a, b) and (0, d)
    a = b = d = 0
    for vx, vy in vectors:
        vx, vy = int(vx), int(vy)
        if vx == 0:
            d = math.gcd(d, vy)
        elif a == 0:
            a, b = vx, vy
        else:
            g, s, t = _egcd(a, vx)
            rem = (vx // g) * b - (a // g) * vy
            a, b = g, s * b + t * vy
            d = math.gcd(d, rem)
    return abs(a * d)


def _egcd(x, y):
    if y == 0:
        return (abs(x), 1 if x >= 0 else -1, 0)
    old_r, r = x, y
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r != 0:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    if old_r < 0:
        old_r, old_s, old_t = -old_r, -old_s, -old_t
    return old_r, old_s, old_t


def _validate(offsets, probs):
    if np.any(probs < 0) or not np.all(np.isfinite(probs)):
        raise DistributionError("nonnegative", "probabilities must be finite and >= 0")
    total = float(np.sum(probs))
    if abs(total - 1.0) > SUM_TOL:
        raise DistributionError("sum", f"probabilities sum to {total!r}, not 1")
    # symmetry: p(x) == p(-x)
    lookup = {(int(x), int(y)): p for (x, y), p in zip(offsets, probs)}
    for (x, y), p in lookup.items():
        q = lookup.get((-x, -y))
        if q is None or abs(p - q) > 1e-15 + 1e-12 * p:
            raise DistributionError("symmetry", f"p({x},{y})={p!r} but p({-x},{-y})={q!r}")
    xy = offsets.astype(float)
    cxx = float(np.sum(probs * xy[:, 0] ** 2))
    cyy = float(np.sum(probs * xy[:, 1] ** 2))
    cxy = float(np.sum(probs * xy[:, 0] * xy[:, 1]))
    scale = max(1.0, cxx, cyy)
    if abs(cxy) > ISOTROPY_TOL * scale or abs(cxx - cyy) > ISOTROPY_TOL * scale:
        raise DistributionError(
            "isotropy", f"covariance [[{cxx}, {cxy}], [{cxy}, {cyy}]] is not a multiple of I"
        )
    if cxx <= 0:
        raise DistributionError("isotropy", "degenerate covariance (walk does not move)")


def _aperiodicity_flags(offsets):
    irreducible = _lattice_index(offsets) == 1
    base = offsets[0]
    strongly = _lattice_index(offsets - base) == 1
    return irreducible, strongly


def _make(offsets, probs, beta, support_bounded, name, truncated_mass=0.0):
    offsets, probs = _merge(offsets, probs)
    _validate(offsets, probs)
    if beta < 0:
        raise DistributionError("parameter", f"beta must be >= 0, got {beta}")
    irreducible, strongly = _aperiodicity_flags(offsets)
    return StepDistribution(
        offsets=offsets,
        probs=probs,
        beta=float(beta),
        support_bounded=support_bounded,
        name=name,
        truncated_mass=truncated_mass,
        irreducible=irreducible,
        strongly_aperiodic=strongly,
    )


_UNIT = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], dtype=np.int64)


def build_srw():
    return _make(_UNIT, np.full(4, 0.25), beta=1.0, support_bounded=True, name="srw")


def build_lazy_srw(epsilon):
    if not 0.0 <= epsilon < 1.0:
        raise DistributionError("parameter", f"laziness must lie in [0, 1), got {epsilon}")
    if epsilon == 0.0:
        return build_srw()
    offsets = np.vstack([[[0, 0]], _UNIT])
    probs = np.array([epsilon] + [(1.0 - epsilon) / 4.0] * 4)
    return _make(offsets, probs, beta=1.0, support_bounded=True, name=f"lazy:{epsilon!r}")


POISSON_TAIL = 1e-15


def build_poisson_jump(lam, K, j_max=None, beta=1.0):
    """Jumps of length K**j along the axes with j ~ Poisson(lam).

    The Poisson tail beyond ``j_max`` (chosen automatically when None so that
    it is below 1e-15) is folded into the unit ring j = 0.
    """
    if lam <= 0:
        raise DistributionError("parameter", f"lambda must be positive, got {lam}")
    if K < 1 or K % 2 == 0:
        raise DistributionError("parameter", f"K must be odd, got {K}")
    weights = []
    j = 0
    cum = 0.0
    while True:
        w = math.exp(-lam + j * math.log(lam) - math.lgamma(j + 1))
        weights.append(w)
        cum += w
        if j_max is not None and j >= j_max:
            break
        if j_max is None and 1.0 - cum < POISSON_TAIL and w < POISSON_TAIL:
            break
        j += 1
    weights = np.array(weights)
    residual = max(0.0, 1.0 - float(np.sum(weights)))
    if j_max is not None and residual > POISSON_TAIL:
        raise DistributionError("parameter", f"j_max={j_max} leaves tail {residual:.3g} > 1e-15")
    if K ** (len(weights) - 1) > 2**52:
        raise DistributionError("parameter", "jump lengths exceed exact integer range")
    folded = weights.copy()
    folded[0] += 1.0 - float(np.sum(weights))
    offsets, probs = [], []
    for j, w in enumerate(folded):
        offsets.append(_UNIT * K**j)
        probs.append(np.full(4, w / 4.0))
    dist = _make(np.vstack(offsets), np.concatenate(probs), beta=beta, support_bounded=False,
                 name=f"poisson:{lam!r}:{K}", truncated_mass=residual)
    return dist


def poisson_covariance_scalar(lam, K):
    """Covariance scalar of the untruncated Poisson-jump walk."""
    return 0.5 * math.exp((K * K - 1) * lam)


def build_custom(entries, beta=1.0, name="custom"):
    if isinstance(entries, dict):
        entries = list(entries.items())
    if not entries:
        raise DistributionError("sum", "empty table")
    offsets = np.array([tuple(o) for o, _ in entries], dtype=np.int64)
    probs = np.array([float(p) for _, p in entries])
    return _make(offsets, probs, beta=beta, support_bounded=True, name=name)


def rebuild(dist):
    return _make(dist.offsets, dist.probs, dist.beta, dist.support_bounded, dist.name,
                 dist.truncated_mass)


def moment(dist, m):
    if m < 0:
        raise DistributionError("parameter", "moment order must be >= 0")
    norms = np.sqrt(np.sum(dist.offsets.astype(float) ** 2, axis=1))
    if m == 0:
        return float(np.sum(dist.probs))
    return float(np.sum(dist.probs * norms**m))


def from_text(text):
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    header = dict(tok.split("=", 1) for tok in lines[0].split())
    beta = float(header.get("beta", 1.0))
    entries = []
    for ln in lines[1:]:
        dx, dy, p = ln.split()
        entries.append(((int(dx), int(dy)), float(p)))
    dist = build_custom(entries, beta=beta, name="table")
    if "c" in header:
        declared = float(header["c"])
        if abs(declared - dist.c) > 1e-12 * max(1.0, abs(declared)):
            raise DistributionError("isotropy", f"header c={declared!r} disagrees with table c={dist.c!r}")
    return dist


@dataclass
class ConditionAReport:
    passed: bool
    via_bounded_support: bool
    infimum: float
    bound: float
    worst_point: tuple | None
    points_checked: int


def check_condition_a(dist, n, s, beta, c, center=(0, 0), max_points=4096, rng=None):
    """One-step entry into D(center, n) from the band n <= |y - center| < n + s."""
    if s > n:
        raise ValueError("band width s must not exceed n")
    bound = c * math.exp(-beta * s**0.25)
    if dist.support_bounded:
        return ConditionAReport(True, True, math.nan, bound, None, 0)
    r = n + s
    xs = np.arange(-r, r + 1)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    d2 = gx**2 + gy**2
    band = (d2 >= n * n) & (d2 < r * r)
    pts = np.stack([gx[band], gy[band]], axis=1)
    if len(pts) > max_points:
        rng = rng or np.random.default_rng(0)
        pts = pts[rng.choice(len(pts), max_points, replace=False)]
    best, worst = math.inf, None
    for y in pts:
        z = y + dist.offsets
        inside = np.sum(z.astype(float) ** 2, axis=1) < n * n
        val = float(np.sum(dist.probs[inside]))
        if val < best:
            best, worst = val, (int(y[0] + center[0]), int(y[1] + center[1]))
    return ConditionAReport(best >= bound, False, best, bound, worst, len(pts))


class AliasTable:
    """Two-column lookup for O(1) sampling from a finite table."""

    def __init__(self, probs):
        probs = np.asarray(probs, dtype=float)
        m = len(probs)
        scaled = probs * m / probs.sum()
        self.accept = np.ones(m)
        self.alias = np.arange(m)
        small = [i for i in range(m) if scaled[i] < 1.0]
        large = [i for i in range(m) if scaled[i] >= 1.0]
        while small and large:
            lo, hi = small.pop(), large.pop()
            self.accept[lo] = scaled[lo]
            self.alias[lo] = hi
            scaled[hi] -= 1.0 - scaled[lo]
            (small if scaled[hi] < 1.0 else large).append(hi)
        self.size = m

    def draw(self, rng, size):
        col = rng.integers(0, self.size, size=size)
        u = rng.random(size)
        return np.where(u < self.accept[col], col, self.alias[col])


_ALIAS_CACHE = {}


def alias_for(dist):
    key = id(dist)
    tab = _ALIAS_CACHE.get(key)
    if tab is None or tab[0] is not dist:
        tab = (dist, AliasTable(dist.probs))
        _ALIAS_CACHE[key] = tab
    return tab[1]


def sample_steps(dist, rng, size):
    idx = alias_for(dist).draw(rng, size)
    return dist.offsets[idx]


def sample_step(dist, rng):
    x, y = sample_steps(dist, rng, 1)[0]
    return int(x), int(y)
