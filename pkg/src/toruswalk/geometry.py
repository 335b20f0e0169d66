"""Lattice points, toral projection, discs and bands, jump classes, level radii."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple

import numpy as np


class GeometryError(ValueError):
    pass


class LatticePoint(NamedTuple):
    x: int
    y: int


@dataclass(frozen=True)
class TorusPoint:
    point: LatticePoint
    K: int

    def __post_init__(self):
        h = self.K // 2
        if self.K < 1 or not all(-h <= c <= self.K - 1 - h for c in self.point):
            raise GeometryError(f"{tuple(self.point)} is not in the primary window for K={self.K}")


def project_coords(x, K):
    """Componentwise ((x + K//2) mod K) - K//2; works on ints and arrays."""
    h = K // 2
    return np.mod(np.asarray(x) + h, K) - h


def project(x, K) -> TorusPoint:
    if K < 1:
        raise GeometryError("K must be positive")
    h = K // 2
    return TorusPoint(LatticePoint(((x[0] + h) % K) - h, ((x[1] + h) % K) - h), K)


def _as_torus(p, K=None):
    if isinstance(p, TorusPoint):
        return p
    if K is None:
        raise GeometryError("plain points need an explicit K")
    return project(p, K)


def toral_distance_sq(a, b, K):
    """Squared toral distance between two (already projected) points."""
    dx = abs(a[0] - b[0]) % K
    dy = abs(a[1] - b[1]) % K
    dx = min(dx, K - dx)
    dy = min(dy, K - dy)
    return dx * dx + dy * dy


def toral_distance(a, b) -> float:
    if not isinstance(a, TorusPoint) or not isinstance(b, TorusPoint):
        raise GeometryError("toral_distance expects TorusPoint arguments")
    if a.K != b.K:
        raise GeometryError(f"mismatched torus sizes {a.K} and {b.K}")
    # min over the 9 nearest copies reduces to coordinatewise wrap
    return math.sqrt(toral_distance_sq(a.point, b.point, a.K))


def exact_square(r) -> Fraction:
    """Exact r**2 as a Fraction; floats that are square roots of simple rationals snap."""
    if isinstance(r, (int, Fraction)):
        return Fraction(r) ** 2
    r = float(r)
    sq = r * r
    snapped = Fraction(sq).limit_denominator(10**6)
    if abs(float(snapped) - sq) <= 1e-12 * max(1.0, sq):
        return snapped
    return Fraction(r) ** 2


KINDS = ("disc", "annulus", "disc-complement", "toral-disc", "toral-annulus", "toral-disc-complement")


@dataclass(frozen=True)
class Region:
    kind: str
    center: tuple = (0, 0)
    radius: float = 1.0
    width: float = 0.0
    K: int | None = None
    radius_sq: Fraction = field(init=False, repr=False)
    outer_sq: Fraction = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GeometryError(f"unknown region kind {self.kind!r}")
        object.__setattr__(self, "center", (int(self.center[0]), int(self.center[1])))
        if self.radius < 0 or self.width < 0:
            raise GeometryError("radius and width must be nonnegative")
        rsq = exact_square(self.radius)
        if self.kind.endswith("annulus"):
            if isinstance(self.radius, (int, Fraction)) and isinstance(self.width, (int, Fraction)):
                osq = (Fraction(self.radius) + Fraction(self.width)) ** 2
            else:
                osq = exact_square(float(self.radius) + float(self.width))
        else:
            osq = rsq
        object.__setattr__(self, "radius_sq", rsq)
        object.__setattr__(self, "outer_sq", osq)
        if self.toral:
            if self.K is None or self.K < 2:
                raise GeometryError("toral regions need K >= 2")
            extent = float(self.radius) + (float(self.width) if self.kind.endswith("annulus") else 0.0)
            if not extent < self.K / 4:
                raise GeometryError(f"toral region needs radius+width < K/4 ({extent} >= {self.K / 4})")
            object.__setattr__(self, "center", tuple(project(self.center, self.K).point))

    @property
    def toral(self):
        return self.kind.startswith("toral")

    @property
    def base(self):
        return self.kind.replace("toral-", "")

    # integer thresholds on squared distance: member iff lo <= d2 <= hi
    @property
    def d2_bounds(self):
        big = None
        if self.base == "disc":
            return 0, math.ceil(self.radius_sq) - 1
        if self.base == "annulus":
            return math.ceil(self.radius_sq), math.ceil(self.outer_sq) - 1
        return math.ceil(self.radius_sq), big

    def contains_d2(self, d2):
        lo, hi = self.d2_bounds
        d2 = np.asarray(d2)
        ok = d2 >= lo
        if hi is not None:
            ok = ok & (d2 <= hi)
        return ok

    def contains(self, p):
        if self.toral:
            q = project(p, self.K).point
            d2 = toral_distance_sq(q, self.center, self.K)
        else:
            d2 = (p[0] - self.center[0]) ** 2 + (p[1] - self.center[1]) ** 2
        return bool(self.contains_d2(d2))

    def mask(self):
        """Boolean K x K membership array indexed by window coordinate + K//2."""
        return _cached_mask(self)

    def _build_mask(self):
        if not self.toral:
            raise GeometryError("mask only defined for toral regions")
        K, h = self.K, self.K // 2
        u = np.arange(K) - h
        dx = np.abs(u[:, None] - self.center[0]) % K
        dy = np.abs(u[None, :] - self.center[1]) % K
        dx = np.minimum(dx, K - dx)
        dy = np.minimum(dy, K - dy)
        return self.contains_d2(dx * dx + dy * dy)

    def members(self):
        """All member points as an (m, 2) int array (window coordinates if toral)."""
        if self.toral:
            K, h = self.K, self.K // 2
            ii, jj = np.nonzero(self.mask())
            return np.stack([ii - h, jj - h], axis=1).astype(np.int64)
        if self.base == "disc-complement":
            raise GeometryError("cannot enumerate an unbounded planar region")
        lo, hi = self.d2_bounds
        r = math.isqrt(max(hi, 0)) + 1
        xs = np.arange(-r, r + 1)
        gx, gy = np.meshgrid(xs, xs, indexing="ij")
        d2 = gx * gx + gy * gy
        sel = (d2 >= lo) & (d2 <= hi)
        pts = np.stack([gx[sel], gy[sel]], axis=1) + np.array(self.center)
        return pts.astype(np.int64)


@lru_cache(maxsize=64)
def _cached_mask(region):
    m = region._build_mask()
    m.setflags(write=False)
    return m


def region_members(region: Region):
    return [LatticePoint(int(x), int(y)) for x, y in region.members()]


def disc(center, radius, K=None):
    return Region("toral-disc" if K else "disc", center, radius, 0, K)


def annulus(center, radius, width, K=None):
    return Region("toral-annulus" if K else "annulus", center, radius, width, K)


def disc_complement(center, radius, K=None):
    return Region("toral-disc-complement" if K else "disc-complement", center, radius, 0, K)


def _num(tok):
    tok = tok.strip()
    try:
        return int(tok)
    except ValueError:
        return float(tok)


def parse_region(text):
    """Parse 'kind:cx,cy:radius[:width][:K=..]'."""
    parts = text.strip().split(":")
    if len(parts) < 3:
        raise GeometryError(f"region text {text!r} needs kind:center:radius")
    kind = parts[0]
    cx, cy = (int(v) for v in parts[1].split(","))
    radius = _num(parts[2])
    width, K = 0, None
    for tok in parts[3:]:
        if tok.startswith("K="):
            K = int(tok[2:])
        else:
            width = _num(tok)
    if K is not None and not kind.startswith("toral-"):
        kind = "toral-" + kind
    return Region(kind, (cx, cy), radius, width, K)


def format_region(region):
    base = region.base
    out = f"{base}:{region.center[0]},{region.center[1]}:{region.radius}"
    if base == "annulus":
        out += f":{region.width}"
    if region.toral:
        out += f":K={region.K}"
    return out


JUMP_CLASSES = ("baby", "small", "medium", "large", "targeted")


def classify_jump(offset, n, s, K):
    if not s <= n:
        raise GeometryError("classification needs s <= n")
    if not 2 * n < K / 2:
        raise GeometryError("classification needs 2n < K/2")
    d2 = Fraction(int(offset[0]) ** 2 + int(offset[1]) ** 2)
    n, s = Fraction(n), Fraction(s)
    gap = K - 2 * n
    flags = set()
    if d2 < s * s:
        flags.add("baby")
    if d2 < 4 * n * n:
        flags.add("small")
    if s * s <= d2 < gap * gap:
        flags.add("medium")
    if d2 >= gap * gap:
        flags.add("large")
        j = 1
        while j * j * gap * gap <= d2:
            if d2 * 2 <= j * j * (K + 2 * n) ** 2:
                flags.add("targeted")
                break
            j += 1
    return flags


@dataclass(frozen=True)
class LevelStructure:
    n: int
    a: float
    rho: float
    gamma_bar: float
    log_radii: tuple  # log r_{n,k}, k = 0..n
    widths: tuple  # s_k
    wide_width: float  # band width used for entrances at level n-1
    K: int
    v: dict  # k -> v_k
    lowest_level: int

    @property
    def radii(self):
        return tuple(math.exp(lr) if lr < 700 else math.inf for lr in self.log_radii)

    def radius(self, k):
        return self.radii[k]

    def outer_radius(self, k):
        return self.radii[k] + self.widths[k]

    @property
    def bands_thin(self):
        """True when s_k < sqrt(r_{n,k}) for every level."""
        return all(math.log(w) < 0.5 * lr for w, lr in zip(self.widths, self.log_radii))

    @staticmethod
    def custom(radii, widths, K, v, wide_width=None, lowest_level=1, a=1.0):
        """Desk-scale level structure with explicit radii (for simulation)."""
        n = len(radii) - 1
        return LevelStructure(
            n=n, a=a, rho=0.0, gamma_bar=0.0,
            log_radii=tuple(math.log(r) for r in radii),
            widths=tuple(widths),
            wide_width=float(wide_width if wide_width is not None else widths[n - 1]),
            K=int(K), v=dict(v), lowest_level=lowest_level,
        )


def thin_band_threshold():
    """Smallest n with n**4 < exp(n/2), i.e. s_k < r_{n,k}^(1/2) for all k >= 0."""
    n = 2
    while not 4 * math.log(n) < n / 2:
        n += 1
    return n


def build_levels(n, a=1.0, rho=0.1, gamma_bar=10.0):
    if not n > 13:
        raise GeometryError(f"n > 13 violated (n = {n})")
    if not 0 < a < 2:
        raise GeometryError(f"0 < a < 2 violated (a = {a})")
    if not rho < (2 - a) / 2:
        raise GeometryError(f"rho < (2 - a)/2 violated (rho = {rho}, a = {a})")
    if not gamma_bar >= 10:
        raise GeometryError(f"gamma_bar >= 10 violated (gamma_bar = {gamma_bar})")
    logn = math.log(n)
    log_radii = tuple(n + 3 * k * logn for k in range(n + 1))
    widths = tuple(float(n**4) for _ in range(n + 1))
    wide = math.exp(0.5 * log_radii[n - 1])
    with localcontext() as ctx:
        ctx.prec = 80 + int(gamma_bar + 3 * n) * 2
        K = int((Decimal(n) ** Decimal(repr(gamma_bar)) * Decimal(n).exp()
                 * Decimal(n) ** (3 * n)).to_integral_value())
    v = {k: 3 * a * k * k * math.log(k) for k in range(2, n + 1)}
    return LevelStructure(n=n, a=a, rho=rho, gamma_bar=gamma_bar, log_radii=log_radii,
                          widths=widths, wide_width=wide, K=K, v=v,
                          lowest_level=max(2, math.ceil(rho * n)))
