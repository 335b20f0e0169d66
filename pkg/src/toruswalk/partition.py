"""Three-set partition quantities and excursion oracles.

For a partition A, B, C of the torus (or of the plane with B the unbounded
piece) the walk from A can reach C directly or via an excursion to B.
    psi_a   = P^a(T_B < T_C)          sigma_b = P^b(T_A < T_C)
    rho_a   = sum_b' H_{B u C}(a, b') sigma_b'
    phi_b   = sum_a' H_{A u C}(b, a') psi_a'
Each family is one linear solve on A or on B.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import GeometryError, Region, annulus, disc, disc_complement
from .solvers import PointIndex, System, torus_points, transition

SANDWICH_SLACK = 1e-9
BIG_DIRECT = 400_000


def _pts(S, K):
    if isinstance(S, Region):
        if S.K != K:
            raise GeometryError("region torus side does not match K")
        return S.members()
    return np.asarray(S, dtype=np.int64).reshape(-1, 2)


def _check_partition(A, B, C, K):
    allp = np.concatenate([A, B, C])
    if len(np.unique(allp, axis=0)) != len(allp):
        raise GeometryError("partition pieces overlap")
    if K is not None and len(allp) != K * K:
        raise GeometryError(f"partition leaves {K * K - len(allp)} torus points uncovered")


def disc_band_partition(K, n, s):
    """A = disc D(0,n), C = band n <= |y| < n+s, B = everything beyond, on the K-torus."""
    if not n + s < K / 4:
        raise GeometryError(f"toral partition needs n + s < K/4 (n={n}, s={s}, K={K})")
    return (disc((0, 0), n, K).members(), disc_complement((0, 0), n + s, K).members(),
            annulus((0, 0), n, s, K).members())


@dataclass
class ThreeSetQuantities:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    psi_a: np.ndarray
    sigma_b: np.ndarray
    rho_a: np.ndarray
    phi_b: np.ndarray
    f_A: float
    f_B: float
    green_checks: dict  # name -> max violation (<= 0 means the bound holds)
    time_checks: dict

    @property
    def psi(self):
        return float(self.psi_a.max()) if len(self.psi_a) else 0.0

    @property
    def sigma(self):
        return float(self.sigma_b.max()) if len(self.sigma_b) else 0.0

    def holds(self, slack=SANDWICH_SLACK):
        viol = list(self.green_checks.values()) + list(self.time_checks.values())
        order = bool(np.all(self.psi_a >= self.rho_a - slack)) and \
            bool(np.all(self.sigma_b >= self.phi_b - slack))
        return order and all(v <= slack for v in viol)

    def summary(self):
        return {"psi": self.psi, "sigma": self.sigma,
                "rho_max": float(self.rho_a.max()) if len(self.rho_a) else 0.0,
                "phi_max": float(self.phi_b.max()) if len(self.phi_b) else 0.0,
                "f_A": self.f_A, "f_B": self.f_B,
                **{f"viol_{k}": v for k, v in self.green_checks.items()},
                **{f"viol_{k}": v for k, v in self.time_checks.items()}}


def _inverse(sysm):
    n = len(sysm)
    return sysm.solve(np.eye(n)) if n else np.zeros((0, 0))


def _rel(excess, scale):
    # violation measured against the size of the quantities involved
    return float(np.max(excess / np.maximum(1.0, scale))) if excess.size else -math.inf


def three_set(A, B, C, dist, K=None) -> ThreeSetQuantities:
    A, B, C = _pts(A, K), _pts(B, K), _pts(C, K)
    if K is None and len(B):
        raise GeometryError("planar three-set solves need a finite partition; use the torus")
    _check_partition(A, B, C, K)
    sA, sB = System(A, dist, K), System(B, dist, K)
    iA, iB = sA.index, sB.index
    GA, GB = _inverse(sA), _inverse(sB)
    if len(B):
        QAB = transition(A, iB, dist, K) if len(A) else None
        QBA = transition(B, iA, dist, K) if len(A) else None
        psi_a = GA @ (QAB @ np.ones(len(B))) if len(A) else np.zeros(0)
        sigma_b = GB @ (QBA @ np.ones(len(A))) if len(A) else np.zeros(len(B))
        HAB = GA @ QAB.toarray() if len(A) else np.zeros((0, len(B)))
        HBA = GB @ QBA.toarray() if len(A) else np.zeros((len(B), 0))
        rho_a = HAB @ sigma_b
        phi_b = HBA @ psi_a
    else:
        psi_a = np.zeros(len(A))
        sigma_b = np.zeros(0)
        rho_a = np.zeros(len(A))
        phi_b = np.zeros(0)
        HAB = np.zeros((len(A), 0))

    AB = np.concatenate([A, B])
    sAB = System(AB, dist, K, direct_max=BIG_DIRECT)
    GAB = _inverse(sAB)
    na = len(A)
    GAB_aa, GAB_bb, GAB_ab = GAB[:na, :na], GAB[na:, na:], GAB[:na, na:]

    green = {}
    dA = np.diag(GA)
    green["GA_le_GAB"] = _rel(GA - GAB_aa, GAB_aa)
    upper_a = GA + (rho_a[:, None] / (1.0 - rho_a[None, :])) * dA[None, :]
    green["GAB_le_upper_a"] = _rel(GAB_aa - upper_a, upper_a)
    if len(B):
        dB = np.diag(GB)
        green["GB_le_GAB"] = _rel(GB - GAB_bb, GAB_bb)
        upper_b = GB + (phi_b[:, None] / (1.0 - phi_b[None, :])) * dB[None, :]
        green["GAB_le_upper_b"] = _rel(GAB_bb - upper_b, upper_b)
        cross = np.minimum(sigma_b[None, :] / (1.0 - rho_a[:, None]) * dA[:, None],
                           psi_a[:, None] / (1.0 - phi_b[None, :]) * dB[None, :])
        green["GAB_ab_le_min"] = _rel(GAB_ab - cross, cross)
        green["GAB_ab_nonneg"] = float(np.max(-GAB_ab)) if GAB_ab.size else -math.inf

    eA = sA.solve(np.ones(na)) if na else np.zeros(0)  # E^a T_{B u C}
    eB = sB.solve(np.ones(len(B))) if len(B) else np.zeros(0)
    eC = sAB.solve(np.ones(len(AB)))  # E^x T_C
    f_A = float(eA.max()) if na else 0.0
    f_B = float(eB.max()) if len(B) else 0.0
    psi = float(psi_a.max()) if na else 0.0
    sigma = float(sigma_b.max()) if len(B) else 0.0
    denom = 1.0 - psi * sigma
    times = {}
    times["EA_le_EC"] = _rel(eA - eC[:na], eC[:na])
    up_a = eA + psi_a * (f_B + sigma * f_A) / denom
    times["EC_le_upper_a"] = _rel(eC[:na] - up_a, up_a)
    if len(B):
        times["EB_le_EC"] = _rel(eB - eC[na:], eC[na:])
        up_b = eB + sigma_b * (f_A + psi * f_B) / denom
        times["EC_le_upper_b"] = _rel(eC[na:] - up_b, up_b)
    return ThreeSetQuantities(A, B, C, psi_a, sigma_b, rho_a, phi_b, f_A, f_B, green, times)


@dataclass
class BandEscape:
    n: float
    s: float
    K: int | None
    sup: float
    argmax: tuple
    values: np.ndarray  # per start in D(0, n/2)
    starts: np.ndarray


def band_escape_probability(n, s, dist, K=None) -> BandEscape:
    """sup over x in D(0, n/2) of P^x(leave D(0,n) past the s-band, i.e. T_band > T_{D(0,n+s)^c})."""
    if K is not None and not n + s < K / 4:
        raise GeometryError(f"toral band escape needs n + s < K/4 (n={n}, s={s}, K={K})")
    inner = disc((0, 0), n, K).members()
    band = annulus((0, 0), n, s, K).members()
    sysm = System(inner, dist, K)
    # one-step mass that lands neither in the disc nor in the band lands beyond it
    stay = sysm.Q @ np.ones(len(inner))
    into_band = transition(inner, PointIndex(band, K), dist, K) @ np.ones(len(band))
    beyond = np.clip(1.0 - stay - into_band, 0.0, None)
    h = sysm.solve(beyond)
    starts = disc((0, 0), n / 2, K).members()
    idx = sysm.index.lookup(starts)
    vals = h[idx]
    k = int(np.argmax(vals))
    return BandEscape(n, s, K, float(vals[k]), tuple(int(c) for c in starts[k]), vals, starts)


@dataclass
class ExcursionMean:
    K: int
    r: float
    s: float
    R: float
    mean_tau: float
    mean_sigma: float
    stationary: np.ndarray
    band: np.ndarray
    formula: float  # (2/pi_Gamma) K^2 log(R/r)

    @property
    def ratio(self):
        return self.mean_tau / self.formula


def excursion_mean_exact(K, r, s, R, dist) -> ExcursionMean:
    """Stationary mean excursion length band -> D(0,R)^c -> band on the torus.

    Band entrance points form a Markov chain P = H1 H2 with H1 the exit law
    from D(0,R) and H2 the entrance law into the band. The long-run mean of
    tau over excursions is nu . (E1 + H1 E2) with nu stationary for P."""
    if not r + s <= R:
        raise GeometryError(f"need r + s <= R (r={r}, s={s}, R={R})")
    band = annulus((0, 0), r, s, K).members()
    inside = disc((0, 0), R, K).members()
    allp = torus_points(K)
    outside_idx = PointIndex(inside, K).lookup(allp) < 0
    far = allp[outside_idx]
    band_idx = PointIndex(band, K)
    off_band = allp[band_idx.lookup(allp) < 0]

    # leg 1: from a band point until the far set
    s1 = System(inside, dist, K)
    rows = s1.index.lookup(band)
    E1 = s1.solve(np.ones(len(inside)))[rows]
    Qfar = transition(inside, PointIndex(far, K), dist, K).tocsc()
    hit = np.flatnonzero(np.diff(Qfar.indptr))  # far points reachable in one step
    far = far[hit]
    Qfar = Qfar[:, hit].toarray()
    G1 = s1.solve(np.eye(len(inside))[:, rows])  # columns are unit vectors at band points
    H1 = G1.T @ Qfar  # band x far, using the symmetry of G

    # leg 2: from a far point until the band
    s2 = System(off_band, dist, K, direct_max=BIG_DIRECT)
    E2_all = s2.solve(np.ones(len(off_band)))
    QB = transition(off_band, band_idx, dist, K)
    H2_all = s2.solve(QB.toarray())
    fidx = s2.index.lookup(far)
    E2, H2 = E2_all[fidx], H2_all[fidx]

    P = H1 @ H2
    w, V = np.linalg.eig(P.T)
    k = int(np.argmin(np.abs(w - 1.0)))
    nu = np.real(V[:, k])
    nu = nu / nu.sum()
    mean_sigma = float(nu @ E1)
    mean_tau = float(nu @ (E1 + H1 @ E2))
    formula = 2.0 / dist.pi_gamma * K * K * math.log(R / r)
    return ExcursionMean(K, r, s, R, mean_tau, mean_sigma, nu, band, formula)
