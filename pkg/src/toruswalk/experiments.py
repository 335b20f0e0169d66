"""Monte Carlo experiment suites.

Each experiment maps a per-trial function over trial indices; trial i always
draws from trial_rng(seed, i), so results do not depend on the worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from functools import partial

import numpy as np

from .config import ConfigError, ExperimentConfig
from .geometry import GeometryError, LevelStructure, build_levels, disc, project
from .partition import excursion_mean_exact
from .results import ExperimentResult, Metric
from .walks import (WalkState, StepStream, census_levels, coupled_run, cover_cap, cover_run,
                    decompose_excursions, late_threshold, trial_rng)


# ---------------------------------------------------------------- plumbing

def map_trials(fn, trials, workers=1):
    if workers <= 1 or trials <= 1:
        return [fn(i) for i in range(trials)]
    chunk = max(1, math.ceil(trials / (4 * workers)))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, range(trials), chunksize=chunk))


def mean_se(values):
    v = np.asarray(values, dtype=float)
    if len(v) == 0:
        return math.nan, math.nan
    if len(v) == 1:
        return float(v[0]), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v)))


def fit_line(x, y, w=None):
    """Weighted least squares y = c0 + c1 x; returns (c1, se(c1))."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    w = np.ones_like(x) if w is None else np.asarray(w, float)
    if len(x) < 2:
        return math.nan, math.nan
    X = np.stack([np.ones_like(x), x], axis=1)
    W = np.diag(w)
    cov = np.linalg.pinv(X.T @ W @ X)
    beta = cov @ X.T @ W @ y
    if len(x) > 2:
        res = y - X @ beta
        s2 = float(res @ W @ res) / (len(x) - 2)
        se = math.sqrt(max(s2 * cov[1, 1], 0.0))
    else:
        se = math.nan
    return float(beta[1]), se


def _result(cfg: ExperimentConfig, name, metrics, series=None, details=None):
    return ExperimentResult(name, cfg.payload_dict(), metrics, series or {}, details or {},
                            cfg.hash())


def _count_decreases_violated(values):
    """Number of consecutive pairs that fail to strictly decrease."""
    return int(sum(1 for a, b in zip(values, values[1:]) if not b < a))


# ---------------------------------------------------------------- coupling

def _coupling_trial(K, n, s, dist, seed, cap, trial):
    rng = trial_rng(seed, trial)
    pts = disc((0, 0), n).members()
    start = tuple(int(c) for c in pts[rng.integers(len(pts))])
    state = WalkState(start, StepStream(dist, rng))
    rec = coupled_run(state, K, n, s, cap)
    censored = any(t is None for t in rec.times.values())
    return bool(rec.chain_holds), bool(rec.pullback_equal), censored, \
        rec.times["planar_band"] != rec.times["pullback_band"]


def coupling_check(cfg: ExperimentConfig) -> ExperimentResult:
    K, n, s = cfg.K, cfg.n, cfg.s
    if not n + s < K / 4:
        raise GeometryError(f"n + s < K/4 violated (n={n}, s={s}, K={K})")
    dist = cfg.dist()
    fn = partial(_coupling_trial, K, n, s, dist, cfg.seed, cfg.coupling_cap)
    rows = map_trials(fn, cfg.trials, cfg.workers)
    chain_bad = sum(1 for r in rows if not r[0])
    pull_bad = sum(1 for r in rows if not r[1])
    censored = sum(1 for r in rows if r[2])
    strict = sum(1 for r in rows if r[3])
    metrics = [
        Metric("chain_violations", chain_bad, 0.0, cfg.trials, censored,
               hi=cfg.tol("chain_violations", 0.0)),
        Metric("pullback_violations", pull_bad, 0.0, cfg.trials, censored,
               hi=cfg.tol("pullback_violations", 0.0)),
        Metric("planar_before_pullback", strict, 0.0, cfg.trials, censored),
    ]
    return _result(cfg, "coupling", metrics)


# ---------------------------------------------------------------- excursions

def _excursion_trial(K, r, s, R, dist, seed, count, trial):
    state = WalkState.toral(dist, trial_rng(seed, trial), K)
    rec = decompose_excursions((0, 0), r, s, R, state, count, enforce_far_bound=True)
    return int(rec.tau0), rec.tau


def excursion_formula(K, r, R, dist):
    return 2.0 / dist.pi_gamma * K * K * math.log(R / r)


def excursion_concentration(cfg: ExperimentConfig, exact_max_K=512) -> ExperimentResult:
    K, r, s, R = cfg.K, cfg.r, cfg.s, cfg.R
    if not R <= K / 24:
        raise GeometryError(f"R <= K/24 violated (R={R}, K={K})")
    if not r + s <= R:
        raise GeometryError(f"r + s <= R violated (r={r}, s={s}, R={R})")
    if max(cfg.N_list) > cfg.excursions:
        raise ConfigError("every N in N_list must be at most excursions")
    dist = cfg.dist()
    formula = excursion_formula(K, r, R, dist)
    fn = partial(_excursion_trial, K, r, s, R, dist, cfg.seed, cfg.excursions)
    rows = map_trials(fn, cfg.trials, cfg.workers)
    tau0 = np.array([t0 for t0, _ in rows], dtype=float)
    taus = np.stack([t for _, t in rows]).astype(float)

    eta = cfg.tol("eta", 0.15)
    ratio, ratio_se = mean_se(taus.mean(axis=1) / formula)
    metrics = [Metric("mean_ratio", ratio, ratio_se, cfg.trials, 0, lo=1 - eta, hi=1 + eta),
               Metric("eta_min", abs(ratio - 1.0), ratio_se, cfg.trials)]

    # S_N = sum_{j=0}^{N} tau^(j), the initial hitting leg included
    cums = np.cumsum(taus, axis=1)
    series = {}
    details = {"formula": formula, "delta": cfg.delta, "N": list(cfg.N_list)}
    for delta in sorted({0.0, cfg.delta}):
        pts = []
        for N in cfg.N_list:
            S = (tau0 + cums[:, N - 1]) / (N * formula)
            p = float(np.mean(np.abs(S - 1.0) > delta)) if delta > 0 else float(np.mean(S != 1.0))
            pts.append((N, p, math.sqrt(p * (1 - p) / cfg.trials)))
        series[f"deviation_prob_delta_{delta:g}"] = pts
    main = series[f"deviation_prob_delta_{cfg.delta:g}"]
    live = [(N, p, se) for N, p, se in main if p > 0]
    if len(live) >= 2:
        x = [N for N, _, _ in live]
        y = [math.log(p) for _, p, _ in live]
        w = [p * cfg.trials / max(1 - p, 1e-12) for _, p, _ in live]
        slope, slope_se = fit_line(x, y, w)
    else:
        slope, slope_se = math.nan, math.nan
    metrics.append(Metric("deviation_log_slope", slope, slope_se if slope_se == slope_se else 0.0,
                          cfg.trials, len(main) - len(live), hi=cfg.tol("deviation_log_slope", 0.0)))
    zero_width = series["deviation_prob_delta_0"][-1][1]
    metrics.append(Metric("zero_width_prob", zero_width, 0.0, cfg.trials))
    if slope == slope and cfg.delta > 0:
        rate = -slope / (cfg.delta ** 2 * math.log(R / r) / math.log(K / r))
        metrics.append(Metric("fitted_C", rate, 0.0, cfg.trials))
    if K <= exact_max_K:
        ex = excursion_mean_exact(K, r, s, R, dist)
        z = (ratio - ex.ratio) / ratio_se if ratio_se > 0 else math.nan
        metrics.append(Metric("exact_ratio", ex.ratio, 0.0, 1))
        metrics.append(Metric("mc_vs_exact_z", z, 0.0, cfg.trials))
        details["exact_mean_tau"] = ex.mean_tau
        details["exact_mean_sigma"] = ex.mean_sigma
    return _result(cfg, "excursions", metrics, series, details)


# ---------------------------------------------------------------- cover, tail and late points

def _cover_trial(K, dist, seed, cap_multiplier, alphas, bs, trial):
    res = cover_run(K, dist, trial_rng(seed, trial), cap_multiplier)
    vt = res.visit_times
    unvisited = vt < 0
    scale = (K * math.log(K)) ** 2
    out = {"T": res.cover_time, "censored": res.censored}
    # lateness masks; unvisited points count as late only below the cap
    late, nested, prev = [], True, None
    for a in alphas:
        thr = late_threshold(K, a, dist.pi_gamma)
        if unvisited.any() and thr > res.cap:
            late.append(None)
            prev = None
            continue
        mask = (vt >= thr) | unvisited
        if prev is not None and np.any(mask & ~prev):
            nested = False
        prev = mask
        late.append(int(mask.sum()))
    out["late"] = late
    out["nested"] = nested
    tail = []
    others = K * K - 1
    for b in bs:
        thr = b * scale
        if unvisited.any() and thr > res.cap:
            tail.append(None)
        else:
            # the start point (time 0) is excluded; it is late only for b = 0
            hit = int(np.sum((vt >= thr) | unvisited)) - (1 if thr <= 0 else 0)
            tail.append(hit / others)
    out["tail"] = tail
    return out


def _cover_rows(cfg, K, alphas=(), bs=()):
    dist = cfg.dist()
    fn = partial(_cover_trial, K, dist, cfg.seed, cfg.cap_multiplier, tuple(alphas), tuple(bs))
    return dist, map_trials(fn, cfg.trials, cfg.workers)


def cover_scaling(cfg: ExperimentConfig) -> ExperimentResult:
    Ks = list(cfg.K_list)
    if Ks != sorted(Ks) or len(set(Ks)) != len(Ks):
        raise ConfigError("K_list must be strictly ascending")
    dist = cfg.dist()
    target = 4.0 / dist.pi_gamma
    lo_f, hi_f = cfg.tol("band_lo", 0.6), cfg.tol("band_hi", 1.2)
    metrics, means, spreads = [], [], []
    for K in Ks:
        _, rows = _cover_rows(cfg, K)
        vals = np.array([row["T"] / (K * math.log(K)) ** 2 for row in rows])
        cens = sum(1 for row in rows if row["censored"])
        m, se = mean_se(vals)
        sd = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        means.append((K, m, se))
        spreads.append((K, sd, sd / math.sqrt(2 * max(len(vals) - 1, 1))))
        metrics.append(Metric(f"mean_K{K}", m, se, len(vals), cens, lo=lo_f * target, hi=hi_f * target))
        metrics.append(Metric(f"spread_K{K}", sd, spreads[-1][2], len(vals), cens))
        metrics.append(Metric(f"mean_over_limit_K{K}", m / target, se / target, len(vals), cens))
    metrics.append(Metric("spread_not_shrinking", _count_decreases_violated([s for _, s, _ in spreads]),
                          0.0, cfg.trials, 0, hi=cfg.tol("spread_not_shrinking", 0.0)))
    return _result(cfg, "cover", metrics, {"cover_mean": means, "cover_spread": spreads},
                   {"limit": target})


def late_point_census(cfg: ExperimentConfig) -> ExperimentResult:
    K = cfg.K
    alphas = tuple(sorted(cfg.alpha))
    dist, rows = _cover_rows(cfg, K, alphas=alphas)
    band = cfg.tol("exponent_band", 0.35)
    metrics, medians, series = [], [], []
    cens = sum(1 for row in rows if row["censored"])
    for i, a in enumerate(alphas):
        counts = [row["late"][i] for row in rows if row["late"][i] is not None]
        ex = np.array([math.log(c) / math.log(K) if c > 0 else -math.inf for c in counts])
        finite = ex[np.isfinite(ex)]
        empty = int(np.sum(~np.isfinite(ex)))
        med = float(np.median(finite)) if len(finite) else -math.inf
        # stderr of the median from the normal approximation
        se = float(1.2533 * finite.std(ddof=1) / math.sqrt(len(finite))) if len(finite) > 1 else 0.0
        medians.append(med)
        series.append((a, med, se))
        want = 2 * (1 - a)
        metrics.append(Metric(f"median_exponent_a{a:g}", med, se, len(finite), cens,
                              lo=want - band, hi=want + band))
        metrics.append(Metric(f"empty_a{a:g}", empty, 0.0, len(counts), cens))
        metrics.append(Metric(f"mean_count_a{a:g}", float(np.mean(counts)) if counts else math.nan,
                              mean_se(counts)[1] if counts else 0.0, len(counts), cens))
    metrics.append(Metric("median_not_decreasing", _count_decreases_violated(medians), 0.0,
                          cfg.trials, 0, hi=0.0))
    metrics.append(Metric("nesting_violations", sum(1 for row in rows if not row["nested"]), 0.0,
                          cfg.trials, cens, hi=0.0))
    return _result(cfg, "late", metrics, {"late_exponent": series},
                   {"thresholds": [late_threshold(K, a, dist.pi_gamma) for a in alphas]})


def hitting_tail(cfg: ExperimentConfig) -> ExperimentResult:
    K = cfg.K
    bs = tuple(sorted(cfg.b_list))
    dist, rows = _cover_rows(cfg, K, bs=bs)
    series, metrics = [], []
    probs = []
    for i, b in enumerate(bs):
        vals = [row["tail"][i] for row in rows if row["tail"][i] is not None]
        p, se = mean_se(vals)
        probs.append(p)
        series.append((b, p, se))
        metrics.append(Metric(f"tail_b{b:.6g}", p, se, len(vals), cfg.trials - len(vals)))
    live = [(b, p, se) for b, p, se in series if p > 0 and b > 0]
    x = [b * math.log(K) for b, _, _ in live]
    y = [math.log(p) for _, p, _ in live]
    w = [(p / se) ** 2 if se > 0 else 1.0 for _, p, se in live]
    slope, slope_se = fit_line(x, y, w)
    half = dist.pi_gamma / 2
    lo, hi = -half * cfg.tol("slope_hi_factor", 1.25), -half * cfg.tol("slope_lo_factor", 0.5)
    metrics.append(Metric("log_tail_slope", slope, slope_se if slope_se == slope_se else 0.0,
                          cfg.trials, len(series) - len(live), lo=lo, hi=hi))
    metrics.append(Metric("tail_not_decreasing",
                          int(sum(1 for a, b in zip(probs, probs[1:]) if b > a)), 0.0, cfg.trials,
                          0, hi=0.0))
    return _result(cfg, "tail", metrics, {"tail_probability": series})


# ---------------------------------------------------------------- Paley-Zygmund

def paley_zygmund_check(values, lam):
    """P(W >= lam E W) >= (1 - lam)^2 (E W)^2 / E W^2 on an empirical sample."""
    if not 0 < lam < 1:
        raise ValueError("lambda must lie in (0, 1)")
    w = np.asarray(values, dtype=float)
    if np.any(w < 0):
        raise ValueError("sample must be non-negative")
    if len(w) == 0 or not np.any(w > 0):
        raise ValueError("degenerate all-zero sample")
    w = w / w.max()  # both sides are scale invariant; this avoids underflow in E W^2
    m1, m2 = float(w.mean()), float(np.mean(w * w))
    lhs = float(np.mean(w >= lam * m1))
    rhs = (1 - lam) ** 2 * m1 * m1 / m2
    sigma = math.sqrt(max(lhs * (1 - lhs), 1e-300) / len(w))
    return {"lhs": lhs, "rhs": rhs, "holds": lhs >= rhs, "sigma": sigma,
            "z": (lhs - rhs) / sigma if sigma > 0 else math.inf,
            "flag": lhs < rhs - 4 * sigma, "n": len(w)}


# ---------------------------------------------------------------- n-successful points

def binomial_term(m, l):
    """binom(m + l, l) 2^-(m + l + 1), through log-gamma."""
    lg = math.lgamma(m + l + 1) - math.lgamma(m + 1) - math.lgamma(l + 1)
    return math.exp(lg - (m + l + 1) * math.log(2))


def combinatorial_sandwich(a, ks=range(10, 101)):
    """Range of binom(m+l, l) 2^-(m+l+1) / (k^(-3a-1) / sqrt(log k)) over the windows
    |m - v_{k+1}| <= k + 1, |l + 1 - v_k| <= k, with v_k = 3 a k^2 log k."""
    lo, hi = math.inf, 0.0
    per_k = []
    for k in ks:
        v_k = 3 * a * k * k * math.log(k)
        v_k1 = 3 * a * (k + 1) ** 2 * math.log(k + 1)
        ref = k ** (-3 * a - 1) / math.sqrt(math.log(k))
        ms = range(math.ceil(v_k1 - (k + 1)), math.floor(v_k1 + (k + 1)) + 1)
        ls = range(math.ceil(v_k - k - 1), math.floor(v_k + k - 1) + 1)
        klo, khi = math.inf, 0.0
        for m in ms:
            for l in ls:
                q = binomial_term(m, l) / ref
                klo, khi = min(klo, q), max(khi, q)
        per_k.append((k, klo, khi))
        lo, hi = min(lo, klo), max(hi, khi)
    # smallest C with every value in [1/C, C] times the reference
    C = max(hi, 1.0 / lo)
    # drift of the band centre in log-log; a wrong power of k shows up as |slope| ~ 1
    drift, _ = fit_line([math.log(k) for k, _, _ in per_k],
                        [0.5 * math.log(a * b) for _, a, b in per_k])
    return {"C": C, "lo": lo, "hi": hi, "drift": drift, "per_k": per_k}


def upcrossing_probabilities(levels: LevelStructure):
    """a_{l+1}, b_l from the logarithmic ruin formula at the level radii.

    For a start x in the band [r_l, r_l + s_l):
      a_{l+1} = log(|x| / r'_{l-1}) / log(r_{l+1} / r'_{l-1}),  b_l = 1 - a_{l+1},
    with r'_k = r_k + s_k. Lattice corrections to this formula are O(r^{-1/4})
    at these radii. Returns the extreme values over x in the band."""
    lr = levels.log_radii
    out = []
    for l in range(max(levels.lowest_level - 1, 1), levels.n):
        lprime = math.log(math.exp(lr[l - 1]) + levels.widths[l - 1]) if lr[l - 1] < 700 else lr[l - 1]
        span = lr[l + 1] - lprime
        x_lo = lr[l]
        x_hi = math.log(math.exp(lr[l]) + levels.widths[l]) if lr[l] < 700 else lr[l]
        a_vals = ((x_lo - lprime) / span, (x_hi - lprime) / span)
        out.append({"l": l, "a_min": min(a_vals), "a_max": max(a_vals),
                    "b_min": 1 - max(a_vals), "b_max": 1 - min(a_vals)})
    return out


def desk_levels(K, a, radii=(3, 6, 12, 24), width=1.0):
    n = len(radii) - 1
    v = {k: 3 * a * k * k * math.log(k) for k in range(2, n + 1)}
    return LevelStructure.custom(radii, [width] * (n + 1), K, v, lowest_level=2, a=a)


def _census_trial(K, a, radii, dist, seed, trial):
    levels = desk_levels(K, a, radii)
    state = WalkState.toral(dist, trial_rng(seed, trial), K)
    centre = project((K // 2, K // 2), K)  # antipode of the start
    rec = census_levels(centre, levels, state)
    return bool(rec.successful)


def successful_rate(cfg: ExperimentConfig, desk_radii=(3, 6, 12, 24)) -> ExperimentResult:
    n = cfg.n
    metrics, details = [], {}
    levels = build_levels(n, cfg.a, cfg.rho, cfg.gamma_bar)
    log10_K = math.log10(levels.K)
    details["K_n"] = str(levels.K)
    metrics.append(Metric("log10_K_n", log10_K, 0.0, 1))
    if levels.K > cfg.max_K:
        details["full_construction"] = (f"rejected: K_n = {levels.K} exceeds max_K = {cfg.max_K}; "
                                        "only the combinatorial and ruin sub-checks run")
    # upcrossing probabilities at the construction's radii
    ups = upcrossing_probabilities(levels)
    dev_a = max(max(abs(u["a_min"] - 0.5), abs(u["a_max"] - 0.5)) for u in ups)
    dev_b = max(max(abs(u["b_min"] - 0.5), abs(u["b_max"] - 0.5)) for u in ups)
    bound = cfg.tol("upcrossing_dev", n ** -2.0)
    metrics.append(Metric("upcrossing_a_dev", dev_a, 0.0, len(ups), hi=bound))
    metrics.append(Metric("downcrossing_b_dev", dev_b, 0.0, len(ups), hi=bound))
    details["upcrossings"] = ups
    # combinatorial sandwich per a
    series = []
    for a in cfg.a_list:
        sw = combinatorial_sandwich(a)
        metrics.append(Metric(f"sandwich_C_a{a:g}", sw["C"], 0.0, len(sw["per_k"])))
        drift_tol = cfg.tol("sandwich_drift", 0.5)
        metrics.append(Metric(f"sandwich_drift_a{a:g}", sw["drift"], 0.0, len(sw["per_k"]),
                              lo=-drift_tol, hi=drift_tol))
        series.append((a, sw["C"], 0.0))
    # desk-scale frequency with explicit small radii (informational only)
    dist = cfg.dist()
    freq = []
    for a in cfg.a_list:
        fn = partial(_census_trial, cfg.K, a, tuple(desk_radii), dist, cfg.seed)
        hits = map_trials(fn, cfg.trials, cfg.workers)
        p = float(np.mean(hits))
        se = math.sqrt(p * (1 - p) / cfg.trials)
        freq.append((a, p, se))
        metrics.append(Metric(f"desk_frequency_a{a:g}", p, se, cfg.trials))
    metrics.append(Metric("desk_frequency_increases", int(sum(1 for x, y in zip(freq, freq[1:])
                                                              if y[1] > x[1])), 0.0, cfg.trials))
    details["desk_radii"] = list(desk_radii)
    return _result(cfg, "successful", metrics,
                   {"sandwich_C": series, "desk_frequency": freq}, details)


EXPERIMENTS = {
    "coupling": coupling_check,
    "excursions": excursion_concentration,
    "cover": cover_scaling,
    "late": late_point_census,
    "tail": hitting_tail,
    "successful": successful_rate,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    try:
        fn = EXPERIMENTS[cfg.experiment]
    except KeyError:
        raise ConfigError(f"unknown experiment {cfg.experiment!r}") from None
    return fn(cfg)
