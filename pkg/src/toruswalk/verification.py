"""Acceptance battery. Each check returns a CheckResult; the test suite and the
``verify`` command share these functions."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .config import load_config
from .experiments import run_experiment
from .geometry import disc
from .harnack import harnack_ratio
from .partition import disc_band_partition, three_set
from .potential import SRW_CONSTANT, potential_kernel
from .solvers import (System, expected_escape_time, gamblers_ruin, gamblers_ruin_table,
                      green_internal, hit_point_before_exit)
from .steps import build_poisson_jump, build_srw


@dataclass
class CheckResult:
    key: str
    title: str
    passed: bool
    summary: str
    runtime: float = 0.0
    limit: float | None = None  # seconds
    data: dict = field(default_factory=dict)

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.key} {self.title}: {self.summary} ({self.runtime:.1f}s)"


def _timed(key, title, limit, fn):
    t0 = time.perf_counter()
    ok, summary, data = fn()
    dt = time.perf_counter() - t0
    if limit is not None and dt > limit:
        ok = False
        summary += f"; runtime {dt:.1f}s over the {limit:.0f}s limit"
    return CheckResult(key, title, bool(ok), summary, dt, limit, data)


# ---------------------------------------------------------------- 1-7: exact solves

def check_exact_oracles():
    def run():
        srw = build_srw()
        D2 = disc((0, 0), 2)
        E, _ = expected_escape_time(D2, srw)
        G = green_internal(D2, srw).value((0, 0), (0, 0))
        P = hit_point_before_exit(2, (1, 0), srw)
        errs = {"escape": abs(E[(0, 0)] - 4.5), "green": abs(G - 1.5), "hit": abs(P - 1 / 3)}
        ok = all(v <= 1e-10 for v in errs.values())
        return ok, f"E={E[(0, 0)]!r} G={G!r} P={P!r}", errs
    return _timed("C1", "exact oracles", 10, run)


def check_escape_bounds(ns=(8, 16, 32)):
    def run():
        srw = build_srw()
        bad, total = 0, 0
        worst = -math.inf
        for n in ns:
            E, _ = expected_escape_time(disc((0, 0), n), srw)
            for x, e in E.items():
                base = (n * n - x[0] ** 2 - x[1] ** 2) / srw.gamma_sq
                total += 1
                if not base <= e <= base + 2 * n + 1:
                    bad += 1
                worst = max(worst, e - base - 2 * n - 1, base - e)
        return bad == 0, f"{bad} violations over {total} starts", {"violations": bad, "starts": total}
    return _timed("C2", "escape-time bounds", 60, run)


def green_at_origin(n, dist):
    sysm = System(disc((0, 0), n).members(), dist)
    return float(sysm.solve(sysm.unit((0, 0)))[sysm.index.index_of((0, 0))])


def check_green_asymptotics(ns=(32, 64, 128, 256), tol=0.02):
    def run():
        srw = build_srw()
        diffs = [green_at_origin(n, srw) - 2 / math.pi * math.log(n) for n in ns]
        steps = np.abs(np.diff(diffs))
        stabilizes = bool(np.all(steps[1:] < steps[:-1]))
        # constant fit with a 1/n correction
        X = np.stack([np.ones(len(ns)), 1.0 / np.asarray(ns, float)], axis=1)
        C = float(np.linalg.lstsq(X, np.asarray(diffs), rcond=None)[0][0])
        ok = stabilizes and abs(C - SRW_CONSTANT) <= tol
        return ok, (f"G-(2/pi)log n = {', '.join(f'{d:.5f}' for d in diffs)}; "
                    f"fitted {C:.5f} vs {SRW_CONSTANT:.5f}"), {"diffs": diffs, "fitted": C}
    return _timed("C3", "Green asymptotics", 300, run)


def check_potential_kernel(radius=20):
    def run():
        srw = build_srw()
        pts = [(i, j) for i in range(-radius, radius + 1) for j in range(-radius, radius + 1)
               if i * i + j * j <= radius * radius]
        tab = potential_kernel(srw, pts)
        vals = tab.as_dict()
        a1 = vals[(1, 0)]
        sym = max(abs(v - vals[(-p[0], -p[1])]) for p, v in vals.items())
        ok = abs(a1 - 1.0) <= 1e-3 and sym <= 1e-6 and vals[(0, 0)] == 0.0
        return ok, f"a(e1)={a1:.9f} symmetry {sym:.1e} J={tab.J}", {"a_e1": a1, "symmetry": sym}
    return _timed("C4", "potential kernel", 120, run)


def check_gamblers_ruin(r=8, R=64, start=(16, 16)):
    def run():
        srw = build_srw()
        p_out, p_in = gamblers_ruin(r, R, start, srw)
        rel = abs(p_in - 0.5) / 0.5
        tab = gamblers_ruin_table(r, R, srw)
        sweep = [tab.at((k, 0))[1] for k in range(r, R)]
        monotone = all(b <= a for a, b in zip(sweep, sweep[1:]))
        ok = rel <= 0.06 and monotone and abs(p_in + p_out - 1) <= 1e-9
        return ok, f"p_in={p_in:.5f} ({100 * rel:.2f}% from 1/2), sweep monotone={monotone}", \
            {"p_in": p_in, "rel": rel, "monotone": monotone}
    return _timed("C5", "gambler's ruin", 60, run)


def check_harnack_trend(r=4, ms=(2, 4, 8)):
    def run():
        srw = build_srw()
        out = {}
        for setting in ("interior", "exterior"):
            out[setting] = [harnack_ratio(setting, srw, r, m)[0].deviation for m in ms]
        ok = all(all(b < a for a, b in zip(v, v[1:])) for v in out.values())
        text = "; ".join(f"{k} " + ", ".join(f"{d:.4f}" for d in v) for k, v in out.items())
        return ok, text, out
    return _timed("C6", "Harnack trend", 600, run)


def check_three_set(K=48, n=8, s=3):
    def run():
        res = {}
        for name, dist in (("srw", build_srw()), ("poisson", build_poisson_jump(0.3, 3))):
            q = three_set(*disc_band_partition(K, n, s), dist, K=K)
            res[name] = {"holds": q.holds(), **q.summary()}
        ok = all(v["holds"] for v in res.values())
        return ok, ", ".join(f"{k}: holds={v['holds']} psi={v['psi']:.3g}" for k, v in res.items()), res
    return _timed("C7", "three-set sandwich", 300, run)


# ---------------------------------------------------------------- 8-12: Monte Carlo

ACCEPTANCE_RUNS = {
    "C8": [dict(experiment="coupling", walk="srw", K=48, n=8, s=3, trials=10_000),
           dict(experiment="coupling", walk="poisson:0.3:7", K=49, n=8, s=3, trials=10_000)],
    "C9": [dict(experiment="excursions", walk="srw", K=240, r=8, s=1, R=10, trials=200,
                excursions=2000, N_list=(250, 500, 1000, 2000), delta=0.3)],
    "C10": [dict(experiment="cover", walk="srw", K_list=(32, 64, 128), trials=500)],
    "C11": [dict(experiment="late", walk="srw", K=128, alpha=(0.25, 0.5, 0.75), trials=500)],
}
_CACHE = {}


def _run(spec, seed, workers):
    cfg = load_config(None, dict(spec, seed=seed, workers=workers))
    key = (cfg.hash(), workers)
    if key not in _CACHE:
        _CACHE[key] = run_experiment(cfg)
    return _CACHE[key]


def _mc_check(key, title, limit, seed, workers, describe):
    def run():
        results = [_run(spec, seed, workers) for spec in ACCEPTANCE_RUNS[key]]
        failures = [f"{r.config['walk']}:{m}" for r in results for m in r.failures]
        return not failures, describe(results) + (f"; failing {failures}" if failures else ""), \
            {"payloads": [r.payload() for r in results]}
    return _timed(key, title, limit, run)


def check_coupling(seed=7, workers=1):
    def describe(rs):
        return ", ".join(f"{r.config['walk']}: chain {r.metric('chain_violations').estimate}, "
                         f"pullback {r.metric('pullback_violations').estimate} "
                         f"(censored {r.metric('chain_violations').censored})" for r in rs)
    return _mc_check("C8", "toral/planar coupling", None, seed, workers, describe)


def check_excursions(seed=7, workers=1):
    def describe(rs):
        r = rs[0]
        m = r.metric("mean_ratio")
        return (f"mean ratio {m.estimate:.4f}+-{m.stderr:.4f} (band {m.lo:.2f}..{m.hi:.2f}, "
                f"exact {r.metric('exact_ratio').estimate:.4f}); "
                f"deviation slope {r.metric('deviation_log_slope').estimate:.2e}")
    return _mc_check("C9", "excursion concentration", 1200, seed, workers, describe)


def check_cover(seed=7, workers=1):
    def describe(rs):
        r = rs[0]
        Ks = r.config["K_list"]
        return ("mean/(4/pi) " + ", ".join(f"{r.metric(f'mean_over_limit_K{K}').estimate:.3f}" for K in Ks)
                + "; spread " + ", ".join(f"{r.metric(f'spread_K{K}').estimate:.3f}" for K in Ks))
    return _mc_check("C10", "cover-time scaling", 7200, seed, workers, describe)


def check_late(seed=7, workers=1):
    def describe(rs):
        r = rs[0]
        return "median exponents " + ", ".join(
            f"{r.metric(f'median_exponent_a{a:g}').estimate:.3f}" for a in r.config["alpha"]) + \
            f"; nesting violations {r.metric('nesting_violations').estimate}"
    return _mc_check("C11", "late-point exponent", 7200, seed, workers, describe)


def check_determinism(seed=7, workers=8):
    def run():
        diffs = []
        for key in ("C8", "C9", "C10", "C11"):
            for spec in ACCEPTANCE_RUNS[key]:
                a = _run(spec, seed, 1).to_json()
                b = _run(spec, seed, workers).to_json()
                if a != b:
                    diffs.append(f"{key}:{spec['experiment']}:{spec['walk']}")
        n = sum(len(v) for v in ACCEPTANCE_RUNS.values())
        return not diffs, f"{n - len(diffs)}/{n} payloads byte-identical (workers 1 vs {workers})", \
            {"differences": diffs}
    return _timed("C12", "determinism", None, run)


CHECKS = {
    "C1": check_exact_oracles,
    "C2": check_escape_bounds,
    "C3": check_green_asymptotics,
    "C4": check_potential_kernel,
    "C5": check_gamblers_ruin,
    "C6": check_harnack_trend,
    "C7": check_three_set,
    "C8": check_coupling,
    "C9": check_excursions,
    "C10": check_cover,
    "C11": check_late,
    "C12": check_determinism,
}
SEEDED = {"C8", "C9", "C10", "C11", "C12"}
SUITES = {
    "core": list(CHECKS),
    "exact": ["C1", "C2", "C3", "C4", "C5", "C6", "C7"],
    "monte-carlo": ["C8", "C9", "C10", "C11", "C12"],
}
# verify <subject> runs the criteria that exercise that subject
SUBJECT_CHECKS = {
    "escape": ["C1", "C2"], "green": ["C1", "C3"], "hit": ["C1"], "kernel": ["C4"],
    "ruin": ["C5"], "harnack": ["C6"], "three-set": ["C7"], "coupling": ["C8"],
    "excursions": ["C9"], "cover": ["C10"], "late": ["C11"],
}


def run_checks(keys, seed=7, workers=8, echo=print):
    out = []
    for k in keys:
        fn = CHECKS[k]
        if k == "C12":
            res = fn(seed=seed, workers=workers)
        elif k in SEEDED:
            res = fn(seed=seed)
        else:
            res = fn()
        if echo:
            echo(res.line())
        out.append(res)
    return out
