"""toruswalk command line: solve | simulate | verify | export."""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .config import OUT_ENV, ConfigError, load_config, parse_walk
from .geometry import GeometryError, disc, project
from .results import (ExperimentResult, existing_result, metrics_from_csv, metrics_from_json,
                      metrics_to_csv, write_result, _default)
from .steps import DistributionError

VERBS = ("solve", "simulate", "verify", "export")
SUBJECTS = ("green", "hit", "kernel", "escape", "ruin", "harnack", "three-set", "excursions",
            "cover", "late", "successful", "tail", "coupling", "suite")
SOLVE_SUBJECTS = ("green", "hit", "kernel", "escape", "ruin", "harnack", "three-set")
SIMULATE_SUBJECTS = ("excursions", "cover", "late", "successful", "tail", "coupling")

# command-line flag -> config key
FLAG_KEYS = {"walk": "walk", "K": "K", "K_list": "K_list", "r": "r", "R": "R", "s": "s",
             "n": "n", "alpha": "alpha", "a": "a", "a_list": "a_list", "rho": "rho",
             "gamma_bar": "gamma_bar", "trials": "trials", "seed": "seed",
             "excursions": "excursions", "N_list": "N_list", "delta": "delta", "b_list": "b_list",
             "cap_multiplier": "cap_multiplier", "workers": "workers", "out": "out"}


class UsageError(Exception):
    pass


def build_parser():
    p = argparse.ArgumentParser(prog="toruswalk", description=__doc__)
    p.add_argument("verb", help="|".join(VERBS))
    p.add_argument("subject", help="|".join(SUBJECTS))
    p.add_argument("--version", action="version", version=__version__)
    g = p.add_argument_group("global")
    g.add_argument("--config", help="flat key = value config file")
    g.add_argument("--seed", type=int)
    g.add_argument("--trials", type=int)
    g.add_argument("--out", help=f"output root (default ${OUT_ENV} or ./results)")
    g.add_argument("--force", action="store_true", help="re-run even if results exist")
    g.add_argument("--workers", type=int, help="parallelism hint; never changes results")
    g.add_argument("--tolerance", action="append", default=[], metavar="METRIC=VALUE")
    w = p.add_argument_group("walk and geometry")
    w.add_argument("--walk", help="srw | lazy:<eps> | poisson:<lambda>:<K>")
    w.add_argument("--K", type=int)
    w.add_argument("--K-list", dest="K_list")
    w.add_argument("--radius", type=float, help="disc radius for solve subjects")
    w.add_argument("--start", help="start point x,y")
    w.add_argument("--target", help="target point x,y")
    w.add_argument("--points", help="points for kernel: x,y;x,y;...")
    w.add_argument("--r", type=float)
    w.add_argument("--R", type=float)
    w.add_argument("--s", type=float)
    w.add_argument("--n", type=int)
    w.add_argument("--m", type=int, default=2)
    w.add_argument("--setting", default="interior", help="interior | interior-toral | exterior")
    w.add_argument("--alpha")
    w.add_argument("--a", type=float)
    w.add_argument("--a-list", dest="a_list")
    w.add_argument("--rho", type=float)
    w.add_argument("--gamma-bar", dest="gamma_bar", type=float)
    w.add_argument("--excursions", type=int)
    w.add_argument("--N-list", dest="N_list")
    w.add_argument("--delta", type=float)
    w.add_argument("--b-list", dest="b_list")
    w.add_argument("--cap-multiplier", dest="cap_multiplier", type=float)
    v = p.add_argument_group("verify and export")
    v.add_argument("--name", default="core", help="suite name for verify suite")
    v.add_argument("--input", help="metrics.json or summary.csv to convert")
    v.add_argument("--format", choices=("csv", "json"), help="export target format")
    v.add_argument("--output", help="export destination (default stdout)")
    return p


def _point(text, what="point"):
    try:
        x, y = (int(float(t)) for t in str(text).split(","))
    except ValueError:
        raise UsageError(f"bad {what} {text!r}; expected x,y") from None
    return x, y


def _overrides(args):
    out = {}
    for flag, key in FLAG_KEYS.items():
        val = getattr(args, flag, None)
        if val is not None:
            out[key] = val
    for item in args.tolerance:
        if "=" not in item:
            raise UsageError(f"bad --tolerance {item!r}; expected METRIC=VALUE")
        k, v = item.split("=", 1)
        out[f"tol.{k.strip()}"] = v.strip()
    return out


def _print_json(obj):
    print(json.dumps(obj, indent=2, sort_keys=True, default=_default))


# ---------------------------------------------------------------- solve

def _solve(args):
    from . import harnack, partition, potential, solvers
    dist = parse_walk(args.walk or "srw")
    K = args.K
    subj = args.subject
    if subj == "escape":
        _need(args, "radius")
        start = _point(args.start or "0,0")
        dom = disc((0, 0), args.radius, K)
        E, info = solvers.expected_escape_time(dom, dist)
        key = tuple(project(start, K).point) if K else start
        val = E.get(key, 0.0)  # starts outside the disc escape at time 0
        print(repr(val))
        return {"subject": subj, "start": start, "value": val, "residual": info.residual}
    if subj == "green":
        _need(args, "radius")
        start = _point(args.start or "0,0")
        target = _point(args.target or "0,0", "target")
        dom = disc((0, 0), args.radius, K)
        tab = solvers.green_toral(K, dom, dist) if K else solvers.green_internal(dom, dist)
        val = tab.value(start, target)
        print(repr(val))
        return {"subject": subj, "start": start, "target": target, "value": val}
    if subj == "hit":
        _need(args, "radius")
        start = _point(args.start or "1,0")
        val = solvers.hit_point_before_exit(args.radius, start, dist, K)
        print(repr(val))
        return {"subject": subj, "start": start, "value": val}
    if subj == "kernel":
        pts = [_point(t) for t in (args.points or "1,0").split(";") if t]
        tab = potential.potential_kernel(dist, pts)
        for p, v in zip(tab.points, tab.accelerated):
            print(f"{p[0]},{p[1]} {float(v)!r}")
        return {"subject": subj, "values": {f"{p[0]},{p[1]}": float(v)
                                            for p, v in zip(tab.points, tab.accelerated)},
                "J": tab.J, "converged": tab.converged}
    if subj == "ruin":
        _need(args, "r", "R")
        start = _point(args.start or f"{int((args.r * args.R) ** 0.5)},0")
        p_out, p_in = solvers.gamblers_ruin(args.r, args.R, start, dist, K)
        print(f"p_out {p_out!r}\np_in {p_in!r}")
        return {"subject": subj, "start": start, "p_out": p_out, "p_in": p_in}
    if subj == "harnack":
        r = int(args.r or 4)
        res, _ = harnack.harnack_ratio(args.setting, dist, r, args.m, int(args.s or 1), K)
        _print_json(res.as_dict())
        return {"subject": subj, **res.as_dict()}
    if subj == "three-set":
        _need(args, "K", "n", "s")
        q = partition.three_set(*partition.disc_band_partition(K, args.n, args.s), dist, K=K)
        summary = {"holds": q.holds(), **q.summary()}
        _print_json(summary)
        return {"subject": subj, **summary}
    raise UsageError(f"solve does not support subject {subj!r}")


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError(f"{args.verb} {args.subject} needs --{' --'.join(missing)}")


# ---------------------------------------------------------------- simulate

def _simulate(args, argv):
    from .experiments import run_experiment
    over = _overrides(args)
    over["experiment"] = args.subject
    cfg = load_config(args.config, over)
    prev = existing_result(cfg.out, cfg.experiment, cfg.hash())
    if prev and not args.force:
        with open(prev) as fh:
            payload = json.load(fh)
        print(f"# results for this configuration exist at {os.path.dirname(prev)}; "
              "use --force to re-run", file=sys.stderr)
        print(json.dumps(payload, indent=2, sort_keys=True))
        failing = [p["metric"] for p in payload["pass"] if p["passed"] is False]
        return _report(failing)
    res = run_experiment(cfg)
    where = write_result(res, cfg.out, argv, cfg.seed, cfg.workers)
    print(res.to_json(), end="")
    print(f"# written to {where}", file=sys.stderr)
    return _report(res.failures)


def _report(failing):
    if failing:
        print("FAIL: tolerance not met for " + ", ".join(failing), file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------- verify

def _verify(args):
    from .verification import SUBJECT_CHECKS, SUITES, run_checks
    if args.subject == "suite":
        if args.name not in SUITES:
            raise UsageError(f"unknown suite {args.name!r}; choose from {', '.join(SUITES)}")
        keys = SUITES[args.name]
    elif args.subject in SUBJECT_CHECKS:
        keys = SUBJECT_CHECKS[args.subject]
    else:
        raise UsageError(f"verify does not support subject {args.subject!r}")
    seed = 7 if args.seed is None else args.seed
    results = run_checks(keys, seed=seed, workers=args.workers or 8)
    failing = [r.key for r in results if not r.passed]
    print(f"{len(results) - len(failing)}/{len(results)} checks passed")
    return _report(failing)


# ---------------------------------------------------------------- export

def _export(args):
    if not args.input or not args.format:
        raise UsageError("export needs --input and --format")
    src = args.input
    if os.path.isdir(src):
        src = os.path.join(src, "metrics.json")
    with open(src) as fh:
        text = fh.read()
    if src.endswith(".json"):
        metrics = metrics_from_json(json.loads(text))
    else:
        metrics = metrics_from_csv(text)
    if args.format == "csv":
        out = metrics_to_csv(metrics)
    else:
        out = json.dumps({"metrics": [m.to_json() for m in metrics]}, indent=2, sort_keys=True) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(out)
    else:
        print(out, end="")
    return 0


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.verb not in VERBS:
            raise UsageError(f"unknown verb {args.verb!r}; choose from {', '.join(VERBS)}")
        if args.subject not in SUBJECTS:
            raise UsageError(f"unknown subject {args.subject!r}; choose from {', '.join(SUBJECTS)}")
        if args.verb == "solve":
            record = _solve(args)
            if args.out:
                _write_solve(args, argv, record)
            return 0
        if args.verb == "simulate":
            if args.subject not in SIMULATE_SUBJECTS:
                raise UsageError(f"simulate does not support subject {args.subject!r}")
            return _simulate(args, argv)
        if args.verb == "verify":
            return _verify(args)
        return _export(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ConfigError, GeometryError, DistributionError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def _write_solve(args, argv, record):
    cfg = load_config(args.config, {k: v for k, v in _overrides(args).items()
                                    if not k.startswith("tol.")} | {"experiment": f"solve-{args.subject}"})
    res = ExperimentResult(cfg.experiment, cfg.payload_dict(), [], details=record,
                           config_hash=cfg.hash())
    where = write_result(res, args.out, argv, cfg.seed, cfg.workers)
    print(f"# written to {where}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
