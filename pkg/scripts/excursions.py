"""Excursion counts between a thin band and a far set: Monte Carlo against the exact mean."""
import argparse
import sys
from dataclasses import dataclass, fields

from toruswalk.config import load_config
from toruswalk.experiments import run_experiment
from toruswalk.partition import excursion_mean_exact


@dataclass
class ExcursionScan:
    walk: str = "srw"
    K: int = 240
    r: float = 8.0
    s: float = 1.0
    R: float = 10.0
    trials: int = 50
    excursions: int = 1000
    N_list: str = "125,250,500,1000"
    delta: float = 0.3
    seed: int = 0
    workers: int = 1
    exact_only: bool = False


def parse(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    for f in fields(ExcursionScan):
        flag = f"--{f.name.replace('_', '-')}"
        if isinstance(f.default, bool):
            p.add_argument(flag, dest=f.name, action="store_true")
        else:
            p.add_argument(flag, dest=f.name, type=type(f.default), default=f.default)
    return ExcursionScan(**vars(p.parse_args(argv)))


def main(argv=None):
    scan = parse(argv)
    cfg = load_config(None, {k: v for k, v in vars(scan).items() if k != "exact_only"}
                      | {"experiment": "excursions"})
    ex = excursion_mean_exact(cfg.K, cfg.r, cfg.s, cfg.R, cfg.dist())
    print(f"exact mean tau {ex.mean_tau:.3f}, formula {ex.formula:.3f}, ratio {ex.ratio:.5f}")
    if scan.exact_only:
        return 0
    res = run_experiment(cfg)
    for m in res.metrics:
        print(f"{m.name:>22} {m.estimate: .6g} +- {m.stderr:.3g}"
              + ("" if m.passed is None else f"  {'pass' if m.passed else 'FAIL'}"))
    for N, p, se in res.series[f"deviation_prob_delta_{cfg.delta:g}"]:
        print(f"N={N:>6}  P(|S_N/N - 1| > {cfg.delta:g}) = {p:.4f} +- {se:.4f}")
    return 0 if res.passed else 1


if __name__ == "__main__":
    sys.exit(main())
