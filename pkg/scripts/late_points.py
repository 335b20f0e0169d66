"""Late-point census: median of log |late set| / log K against 2(1 - alpha)."""
import argparse
import sys
from dataclasses import dataclass, fields

from toruswalk.config import load_config
from toruswalk.experiments import run_experiment


@dataclass
class LateScan:
    walk: str = "srw"
    K: int = 64
    alpha: str = "0.25,0.5,0.75"
    trials: int = 100
    seed: int = 0
    workers: int = 1


def parse(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    for f in fields(LateScan):
        p.add_argument(f"--{f.name}", type=type(f.default), default=f.default)
    return LateScan(**vars(p.parse_args(argv)))


def main(argv=None):
    cfg = load_config(None, dict(vars(parse(argv)), experiment="late"))
    res = run_experiment(cfg)
    print(f"{'alpha':>6} {'median':>8} {'target':>7} {'empty':>6} {'mean count':>11}")
    for a in sorted(cfg.alpha):
        m = res.metric(f"median_exponent_a{a:g}")
        print(f"{a:>6g} {m.estimate:>8.4f} {2 * (1 - a):>7.3f} "
              f"{res.metric(f'empty_a{a:g}').estimate:>6g} {res.metric(f'mean_count_a{a:g}').estimate:>11.2f}")
    print(f"nesting violations {res.metric('nesting_violations').estimate:g}")
    return 0 if res.passed else 1


if __name__ == "__main__":
    sys.exit(main())
