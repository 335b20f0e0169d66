"""Cover-time scaling T_cov / (K log K)^2 over a ladder of torus sizes."""
import argparse
import sys
from dataclasses import dataclass, fields

from toruswalk.config import load_config
from toruswalk.experiments import run_experiment
from toruswalk.results import write_result


@dataclass
class CoverScan:
    walk: str = "srw"
    K_list: str = "16,32,64"
    trials: int = 100
    seed: int = 0
    workers: int = 1
    out: str = "results"


def parse(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    for f in fields(CoverScan):
        p.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, type=type(f.default),
                       default=f.default)
    return CoverScan(**vars(p.parse_args(argv)))


def main(argv=None):
    scan = parse(argv)
    cfg = load_config(None, dict(vars(scan), experiment="cover"))
    res = run_experiment(cfg)
    limit = res.details["limit"]
    print(f"{'K':>6} {'mean':>10} {'stderr':>9} {'mean/limit':>11} {'spread':>8}")
    for K in cfg.K_list:
        m = res.metric(f"mean_K{K}")
        print(f"{K:>6} {m.estimate:>10.4f} {m.stderr:>9.4f} {m.estimate / limit:>11.4f} "
              f"{res.metric(f'spread_K{K}').estimate:>8.4f}")
    print(f"limit 4/pi_Gamma = {limit:.6f}; written to {write_result(res, cfg.out, argv, cfg.seed)}")
    return 0 if res.passed else 1


if __name__ == "__main__":
    sys.exit(main())
