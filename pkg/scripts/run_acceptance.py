"""Run the acceptance battery and print one line per criterion."""
import argparse
import sys
from dataclasses import dataclass, fields

from toruswalk.verification import CHECKS, run_checks


@dataclass
class AcceptanceConfig:
    seed: int = 7
    workers: int = 8
    only: str = ""  # comma separated keys, e.g. C1,C4


def parse(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    for f in fields(AcceptanceConfig):
        p.add_argument(f"--{f.name}", type=type(f.default), default=f.default)
    return AcceptanceConfig(**vars(p.parse_args(argv)))


def main(argv=None):
    cfg = parse(argv)
    keys = [k.strip() for k in cfg.only.split(",") if k.strip()] or list(CHECKS)
    results = run_checks(keys, seed=cfg.seed, workers=cfg.workers)
    failed = [r.key for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed"
          + (f"; failing {', '.join(failed)}" if failed else ""))
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
