"""Harnack deviations of hitting distributions as the scale ratio m grows."""
import argparse
import sys
from dataclasses import dataclass, fields

from toruswalk.config import parse_walk
from toruswalk.harnack import fit_harnack_constant, harnack_ratio


@dataclass
class HarnackScan:
    walk: str = "srw"
    r: int = 4
    s: int = 1
    m_list: str = "1,2,4,8"
    settings: str = "interior,exterior"


def parse(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    for f in fields(HarnackScan):
        p.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, type=type(f.default),
                       default=f.default)
    return HarnackScan(**vars(p.parse_args(argv)))


def main(argv=None):
    scan = parse(argv)
    dist = parse_walk(scan.walk)
    ms = [int(m) for m in scan.m_list.split(",")]
    for setting in scan.settings.split(","):
        devs = []
        for m in ms:
            res, _ = harnack_ratio(setting, dist, scan.r, m, scan.s)
            devs.append(res.deviation)
            print(f"{setting:>9} m={m:<3} R={res.R:<5} deviation {res.deviation:.6f} "
                  f"starts {res.starts} targets {res.targets} mass error {res.mass_error:.1e}")
        print(f"{setting:>9} fitted constant {fit_harnack_constant(ms, devs, setting):.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
