"""Three-set sandwich quantities and band escape probabilities over band widths."""
import argparse
import sys
from dataclasses import dataclass, fields

from toruswalk.config import parse_walk
from toruswalk.partition import band_escape_probability, disc_band_partition, three_set


@dataclass
class ThreeSetScan:
    walk: str = "poisson:0.3:3"
    K: int = 48
    n: int = 8
    s_list: str = "1,2,3"


def parse(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    for f in fields(ThreeSetScan):
        p.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, type=type(f.default),
                       default=f.default)
    return ThreeSetScan(**vars(p.parse_args(argv)))


def main(argv=None):
    scan = parse(argv)
    dist = parse_walk(scan.walk)
    ok = True
    for s in (int(v) for v in scan.s_list.split(",")):
        q = three_set(*disc_band_partition(scan.K, scan.n, s), dist, K=scan.K)
        esc = band_escape_probability(scan.n, s, dist)
        ok &= q.holds()
        print(f"s={s}: holds={q.holds()} psi={q.psi:.5f} sigma={q.sigma:.5f} "
              f"f_A={q.f_A:.2f} f_B={q.f_B:.2f} planar band escape {esc.sup:.5f}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
