#!/usr/bin/env python3
"""Closed-form cycle parameters against simulated cycles (a, c, d and next-value frequencies).

    python3 scripts/validate_cycles.py [--scenario scenario2] [--cycles 1000000]
"""

import argparse
import sys

from aoii_smdp.experiments import BUILTIN, battery_table, builtin, cycle_battery


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", choices=sorted(BUILTIN), default="scenario2")
    ap.add_argument("--cycles", type=int, default=1_000_000)
    ap.add_argument("--taus", default="1,2,3,5")
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()
    taus = tuple(int(t) for t in args.taus.split(","))
    cells = cycle_battery(builtin(args.scenario), taus, args.cycles, args.seed)
    print(battery_table(cells))
    failed = sum(not c.passed for c in cells)
    print(f"{len(cells) - failed}/{len(cells)} cells within 3 standard errors")
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
