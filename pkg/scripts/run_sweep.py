#!/usr/bin/env python3
"""Lambda sweep of SMDP, single-threshold and random-sampling policies for the built-in scenarios.

    python3 scripts/run_sweep.py --out out/ [--scenario scenario2] [--horizon 1000000]
"""

import argparse
import logging
from pathlib import Path

from aoii_smdp.experiments import BUILTIN, builtin, run_sweep, sweep_csv, thresholds_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", choices=sorted(BUILTIN), action="append")
    ap.add_argument("--out", default="out")
    ap.add_argument("--horizon", type=int)
    ap.add_argument("--replications", type=int)
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.scenario or sorted(BUILTIN):
        sc = builtin(name).with_overrides(horizon=args.horizon, replications=args.replications, seed=args.seed)
        rows = run_sweep(sc)
        (out / f"{name}_sweep.csv").write_text(sweep_csv(sc, rows))
        (out / f"{name}_thresholds.csv").write_text(thresholds_csv(sc, rows))
        print(f"{name}")
        print(f"{'lambda':>7} {'smdp':>9} {'st':>9} {'rs':>9}  policy")
        for r in rows:
            print(f"{r.lam:>7g} {r.smdp_sim_cost:>9.4f} {r.st_sim_cost:>9.4f} {r.rs_sim_cost:>9.4f}  {r.smdp_policy}")


if __name__ == "__main__":
    main()
