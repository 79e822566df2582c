#!/usr/bin/env python3
"""Run the full validation study: exact-model and mismatched-model cases.

Executes the five observer settings over the shared scenario set for
both observer parameterizations and writes one output directory per
case (per-run CSVs, summary JSON, circle-chart data).

    python scripts/run_study.py --out results/            # full scale
    python scripts/run_study.py --out results/ --desk     # 10 scenarios
"""

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

from mho.scenario import ScenarioConfig, run_experiment


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results", help="output root directory")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument(
        "--desk", action="store_true", help="desk scale: 10 scenarios instead of 50"
    )
    args = parser.parse_args(argv)

    base = ScenarioConfig()
    if args.seed is not None:
        base = replace(base, master_seed=args.seed)
    if args.desk:
        base = replace(base, N_s=10)

    out_root = Path(args.out)
    for label, a_obs in (("exact_model", 10.0), ("mismatched_model", 7.0)):
        cfg = replace(base, a_observer=a_obs)
        t0 = time.perf_counter()
        summary, _ = run_experiment(cfg, out_dir=out_root / label, workers=args.workers)
        print(f"[{label}] ({time.perf_counter() - t0:.1f}s)")
        for row in summary["indicators"]:
            tag = "adaptive" if row["adaptive"] else f"fixed q={row['q_init']}"
            print(f"  setting {row['setting']} ({tag}): m={row['m']:+.6f} sigma={row['sigma']:.3e}")
    print(f"outputs in {out_root}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
