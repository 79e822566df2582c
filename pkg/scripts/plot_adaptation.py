#!/usr/bin/env python3
"""Print the budget trajectory and cycle diagnostics of one adaptive run.

Useful for eyeballing how the inclusion rate reacts to the measured
contraction ratios on a single scenario:

    python scripts/plot_adaptation.py --scenario 0 --mismatch
"""

import argparse
import sys
from dataclasses import replace

from mho.scenario import (
    ScenarioConfig,
    derive_seeds,
    sample_initial_states,
    simulate_plant,
    _build_observer,
)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario", type=int, default=0)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--mismatch", action="store_true", help="observer uses a=7")
    parser.add_argument("--every", type=int, default=10, help="print every n-th cycle")
    args = parser.parse_args(argv)

    cfg = ScenarioConfig()
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    if args.mismatch:
        cfg = replace(cfg, a_observer=7.0)

    init_seed, plant_seeds = derive_seeds(cfg.master_seed, cfg.N_s)
    starts = sample_initial_states(cfg, init_seed)
    plant = simulate_plant(cfg, plant_seeds[args.scenario])
    obs = _build_observer(cfg, setting_id=5, x_hat0=starts[args.scenario])
    for k in range(cfg.N_sim):
        if k == obs.next_update_index():
            obs.update_cycle(plant.log)

    print(f"{'t_k':>6} {'q':>5} {'ell':>4} {'J*':>10} {'J_best':>10} "
          f"{'E':>8} {'D':>8} {'K':>8} {'alpha':>10} {'Gamma':>10}")
    for rec in obs.records[:: args.every]:
        print(
            f"{rec.t_index:>6} {rec.q:>5} {rec.ell:>4} {rec.J_star:>10.4f} "
            f"{rec.J_best:>10.4f} {rec.E:>8.4f} {rec.D:>8.4f} {rec.K:>8.4f} "
            f"{rec.alpha:>10.2e} {rec.gamma:>10.2e}"
        )
    qs = [r.q for r in obs.records]
    print(f"\ncycles: {len(qs)}, q range [{min(qs)}, {max(qs)}], final q {qs[-1]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
