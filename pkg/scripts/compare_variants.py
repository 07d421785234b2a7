"""AB-MAPPO vs MAPPO on the default 3-agent scenario, several seeds each.

Writes one run directory per (variant, seed), a summary CSV of final
deterministic evaluations and the three-panel comparison SVG.

    python scripts/compare_variants.py --steps 100000 --seeds 3 --out runs/compare
"""
from __future__ import annotations

import argparse
import logging
from dataclasses import replace

from abmt.env import ScenarioConfig
from abmt.harness.compare import run_comparison
from abmt.marl import PpoConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--steps", type=int, default=100_000, help="env steps per run")
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--first-seed", type=int, default=0)
    ap.add_argument("--eval-episodes", type=int, default=8)
    ap.add_argument("--out", default="runs/compare")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    ppo = replace(PpoConfig(), total_steps=args.steps, eval_every=0, checkpoint_every=50)
    seeds = list(range(args.first_seed, args.first_seed + args.seeds))
    comp = run_comparison(ScenarioConfig(), ppo, seeds, args.out, eval_episodes=args.eval_episodes)
    for row in comp.rows:
        print(
            f"{row['variant']:>8} seed {row['seed']}: return {row['mean_return']:.3f} "
            f"deliveries {row['deliveries']:.2f} collisions {row['collisions']:.2f}"
        )
    print(comp.ordering_report())
    print(f"plot: {comp.plot_path}")


if __name__ == "__main__":
    main()
