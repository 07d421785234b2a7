"""Desk-scale learning check on the reduced scenario (1 agent, 1 machine).

Trains flat MAPPO for the full step budget and compares deterministic
deliveries per episode against a uniform random policy measured by the same
evaluator.
"""
from __future__ import annotations

import argparse
import logging
import time

from abmt.env import reduced_scenario
from abmt.marl import MAPPO, PpoConfig, RandomPolicy, ScriptedPolicy, evaluate
from abmt.marl.train import train


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--episodes", type=int, default=20)
    ap.add_argument("--out", default="runs/train_smoke")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = reduced_scenario()
    t0 = time.time()
    result = train(cfg, PpoConfig(total_steps=args.steps), MAPPO, args.seed, args.out)
    elapsed = time.time() - t0
    trained = evaluate(result.policy, cfg, args.episodes, 10_000 + args.seed, deterministic=True)
    random = evaluate(RandomPolicy(), cfg, args.episodes, 10_000 + args.seed)
    scripted = evaluate(ScriptedPolicy(cfg), cfg, args.episodes, 10_000 + args.seed)
    print(f"training time {elapsed:.1f} s")
    print(f"trained : {trained.summary()}")
    print(f"random  : {random.summary()}")
    print(f"scripted: {scripted.summary()}")
    ratio = trained.mean_deliveries / random.mean_deliveries if random.mean_deliveries else float("inf")
    print(f"deliveries vs random: {ratio:.2f}x")


if __name__ == "__main__":
    main()
