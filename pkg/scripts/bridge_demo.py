"""Mirror a policy on a virtual robot fleet and compare the two channels.

Uses a checkpoint when given, otherwise the scripted tender. Also sweeps the
robot speed cap to show how the dynamics mismatch limits mirroring.
"""
from __future__ import annotations

import argparse
from dataclasses import replace
from pathlib import Path

from abmt.env import ScenarioConfig
from abmt.hil import BridgeConfig, ChannelModel, RobotParams, run_bridge, write_bridge_csv
from abmt.marl import ScriptedPolicy


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--checkpoint")
    ap.add_argument("--robots", type=int, default=3)
    ap.add_argument("--ticks", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/bridge_demo")
    args = ap.parse_args()

    cfg = ScenarioConfig(n_agents=args.robots)
    policy = args.checkpoint or ScriptedPolicy(cfg)
    out = Path(args.out)
    base = BridgeConfig()
    for kind in ("central", "gossip"):
        bc = replace(base, channel=ChannelModel(kind=kind))
        trace, m = run_bridge(cfg, policy, bc, args.ticks, args.seed)
        write_bridge_csv(trace, out / f"bridge_{kind}.csv")
        print(f"{kind:>7}: {m.summary()}")
    for v in (0.1, 0.2, 0.3):
        bc = replace(base, robot=RobotParams(v_max=v))
        _, m = run_bridge(cfg, policy, bc, args.ticks, args.seed)
        print(f"v_max {v:.1f} m/s: mirrored {sum(m.mirrored_deliveries)}/{m.sim_deliveries}, "
              f"mean track err {sum(m.mean_track_err) / len(m.mean_track_err):.3f} m")


if __name__ == "__main__":
    main()
