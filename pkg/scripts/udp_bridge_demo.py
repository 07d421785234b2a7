"""Run the bridge over real UDP sockets on localhost.

Frames travel as one datagram each between the station socket and per-robot
sockets. With ``--realtime`` ticks are paced by the wall clock; either way
socket timing makes this run non-reproducible, unlike the loopback transport.
"""
from __future__ import annotations

import argparse

from abmt.env import ScenarioConfig
from abmt.hil import BridgeConfig, UdpTransport, run_bridge
from abmt.marl import ScriptedPolicy


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--port", type=int, default=0, help="station port (0 = any free port)")
    ap.add_argument("--ticks", type=int, default=1000)
    ap.add_argument("--realtime", action="store_true")
    args = ap.parse_args()

    cfg = ScenarioConfig()
    with UdpTransport(cfg.n_agents, station_port=args.port) as transport:
        print(f"station listening on {transport.station_address}")
        _, m = run_bridge(cfg, ScriptedPolicy(cfg), BridgeConfig(), args.ticks, 0,
                          transport=transport, realtime=args.realtime)
    print(m.summary())
    print(f"frames sent: {m.frames_sent}")


if __name__ == "__main__":
    main()
