"""Command line entry point: ``abmt {train,eval,bridge,plot,gradcheck,compare}``.

Exit codes: 0 success, 1 usage error (bad flags, missing files, invalid
config or checkpoint), 2 runtime failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .env.scenario import ConfigError
from .harness.checkpoint import CheckpointError

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("abmt")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _existing_file(flag: str, value: str) -> Path:
    p = Path(value)
    if not p.is_file():
        raise UsageError(f"{flag}: file not found: {p}")
    return p


def _load_config(args):
    from .harness.runconfig import RunConfig

    cfg = RunConfig.load(_existing_file("--config", args.config))
    return cfg.with_seed(args.seed)


def cmd_train(args) -> int:
    from .marl.evaluate import evaluate
    from .marl.train import train

    cfg = _load_config(args)
    result = train(cfg.scenario, cfg.ppo, cfg.variant, cfg.seed, cfg.output_dir)
    rep = evaluate(result.policy, cfg.scenario, cfg.ppo.eval_episodes, cfg.seed + 1_000_003, deterministic=True)
    print(f"trained {cfg.variant} seed={cfg.seed} updates={cfg.ppo.n_updates} -> {cfg.output_dir}")
    print(f"metrics: {result.metrics_path}")
    print(f"checkpoint: {result.checkpoints[-1]}")
    print(f"final eval: {rep.summary()}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .harness.checkpoint import load_checkpoint
    from .harness.metrics import EPISODE_COLUMNS, write_metrics
    from .marl.evaluate import evaluate

    cfg = _load_config(args)
    ckpt = _existing_file("--checkpoint", args.checkpoint)
    if args.episodes < 1:
        raise UsageError("--episodes: must be >= 1")
    policy = load_checkpoint(ckpt, cfg.scenario)
    rep = evaluate(policy, cfg.scenario, args.episodes, cfg.seed, deterministic=args.deterministic)
    out = Path(args.out) if args.out else cfg.output_dir / "eval_report.csv"
    rows = [
        {"episode": k, "return": r, "deliveries": d, "collisions": c} for k, (r, d, c) in enumerate(rep.rows)
    ]
    write_metrics(rows, out, EPISODE_COLUMNS)
    print(rep.summary())
    print(f"episodes csv: {out}")
    return EXIT_OK


def cmd_bridge(args) -> int:
    from dataclasses import replace

    from .hil.bridge import run_bridge, write_bridge_csv
    from .hil.transport import UdpTransport

    cfg = _load_config(args)
    ckpt = _existing_file("--checkpoint", args.checkpoint)
    if args.duration < 0:
        raise UsageError("--duration: must be >= 0")
    bridge = cfg.bridge
    bridge = replace(bridge, channel=replace(bridge.channel, kind=args.channel))
    if args.localization:
        bridge = replace(bridge, localization=args.localization)
    transport = None
    if args.transport == "udp":
        transport = UdpTransport(cfg.scenario.n_agents, station_port=args.port)
    try:
        trace, metrics = run_bridge(
            cfg.scenario, ckpt, bridge, args.duration, cfg.seed, transport=transport, realtime=args.realtime
        )
    finally:
        if transport is not None:
            transport.close()
    out = Path(args.out) if args.out else cfg.output_dir / f"bridge_{args.channel}.csv"
    write_bridge_csv(trace, out)
    print(metrics.summary())
    print(f"bridge csv: {out}")
    return EXIT_OK


def cmd_plot(args) -> int:
    from .harness.plot import plot_metrics

    if not Path(args.metrics).is_dir():
        raise UsageError(f"--metrics: directory not found: {args.metrics}")
    out = plot_metrics(args.metrics, args.out, title=args.title)
    print(f"plot: {out}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .nn.gradcheck import run_suite

    report = run_suite(draws=args.draws, seed=args.seed or 0)
    for name, err in report.items():
        print(f"{name}: max relative error {err:.3e}")
    worst = max(report.values())
    ok = worst < args.tol
    print(f"max relative error {worst:.3e} ({'PASS' if ok else 'FAIL'} at tol {args.tol:g})")
    return EXIT_OK if ok else EXIT_RUNTIME


def cmd_compare(args) -> int:
    from dataclasses import replace

    from .harness.compare import run_comparison

    cfg = _load_config(args)
    ppo = cfg.ppo if args.steps is None else replace(cfg.ppo, total_steps=args.steps)
    if args.seeds < 1:
        raise UsageError("--seeds: must be >= 1")
    seeds = [cfg.seed + k for k in range(args.seeds)]
    out = Path(args.out) if args.out else cfg.output_dir
    comp = run_comparison(cfg.scenario, ppo, seeds, out)
    print(comp.ordering_report())
    print(f"summary: {comp.summary_path}")
    print(f"plot: {comp.plot_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the config seed")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = _Parser(prog="abmt", description="Multi-agent machine tending: training, evaluation and robot bridge.",
                parents=[common])
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    t = sub.add_parser("train", parents=[common], help="train a policy from a run config")
    t.add_argument("--config", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    e.add_argument("--config", required=True)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--episodes", type=int, default=10)
    e.add_argument("--deterministic", action="store_true")
    e.add_argument("--out", help="per-episode CSV path (default: <output_dir>/eval_report.csv)")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bridge", parents=[common], help="mirror a policy on virtual robots")
    b.add_argument("--config", required=True)
    b.add_argument("--checkpoint", required=True)
    b.add_argument("--duration", type=int, default=2500, help="robot ticks")
    b.add_argument("--channel", choices=("central", "gossip"), default="central")
    b.add_argument("--localization", choices=("graycode", "oracle"))
    b.add_argument("--transport", choices=("loopback", "udp"), default="loopback")
    b.add_argument("--port", type=int, default=0, help="station UDP port (0 = any free port)")
    b.add_argument("--realtime", action="store_true", help="pace ticks by the wall clock")
    b.add_argument("--out", help="bridge CSV path (default: <output_dir>/bridge_<channel>.csv)")
    b.set_defaults(func=cmd_bridge)

    pl = sub.add_parser("plot", parents=[common], help="three-panel SVG from run directories")
    pl.add_argument("--metrics", required=True, help="directory holding run directories")
    pl.add_argument("--out", required=True)
    pl.add_argument("--title")
    pl.set_defaults(func=cmd_plot)

    g = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient suite")
    g.add_argument("--draws", type=int, default=100)
    g.add_argument("--tol", type=float, default=1e-4)
    g.set_defaults(func=cmd_gradcheck)

    c = sub.add_parser("compare", parents=[common], help="train both variants over several seeds and plot")
    c.add_argument("--config", required=True)
    c.add_argument("--seeds", type=int, default=3)
    c.add_argument("--steps", type=int, help="override ppo.total_steps")
    c.add_argument("--out", help="output directory (default: config output_dir)")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("abmt: a subcommand is required (train, eval, bridge, plot, gradcheck, compare)")
        args.seed = getattr(args, "seed", None)
        logging.basicConfig(
            level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, ConfigError, CheckpointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:  # noqa: BLE001 - top-level boundary
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
