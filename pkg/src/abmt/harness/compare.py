"""Side-by-side training of both variants over several seeds, plus the plot."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..env.scenario import ScenarioConfig
from ..marl.evaluate import evaluate
from ..marl.policy import AB_MAPPO, MAPPO
from ..marl.ppo import PpoConfig
from ..marl.train import train
from .metrics import write_metrics
from .plot import plot_metrics

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = ("variant", "seed", "mean_return", "deliveries", "collisions")


@dataclass
class Comparison:
    rows: list[dict]
    plot_path: Path
    summary_path: Path

    def means(self) -> dict[str, dict[str, float]]:
        out: dict[str, dict[str, float]] = {}
        for v in sorted({r["variant"] for r in self.rows}):
            sub = [r for r in self.rows if r["variant"] == v]
            out[v] = {k: float(np.mean([r[k] for r in sub])) for k in ("mean_return", "deliveries", "collisions")}
        return out

    def ordering_report(self) -> str:
        """Whether AB-MAPPO beats MAPPO on each panel, stated not asserted."""
        m = self.means()
        if AB_MAPPO not in m or MAPPO not in m:
            return "ordering: needs both variants"
        a, b = m[AB_MAPPO], m[MAPPO]
        lines = []
        for key, better in (("mean_return", "higher"), ("deliveries", "higher"), ("collisions", "lower")):
            wins = a[key] > b[key] if better == "higher" else a[key] < b[key]
            lines.append(
                f"{key}: ab-mappo={a[key]:.3f} mappo={b[key]:.3f} "
                f"({'ab-mappo' if wins else 'mappo'} better, {better} is better)"
            )
        return "\n".join(lines)


def run_comparison(
    scenario: ScenarioConfig,
    ppo: PpoConfig,
    seeds: list[int],
    out_dir: str | Path,
    variants: tuple[str, ...] = (AB_MAPPO, MAPPO),
    eval_episodes: int = 8,
) -> Comparison:
    out = Path(out_dir)
    rows = []
    for variant in variants:
        for seed in seeds:
            run_dir = out / variant / f"seed_{seed}"
            log.info("training %s seed %d -> %s", variant, seed, run_dir)
            result = train(scenario, ppo, variant, seed, run_dir)
            rep = evaluate(result.policy, scenario, eval_episodes, seed + 7_000_001, deterministic=True)
            rows.append({
                "variant": variant,
                "seed": seed,
                "mean_return": rep.mean_return,
                "deliveries": rep.mean_deliveries,
                "collisions": rep.mean_collisions,
            })
    summary = write_metrics(rows, out / "summary.csv", SUMMARY_COLUMNS)
    plot = plot_metrics(out, out / "comparison.svg", title="AB-MAPPO vs MAPPO")
    return Comparison(rows=rows, plot_path=plot, summary_path=summary)
