from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..env.scenario import ScenarioConfig
from ..env.vector import VecEnv
from ..env.world import make_rng
from ..harness.checkpoint import save_checkpoint
from ..harness.metrics import EVAL_COLUMNS, TRAIN_COLUMNS, write_metrics
from ..nn.optim import AdamState
from .evaluate import evaluate
from .policy import PolicyBundle, init_policy
from .ppo import PpoConfig, UpdateStats, ppo_update
from .rollout import EpisodeTracker, collect_rollout, fill_gae

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    policy: PolicyBundle
    rows: list[dict] = field(default_factory=list)
    eval_rows: list[dict] = field(default_factory=list)
    stats: list[UpdateStats] = field(default_factory=list)
    checkpoints: list[Path] = field(default_factory=list)
    metrics_path: Path | None = None


def checkpoint_name(update: int) -> str:
    return f"ckpt_{update:05d}.abmt"


def train(
    scenario: ScenarioConfig,
    ppo: PpoConfig,
    variant: str,
    seed: int,
    out_dir: str | Path,
) -> TrainResult:
    """Alternate rollout collection, GAE and PPO updates until the step budget.

    Writes ``run.json``, ``metrics.csv`` (one row per update), ``eval.csv``
    (periodic deterministic evaluations) and ``ckpt_*.abmt`` into ``out_dir``.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "run.json").write_text(
            json.dumps(
                {"variant": variant, "seed": seed, "scenario": scenario.to_dict(), "ppo": ppo.to_dict()},
                indent=2,
                sort_keys=True,
            )
            + "\n",
            encoding="utf-8",
        )
    except OSError as e:
        raise OSError(f"cannot write to output directory {out}: {e}") from e

    policy = init_policy(scenario, variant, seed, ppo.hidden, ppo.embed_dim, ppo.heads, ppo.log_std_init)
    venv = VecEnv(scenario, ppo.n_envs, seed)
    act_rng = make_rng(seed, 1000, 1)
    shuffle_rng = make_rng(seed, 1000, 2)
    opt = AdamState(lr=ppo.lr)
    tracker = EpisodeTracker(ppo.n_envs)
    result = TrainResult(policy=policy)
    last = (math.nan, math.nan, math.nan)

    for u in range(ppo.n_updates):
        update = u + 1
        buf = collect_rollout(venv, policy, ppo.rollout_length, act_rng, tracker)
        fill_gae(buf, ppo.gamma, ppo.gae_lambda)
        stats = ppo_update(buf, policy, ppo, opt, shuffle_rng)
        result.stats.append(stats)
        finished = tracker.drain()
        if finished:
            arr = np.array(finished, dtype=np.float64)
            last = tuple(float(v) for v in arr.mean(axis=0))
        step = update * ppo.steps_per_update
        result.rows.append({
            "step": step,
            "update": update,
            "mean_return": last[0],
            "deliveries": last[1],
            "collisions": last[2],
            "policy_loss": stats.policy_loss,
            "value_loss": stats.value_loss,
            "entropy": stats.entropy,
            "clip_frac": stats.clip_frac,
            "approx_kl": stats.approx_kl,
        })
        log.info(
            "update %d step %d return %.3f deliveries %.2f collisions %.2f",
            update, step, last[0], last[1], last[2],
        )
        if ppo.eval_every and update % ppo.eval_every == 0:
            rep = evaluate(policy, scenario, ppo.eval_episodes, seed + 1_000_003, deterministic=True)
            result.eval_rows.append({
                "step": step,
                "update": update,
                "episodes": rep.episodes,
                "mean_return": rep.mean_return,
                "std_return": rep.std_return,
                "deliveries": rep.mean_deliveries,
                "collisions": rep.mean_collisions,
            })
        if update % ppo.checkpoint_every == 0 or update == ppo.n_updates:
            result.checkpoints.append(save_checkpoint(policy, scenario, out / checkpoint_name(update)))

    result.metrics_path = write_metrics(result.rows, out / "metrics.csv", TRAIN_COLUMNS)
    write_metrics(result.eval_rows, out / "eval.csv", EVAL_COLUMNS)
    return result
