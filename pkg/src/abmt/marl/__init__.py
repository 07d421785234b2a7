from .evaluate import EvalReport, evaluate
from .policy import AB_MAPPO, MAPPO, VARIANTS, PolicyBundle, RandomPolicy, ScriptedPolicy, StationaryPolicy, init_policy
from .ppo import PpoConfig, UpdateStats, ppo_update
from .rollout import EpisodeTracker, RolloutBuffer, collect_rollout, compute_gae, fill_gae

__all__ = [
    "AB_MAPPO",
    "EpisodeTracker",
    "EvalReport",
    "MAPPO",
    "PolicyBundle",
    "PpoConfig",
    "RandomPolicy",
    "RolloutBuffer",
    "ScriptedPolicy",
    "StationaryPolicy",
    "UpdateStats",
    "VARIANTS",
    "collect_rollout",
    "compute_gae",
    "evaluate",
    "fill_gae",
    "init_policy",
    "ppo_update",
]
