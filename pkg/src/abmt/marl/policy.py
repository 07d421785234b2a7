"""Shared actor + centralized critic, in flat-MLP or attention-encoder form."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..env.scenario import ScenarioConfig
from ..env.world import GLOBAL_TOKEN_WIDTH, TOKEN_WIDTH, global_tokens, make_rng, tokens_from_flat
from ..nn import autodiff as ad
from ..nn.layers import (
    AttentionEncoderSpec,
    MlpSpec,
    attention_encode,
    gaussian_head,
    init_attention,
    init_mlp,
    mlp_forward,
)

MAPPO = "mappo"
AB_MAPPO = "ab-mappo"
VARIANTS = (MAPPO, AB_MAPPO)
ACTION_DIM = 2


@dataclass
class PolicyBundle:
    variant: str
    n_agents: int
    n_machines: int
    hidden: int = 64
    embed_dim: int = 64
    heads: int = 4
    params: dict[str, ad.Tensor] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")

    # -- architecture ------------------------------------------------------------

    @property
    def obs_dim(self) -> int:
        return 5 + 4 * (self.n_agents - 1) + 4 * self.n_machines + 2

    @property
    def state_dim(self) -> int:
        return 5 * self.n_agents + 4 * self.n_machines + 3

    @property
    def attention(self) -> bool:
        return self.variant == AB_MAPPO

    def actor_encoder(self) -> AttentionEncoderSpec:
        return AttentionEncoderSpec(TOKEN_WIDTH, self.embed_dim, self.heads, self.hidden)

    def critic_encoder(self) -> AttentionEncoderSpec:
        return AttentionEncoderSpec(GLOBAL_TOKEN_WIDTH, self.embed_dim, self.heads, self.hidden)

    def actor_mlp(self) -> MlpSpec:
        if self.attention:
            return MlpSpec((self.hidden, self.hidden, ACTION_DIM), output_gain=0.01)
        return MlpSpec((self.obs_dim, self.hidden, self.hidden, ACTION_DIM), output_gain=0.01)

    def critic_mlp(self) -> MlpSpec:
        if self.attention:
            return MlpSpec((self.hidden, self.hidden, 1), output_gain=1.0)
        return MlpSpec((self.state_dim, self.hidden, self.hidden, 1), output_gain=1.0)

    # -- forward ---------------------------------------------------------------

    def actor_mean(self, obs: np.ndarray) -> ad.Tensor:
        """Action means ``(B, 2)`` for flat observations ``(B, F)``."""
        x = obs
        if self.attention:
            tok = tokens_from_flat(obs, self.n_agents, self.n_machines)
            x = ad.tanh(attention_encode(self.actor_encoder(), self.params, tok, None, "actor.enc"))
        return mlp_forward(self.actor_mlp(), self.params, x, "actor.mlp")

    def value(self, gs: np.ndarray) -> ad.Tensor:
        """State values ``(B, 1)`` for global states ``(B, G)``."""
        x = gs
        if self.attention:
            tok = global_tokens(gs, self.n_agents, self.n_machines)
            x = ad.tanh(attention_encode(self.critic_encoder(), self.params, tok, None, "critic.enc"))
        return mlp_forward(self.critic_mlp(), self.params, x, "critic.mlp")

    @property
    def log_std(self) -> ad.Tensor:
        return self.params["log_std"]

    def act_batch(self, obs: np.ndarray, rng: np.random.Generator | None, deterministic: bool = False):
        """Actions and log-probabilities for observations ``(..., F)``."""
        lead = obs.shape[:-1]
        with ad.no_grad():
            mean = self.actor_mean(obs.reshape(-1, obs.shape[-1]))
            action, logp, _ = gaussian_head(mean, self.log_std, rng, deterministic)
        return action.reshape(lead + (ACTION_DIM,)), logp.value.reshape(lead)

    def values_batch(self, gs: np.ndarray) -> np.ndarray:
        lead = gs.shape[:-1]
        with ad.no_grad():
            v = self.value(gs.reshape(-1, gs.shape[-1])).value
        return v.reshape(lead)

    # -- parameters ----------------------------------------------------------------

    def parameters(self) -> list[ad.Tensor]:
        return list(self.params.values())

    def expected_shapes(self) -> dict[str, tuple[int, ...]]:
        """Parameter names and shapes this architecture requires, in init order."""
        shapes: dict[str, tuple[int, ...]] = {}
        for role, enc, mlp in (
            ("actor", self.actor_encoder(), self.actor_mlp()),
            ("critic", self.critic_encoder(), self.critic_mlp()),
        ):
            if self.attention:
                d = enc.embed_dim
                shapes.update({
                    f"{role}.enc.embed.w": (enc.token_width, d),
                    f"{role}.enc.embed.b": (d,),
                    f"{role}.enc.q.w": (d, d),
                    f"{role}.enc.k.w": (d, d),
                    f"{role}.enc.v.w": (d, d),
                    f"{role}.enc.out.w": (d, enc.out_dim),
                    f"{role}.enc.out.b": (enc.out_dim,),
                })
            for i in range(mlp.n_layers):
                shapes[f"{role}.mlp.{i}.w"] = (mlp.widths[i], mlp.widths[i + 1])
                shapes[f"{role}.mlp.{i}.b"] = (mlp.widths[i + 1],)
        shapes["log_std"] = (ACTION_DIM,)
        return shapes

    def clone(self) -> PolicyBundle:
        return copy.deepcopy(self)

    def rounded_to_float32(self) -> PolicyBundle:
        """Copy with every parameter passed through float32 storage."""
        out = self.clone()
        for p in out.params.values():
            p.value = p.value.astype(np.float32).astype(np.float64)
        return out


def init_policy(
    cfg: ScenarioConfig,
    variant: str,
    seed: int,
    hidden: int = 64,
    embed_dim: int = 64,
    heads: int = 4,
    log_std_init: float = -0.5,
) -> PolicyBundle:
    bundle = PolicyBundle(variant, cfg.n_agents, cfg.n_machines, hidden, embed_dim, heads)
    rng = make_rng(seed, 1000, 0)
    params: dict[str, ad.Tensor] = {}
    if bundle.attention:
        params.update(init_attention(bundle.actor_encoder(), rng, "actor.enc"))
    params.update(init_mlp(bundle.actor_mlp(), rng, "actor.mlp"))
    if bundle.attention:
        params.update(init_attention(bundle.critic_encoder(), rng, "critic.enc"))
    params.update(init_mlp(bundle.critic_mlp(), rng, "critic.mlp"))
    params["log_std"] = ad.parameter(np.full(ACTION_DIM, log_std_init))
    bundle.params = params
    return bundle


class RandomPolicy:
    """Uniform actions in [-1, 1]^2."""

    def act_batch(self, obs, rng, deterministic=False):
        lead = obs.shape[:-1]
        return rng.uniform(-1.0, 1.0, size=lead + (ACTION_DIM,)), np.zeros(lead)


class ScriptedPolicy:
    """Hand-coded tender: go to the nearest Ready machine, then to storage.

    Reads only the flat observation, so it runs through the same evaluator as a
    learned policy.
    """

    def __init__(self, cfg: ScenarioConfig, gain: float = 4.0, damping: float = 1.0):
        self.n_agents = cfg.n_agents
        self.n_machines = cfg.n_machines
        self.gain = gain
        self.damping = damping

    def act_batch(self, obs, rng, deterministic=False):
        lead = obs.shape[:-1]
        o = obs.reshape(-1, obs.shape[-1])
        vel = o[:, 2:4]
        carrying = o[:, 4] > 0.5
        off = 5 + 4 * (self.n_agents - 1)
        m = o[:, off:off + 4 * self.n_machines].reshape(len(o), self.n_machines, 4)
        storage = o[:, off + 4 * self.n_machines:off + 4 * self.n_machines + 2]
        dist = np.linalg.norm(m[..., :2], axis=-1)
        # prefer Ready machines; otherwise the one that will be ready soonest
        score = np.where(m[..., 2] > 0.5, dist, 10.0 + m[..., 3])
        target_m = m[np.arange(len(o)), np.argmin(score, axis=-1), :2]
        target = np.where(carrying[:, None], storage, target_m)
        act = np.clip(self.gain * target - self.damping * vel, -1.0, 1.0)
        return act.reshape(lead + (ACTION_DIM,)), np.zeros(lead)


class StationaryPolicy:
    """Zero acceleration for every agent; agents spawned at rest stay put."""

    def act_batch(self, obs, rng, deterministic=False):
        lead = obs.shape[:-1]
        return np.zeros(lead + (ACTION_DIM,)), np.zeros(lead)
