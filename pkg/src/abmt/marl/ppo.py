"""Clipped PPO update with a clipped centralized value loss."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Any

import numpy as np

from ..env.scenario import ConfigError
from ..nn import autodiff as ad
from ..nn.layers import gaussian_entropy, gaussian_log_prob
from ..nn.optim import AdamState, adam_step
from .policy import PolicyBundle
from .rollout import RolloutBuffer


@dataclass(frozen=True)
class PpoConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    epochs: int = 4
    minibatches: int = 4
    rollout_length: int = 128
    n_envs: int = 16
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    value_clip: bool = True
    normalize_advantages: bool = True
    total_steps: int = 200_000
    lr: float = 1e-3
    max_grad_norm: float | None = 0.5
    hidden: int = 64
    embed_dim: int = 64
    heads: int = 4
    log_std_init: float = -0.5
    checkpoint_every: int = 10
    eval_every: int = 10
    eval_episodes: int = 4

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError(f"gamma must be in (0, 1], got {self.gamma}")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ConfigError(f"gae_lambda must be in [0, 1], got {self.gae_lambda}")
        if self.clip_eps <= 0:
            raise ConfigError(f"clip_eps must be > 0, got {self.clip_eps}")
        if self.epochs < 1 or self.minibatches < 1 or self.rollout_length < 1 or self.n_envs < 1:
            raise ConfigError("epochs, minibatches, rollout_length and n_envs must be >= 1")
        if (self.rollout_length * self.n_envs) % self.minibatches:
            raise ConfigError("rollout_length * n_envs must be divisible by minibatches")

    @property
    def steps_per_update(self) -> int:
        return self.rollout_length * self.n_envs

    @property
    def n_updates(self) -> int:
        return max(1, self.total_steps // self.steps_per_update)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> PpoConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown ppo key(s): {', '.join(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass
class UpdateStats:
    policy_loss: float
    value_loss: float
    entropy: float
    clip_frac: float
    approx_kl: float
    # first minibatch of the first epoch, where the ratio is exactly one
    first_policy_loss: float
    first_clip_frac: float
    first_adv_mean: float
    adv_mean: float
    adv_std: float


def normalize(adv: np.ndarray) -> np.ndarray:
    std = adv.std()
    centered = adv - adv.mean()
    return centered / std if std > 0 else centered


def minibatch_loss(
    policy: PolicyBundle,
    obs: np.ndarray,
    gs: np.ndarray,
    actions: np.ndarray,
    old_logp: np.ndarray,
    adv: np.ndarray,
    returns: np.ndarray,
    old_values: np.ndarray,
    cfg: PpoConfig,
):
    """Loss graph for one minibatch.

    Rows are ``(t, env)`` samples; ``obs``/``actions``/``adv``... carry an agent
    axis ``N`` while ``gs`` does not (one critic value per sample, shared by
    its agents).
    """
    B, N = adv.shape
    mean = policy.actor_mean(obs.reshape(B * N, -1))
    logp = gaussian_log_prob(mean, policy.log_std, actions.reshape(B * N, -1))
    ratio = ad.exp(ad.sub(logp, old_logp.reshape(-1)))
    a = adv.reshape(-1)
    eps = cfg.clip_eps
    surr = ad.minimum(ad.mul(ratio, a), ad.mul(ad.clip(ratio, 1.0 - eps, 1.0 + eps), a))
    policy_loss = ad.scale(ad.mean(surr), -1.0)

    v = ad.matmul(policy.value(gs), np.ones((1, N)))  # (B, N)
    err = ad.square(ad.sub(v, returns))
    if cfg.value_clip:
        v_clipped = ad.add(ad.clip(ad.sub(v, old_values), -eps, eps), old_values)
        err = ad.maximum(err, ad.square(ad.sub(v_clipped, returns)))
    value_loss = ad.scale(ad.mean(err), 0.5)

    entropy = gaussian_entropy(policy.log_std)
    total = ad.sub(
        ad.add(policy_loss, ad.scale(value_loss, cfg.value_coef)), ad.scale(entropy, cfg.entropy_coef)
    )
    r = ratio.value
    stats = {
        "policy_loss": float(policy_loss.value),
        "value_loss": float(value_loss.value),
        "entropy": float(entropy.value),
        "clip_frac": float(np.mean(np.abs(r - 1.0) > eps)),
        "approx_kl": float(np.mean((r - 1.0) - np.log(r))),
    }
    return total, stats


def ppo_update(
    buf: RolloutBuffer,
    policy: PolicyBundle,
    cfg: PpoConfig,
    opt: AdamState,
    rng: np.random.Generator,
) -> UpdateStats:
    if buf.advantages is None or buf.returns is None:
        raise ValueError("compute advantages before the update")
    T, E, N = buf.shape
    S = T * E
    obs = buf.obs.reshape(S, N, -1)
    gs = buf.global_states.reshape(S, -1)
    actions = buf.actions.reshape(S, N, -1)
    old_logp = buf.log_probs.reshape(S, N)
    old_values = buf.values.reshape(S, N)
    returns = buf.returns.reshape(S, N)
    raw_adv = buf.advantages.reshape(S, N)
    adv = normalize(raw_adv) if cfg.normalize_advantages else raw_adv

    params = policy.parameters()
    mb_size = S // cfg.minibatches
    acc: dict[str, list[float]] = {}
    first = None
    for _ in range(cfg.epochs):
        perm = rng.permutation(S)
        for k in range(cfg.minibatches):
            idx = perm[k * mb_size:(k + 1) * mb_size]
            total, stats = minibatch_loss(
                policy, obs[idx], gs[idx], actions[idx], old_logp[idx], adv[idx], returns[idx], old_values[idx], cfg
            )
            if not np.isfinite(total.value):
                raise FloatingPointError(f"non-finite PPO loss: {stats}")
            if first is None:
                first = (stats["policy_loss"], stats["clip_frac"], float(adv[idx].mean()))
            grads = ad.grad(total, params)
            adam_step(opt, params, grads, cfg.max_grad_norm)
            for key, val in stats.items():
                acc.setdefault(key, []).append(val)
    means = {k: float(np.mean(v)) for k, v in acc.items()}
    return UpdateStats(
        **means,
        first_policy_loss=first[0],
        first_clip_frac=first[1],
        first_adv_mean=first[2],
        adv_mean=float(adv.mean()),
        adv_std=float(adv.std()),
    )
