"""Network building blocks: tanh MLP, attention set encoder, diagonal Gaussian head."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor

Params = dict[str, Tensor]

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
_LOG_2PI = math.log(2.0 * math.pi)


def orthogonal(rng: np.random.Generator, n_in: int, n_out: int, gain: float) -> np.ndarray:
    """Orthogonal ``(n_in, n_out)`` matrix scaled by ``gain``."""
    a = rng.standard_normal((max(n_in, n_out), min(n_in, n_out)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if n_in < n_out:
        q = q.T
    return np.ascontiguousarray(gain * q[:n_in, :n_out])


@dataclass(frozen=True)
class MlpSpec:
    widths: tuple[int, ...]  # (input, hidden..., output)
    output_gain: float = 1.0
    hidden_gain: float = math.sqrt(2.0)

    def __post_init__(self):
        if len(self.widths) < 3:
            raise ValueError("an MLP needs at least one hidden layer")

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1


def init_mlp(spec: MlpSpec, rng: np.random.Generator, prefix: str) -> Params:
    params: Params = {}
    for i in range(spec.n_layers):
        gain = spec.output_gain if i == spec.n_layers - 1 else spec.hidden_gain
        params[f"{prefix}.{i}.w"] = ad.parameter(orthogonal(rng, spec.widths[i], spec.widths[i + 1], gain))
        params[f"{prefix}.{i}.b"] = ad.parameter(np.zeros(spec.widths[i + 1]))
    return params


def mlp_forward(spec: MlpSpec, params: Params, x, prefix: str) -> Tensor:
    x = ad.as_tensor(x)
    if x.shape[-1] != spec.widths[0]:
        raise ShapeError(f"mlp input width {x.shape[-1]} != {spec.widths[0]}")
    for i in range(spec.n_layers):
        x = ad.add_bias(ad.matmul(x, params[f"{prefix}.{i}.w"]), params[f"{prefix}.{i}.b"])
        if i < spec.n_layers - 1:
            x = ad.tanh(x)
    return x


@dataclass(frozen=True)
class AttentionEncoderSpec:
    token_width: int
    embed_dim: int = 64
    heads: int = 4
    out_dim: int = 64

    def __post_init__(self):
        if self.embed_dim % self.heads:
            raise ValueError(f"embed_dim {self.embed_dim} not divisible by heads {self.heads}")

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.heads


def init_attention(spec: AttentionEncoderSpec, rng: np.random.Generator, prefix: str) -> Params:
    d = spec.embed_dim
    return {
        f"{prefix}.embed.w": ad.parameter(orthogonal(rng, spec.token_width, d, math.sqrt(2.0))),
        f"{prefix}.embed.b": ad.parameter(np.zeros(d)),
        f"{prefix}.q.w": ad.parameter(orthogonal(rng, d, d, 1.0)),
        f"{prefix}.k.w": ad.parameter(orthogonal(rng, d, d, 1.0)),
        f"{prefix}.v.w": ad.parameter(orthogonal(rng, d, d, 1.0)),
        f"{prefix}.out.w": ad.parameter(orthogonal(rng, d, spec.out_dim, math.sqrt(2.0))),
        f"{prefix}.out.b": ad.parameter(np.zeros(spec.out_dim)),
    }


def attention_encode(
    spec: AttentionEncoderSpec,
    params: Params,
    tokens,
    mask: np.ndarray | None,
    prefix: str,
    return_weights: bool = False,
):
    """Embed tokens, one residual multi-head self-attention block, masked mean-pool, project.

    ``tokens`` is ``(B, T, w)``; ``mask`` is ``(B, T)`` with True for valid tokens.
    """
    tokens = ad.as_tensor(tokens)
    if tokens.value.ndim != 3 or tokens.shape[-1] != spec.token_width:
        raise ShapeError(f"tokens must be (B, T, {spec.token_width}), got {tokens.shape}")
    B, T, _ = tokens.shape
    mask = np.ones((B, T), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != (B, T):
        raise ShapeError(f"mask shape {mask.shape} != {(B, T)}")
    if not mask.any(axis=1).all():
        raise ValueError("every batch row needs at least one valid token")
    h, dk, d = spec.heads, spec.head_dim, spec.embed_dim

    e = ad.add_bias(ad.matmul(tokens, params[f"{prefix}.embed.w"]), params[f"{prefix}.embed.b"])

    def split(x: Tensor) -> Tensor:
        return ad.transpose(ad.reshape(x, (B, T, h, dk)), (0, 2, 1, 3))

    q = split(ad.matmul(e, params[f"{prefix}.q.w"]))
    k = split(ad.matmul(e, params[f"{prefix}.k.w"]))
    v = split(ad.matmul(e, params[f"{prefix}.v.w"]))
    logits = ad.scale(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(dk))
    key_mask = np.broadcast_to(mask[:, None, None, :], (B, h, T, T))
    weights = ad.masked_softmax(logits, key_mask)
    heads = ad.matmul(weights, v)  # (B, h, T, dk)
    merged = ad.reshape(ad.transpose(heads, (0, 2, 1, 3)), (B, T, d))
    hidden = ad.add(e, merged)

    pool = mask[:, :, None] / mask.sum(axis=1)[:, None, None]
    pooled = ad.sum(ad.mul(hidden, np.broadcast_to(pool, (B, T, d)).copy()), axis=1)
    out = ad.add_bias(ad.matmul(pooled, params[f"{prefix}.out.w"]), params[f"{prefix}.out.b"])
    if return_weights:
        return out, weights
    return out


# -- diagonal Gaussian policy head ------------------------------------------------------


def _clamped(log_std: Tensor) -> Tensor:
    return ad.clip(ad.as_tensor(log_std), LOG_STD_MIN, LOG_STD_MAX)


def gaussian_log_prob(mean: Tensor, log_std: Tensor, action: np.ndarray) -> Tensor:
    """Per-row log density ``(B,)`` of ``action`` under N(mean, diag(exp(log_std))^2)."""
    mean = ad.as_tensor(mean)
    B, A = mean.shape
    ls = ad.expand(_clamped(log_std), (B, A))
    z = ad.mul(ad.sub(ad.Tensor(action), mean), ad.exp(ad.scale(ls, -1.0)))
    per_dim = ad.add_scalar(ad.add(ad.scale(ad.square(z), -0.5), ad.scale(ls, -1.0)), -0.5 * _LOG_2PI)
    return ad.sum(per_dim, axis=1)


def gaussian_entropy(log_std: Tensor) -> Tensor:
    """Entropy of the diagonal Gaussian (independent of the mean)."""
    ls = _clamped(log_std)
    return ad.add_scalar(ad.sum(ls), 0.5 * (1.0 + _LOG_2PI) * ls.shape[0])


def gaussian_head(
    mean: Tensor,
    log_std: Tensor,
    rng: np.random.Generator | None = None,
    deterministic: bool = False,
) -> tuple[np.ndarray, Tensor, Tensor]:
    """Sample ``mean + exp(log_std) * z``; returns ``(action, log_prob, entropy)``."""
    mean = ad.as_tensor(mean)
    if deterministic:
        action = mean.value.copy()
    else:
        if rng is None:
            raise ValueError("sampling needs a generator")
        std = np.exp(np.clip(ad.as_tensor(log_std).value, LOG_STD_MIN, LOG_STD_MAX))
        action = mean.value + std * rng.standard_normal(mean.shape)
    return action, gaussian_log_prob(mean, log_std, action), gaussian_entropy(log_std)
