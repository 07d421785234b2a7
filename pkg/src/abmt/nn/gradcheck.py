"""Central finite-difference checks of the reverse-mode gradients."""
from __future__ import annotations

from typing import Callable

import numpy as np

from . import autodiff as ad
from .layers import (
    AttentionEncoderSpec,
    MlpSpec,
    attention_encode,
    gaussian_entropy,
    gaussian_log_prob,
    init_attention,
    init_mlp,
    mlp_forward,
)

FD_STEP = 1e-5
# denominator floor so that exactly-zero gradients compare on an absolute scale
REL_FLOOR = 1e-6


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), REL_FLOOR)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def finite_difference(loss_fn: Callable[[], ad.Tensor], params: list[ad.Tensor], h: float = FD_STEP) -> list[np.ndarray]:
    out = []
    with ad.no_grad():
        for p in params:
            p.value = np.ascontiguousarray(p.value)
            g = np.zeros_like(p.value)
            flat = p.value.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up = float(loss_fn().value)
                flat[i] = orig - h
                down = float(loss_fn().value)
                flat[i] = orig
                g.reshape(-1)[i] = (up - down) / (2.0 * h)
            out.append(g)
    return out


def check(loss_fn: Callable[[], ad.Tensor], params: list[ad.Tensor]) -> float:
    analytic = ad.grad(loss_fn(), params)
    numeric = finite_difference(loss_fn, params)
    return max(relative_error(a, n) for a, n in zip(analytic, numeric))


# -- the three architectures -----------------------------------------------------------


def mlp_case(rng: np.random.Generator) -> float:
    spec = MlpSpec((3, 4, 2))
    params = init_mlp(spec, rng, "m")
    for p in params.values():
        p.value = p.value + 0.3 * rng.standard_normal(p.shape)
    x = rng.standard_normal((4, 3))
    c = rng.standard_normal((4, 2))

    def loss():
        return ad.sum(ad.mul(mlp_forward(spec, params, x, "m"), c))

    return check(loss, list(params.values()))


def attention_case(rng: np.random.Generator) -> float:
    enc = AttentionEncoderSpec(token_width=5, embed_dim=4, heads=2, out_dim=3)
    head = MlpSpec((3, 4, 2))
    params = {**init_attention(enc, rng, "enc"), **init_mlp(head, rng, "head")}
    for p in params.values():
        p.value = p.value + 0.3 * rng.standard_normal(p.shape)
    B, T = 3, 4
    tokens = rng.standard_normal((B, T, 5))
    mask = rng.random((B, T)) < 0.7
    mask[:, 0] = True
    c = rng.standard_normal((B, 2))

    def loss():
        z = ad.tanh(attention_encode(enc, params, tokens, mask, "enc"))
        return ad.sum(ad.mul(mlp_forward(head, params, z, "head"), c))

    return check(loss, list(params.values()))


def gaussian_case(rng: np.random.Generator) -> float:
    """Clipped surrogate minus entropy bonus, through the Gaussian head."""
    spec = MlpSpec((3, 4, 2), output_gain=0.5)
    params = init_mlp(spec, rng, "pi")
    log_std = ad.parameter(rng.uniform(-1.0, 0.5, size=2))
    x = rng.standard_normal((5, 3))
    action = rng.standard_normal((5, 2))
    adv = rng.standard_normal(5)
    with ad.no_grad():
        base = gaussian_log_prob(mlp_forward(spec, params, x, "pi"), log_std, action).value
    # keep every ratio well away from the clip kinks at 1 +/- 0.2
    old = base + rng.choice([-0.5, -0.05, 0.05, 0.5], size=5)

    def loss():
        mean = mlp_forward(spec, params, x, "pi")
        logp = gaussian_log_prob(mean, log_std, action)
        ratio = ad.exp(ad.sub(logp, old))
        surr = ad.minimum(ad.mul(ratio, adv), ad.mul(ad.clip(ratio, 0.8, 1.2), adv))
        ent = gaussian_entropy(log_std)
        return ad.sub(ad.scale(ad.mean(surr), -1.0), ad.scale(ent, 0.01))

    return check(loss, [*params.values(), log_std])


CASES = {"mlp": mlp_case, "attention": attention_case, "gaussian": gaussian_case}


def run_suite(draws: int = 100, seed: int = 0) -> dict[str, float]:
    """Max relative error per architecture over ``draws`` random draws."""
    report = {}
    for k, (name, fn) in enumerate(CASES.items()):
        rng = np.random.default_rng([seed, k])
        report[name] = max(fn(rng) for _ in range(draws))
    return report
