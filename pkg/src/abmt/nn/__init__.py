from . import autodiff
from .autodiff import GraphError, ShapeError, Tensor, backward, grad, no_grad, parameter
from .layers import (
    AttentionEncoderSpec,
    MlpSpec,
    attention_encode,
    gaussian_entropy,
    gaussian_head,
    gaussian_log_prob,
    init_attention,
    init_mlp,
    mlp_forward,
)
from .optim import AdamState, adam_step, clip_grad_norm

__all__ = [
    "AdamState",
    "AttentionEncoderSpec",
    "GraphError",
    "MlpSpec",
    "ShapeError",
    "Tensor",
    "adam_step",
    "attention_encode",
    "autodiff",
    "backward",
    "clip_grad_norm",
    "gaussian_entropy",
    "gaussian_head",
    "gaussian_log_prob",
    "grad",
    "init_attention",
    "init_mlp",
    "mlp_forward",
    "no_grad",
    "parameter",
]
