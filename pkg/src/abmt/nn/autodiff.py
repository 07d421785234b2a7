"""Reverse-mode autodiff over dense float64 numpy arrays.

Shapes are strict: binary ops require identical shapes, except the explicit
``add_bias`` / ``expand`` ops and ``matmul`` against a shared weight matrix.
"""
from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

_GRAD_ENABLED = True
_DEBUG = False


class ShapeError(ValueError):
    pass


class GraphError(RuntimeError):
    pass


@contextlib.contextmanager
def no_grad():
    global _GRAD_ENABLED
    prev, _GRAD_ENABLED = _GRAD_ENABLED, False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def set_debug(flag: bool) -> None:
    """In debug mode every op result is checked for NaN/Inf."""
    global _DEBUG
    _DEBUG = bool(flag)


class Tensor:
    __slots__ = ("value", "grad", "parents", "backward_fn", "op", "requires_grad", "_consumed")

    def __init__(self, value, requires_grad: bool = False, parents: tuple = (), backward_fn=None, op: str = "leaf"):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.parents = parents
        self.backward_fn = backward_fn
        self.op = op
        self._consumed = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def numpy(self) -> np.ndarray:
        return self.value

    def __repr__(self) -> str:
        return f"Tensor(op={self.op}, shape={self.shape})"

    # operator sugar; all of these go through the strict functions below
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def parameter(value) -> Tensor:
    return Tensor(np.array(value, dtype=np.float64), requires_grad=True)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(value: np.ndarray, parents: Sequence[Tensor], backward_fn: Callable, op: str) -> Tensor:
    if _DEBUG and not np.all(np.isfinite(value)):
        raise FloatingPointError(f"non-finite value produced by {op}")
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        return Tensor(value, True, tuple(parents), backward_fn, op)
    return Tensor(value)


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# -- elementwise ---------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape(a, b, "add")
    return _make(a.value + b.value, (a, b), lambda g: (g, g), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape(a, b, "sub")
    return _make(a.value - b.value, (a, b), lambda g: (g, -g), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape(a, b, "mul")
    av, bv = a.value, b.value
    return _make(av * bv, (a, b), lambda g: (g * bv, g * av), "mul")


def scale(a: Tensor, c: float) -> Tensor:
    return _make(a.value * c, (a,), lambda g: (g * c,), "scale")


def add_scalar(a: Tensor, c: float) -> Tensor:
    return _make(a.value + c, (a,), lambda g: (g,), "add_scalar")


def square(a: Tensor) -> Tensor:
    av = a.value
    return _make(av * av, (a,), lambda g: (2.0 * g * av,), "square")


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.value)
    return _make(y, (a,), lambda g: (g * (1.0 - y * y),), "tanh")


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.value)
    return _make(y, (a,), lambda g: (g * y,), "exp")


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp; the gradient is zero where the clamp is active."""
    v = a.value
    inside = (v >= lo) & (v <= hi)
    return _make(np.clip(v, lo, hi), (a,), lambda g: (g * inside,), "clip")


def minimum(a, b) -> Tensor:
    """Elementwise min; ties route the gradient to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    _same_shape(a, b, "minimum")
    pick_a = a.value <= b.value
    return _make(np.where(pick_a, a.value, b.value), (a, b), lambda g: (g * pick_a, g * ~pick_a), "minimum")


def maximum(a, b) -> Tensor:
    """Elementwise max; ties route the gradient to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    _same_shape(a, b, "maximum")
    pick_a = a.value >= b.value
    return _make(np.where(pick_a, a.value, b.value), (a, b), lambda g: (g * pick_a, g * ~pick_a), "maximum")


# -- broadcasting (explicit only) -----------------------------------------------


def _sum_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    lead = g.ndim - len(shape)
    return g.sum(axis=tuple(range(lead))) if lead else g


def add_bias(x: Tensor, bias: Tensor) -> Tensor:
    """``x[..., k] + bias[k]``."""
    x, bias = as_tensor(x), as_tensor(bias)
    if bias.value.ndim != 1 or x.shape[-1:] != bias.shape:
        raise ShapeError(f"add_bias: bias {bias.shape} does not match trailing dim of {x.shape}")
    return _make(x.value + bias.value, (x, bias), lambda g: (g, _sum_to(g, bias.shape)), "add_bias")


def expand(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    """Repeat ``x`` over new leading dims; ``x.shape`` must be a suffix of ``shape``."""
    x = as_tensor(x)
    shape = tuple(shape)
    if shape[len(shape) - x.value.ndim:] != x.shape:
        raise ShapeError(f"expand: {x.shape} is not a suffix of {shape}")
    return _make(np.broadcast_to(x.value, shape).copy(), (x,), lambda g: (_sum_to(g, x.shape),), "expand")


# -- linear algebra --------------------------------------------------------------


def matmul(a, b) -> Tensor:
    """``a[..., m, k] @ b[k, n]`` or batched ``a[..., m, k] @ b[..., k, n]``."""
    a, b = as_tensor(a), as_tensor(b)
    av, bv = a.value, b.value
    if av.ndim < 2 or bv.ndim < 2 or av.shape[-1] != bv.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {av.shape} @ {bv.shape}")
    if bv.ndim > 2 and av.shape[:-2] != bv.shape[:-2]:
        raise ShapeError(f"matmul: batch dims differ {av.shape[:-2]} vs {bv.shape[:-2]}")

    def backward(g):
        ga = g @ np.swapaxes(bv, -1, -2)
        if bv.ndim == 2:
            gb = av.reshape(-1, av.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        else:
            gb = np.swapaxes(av, -1, -2) @ g
        return ga, gb

    return _make(av @ bv, (a, b), backward, "matmul")


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    old = a.shape
    return _make(a.value.reshape(shape), (a,), lambda g: (g.reshape(old),), "reshape")


def transpose(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    inv = tuple(np.argsort(axes))
    return _make(np.transpose(a.value, axes), (a,), lambda g: (np.transpose(g, inv),), "transpose")


def concat(xs: Sequence[Tensor], axis: int = -1) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    sizes = [x.shape[axis] for x in xs]
    splits = np.cumsum(sizes)[:-1]
    return _make(
        np.concatenate([x.value for x in xs], axis=axis),
        xs,
        lambda g: tuple(np.split(g, splits, axis=axis)),
        "concat",
    )


def index(a: Tensor, key) -> Tensor:
    """Basic (non-fancy) slicing."""
    shape = a.shape

    def backward(g):
        out = np.zeros(shape)
        out[key] = g
        return (out,)

    return _make(a.value[key], (a,), backward, "index")


# -- reductions --------------------------------------------------------------------


def sum(a: Tensor, axis: int | tuple[int, ...] | None = None) -> Tensor:  # noqa: A001
    shape = a.shape
    if axis is None:
        return _make(np.sum(a.value), (a,), lambda g: (np.broadcast_to(g, shape).copy(),), "sum")
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    axes = tuple(ax % len(shape) for ax in axes)
    return _make(
        np.sum(a.value, axis=axes),
        (a,),
        lambda g: (np.broadcast_to(np.expand_dims(g, axes), shape).copy(),),
        "sum",
    )


def mean(a: Tensor, axis: int | tuple[int, ...] | None = None) -> Tensor:
    n = a.value.size if axis is None else int(np.prod([a.shape[ax] for ax in np.atleast_1d(axis)]))
    return scale(sum(a, axis), 1.0 / n)


def masked_softmax(x: Tensor, mask: np.ndarray) -> Tensor:
    """Softmax over the last axis restricted to ``mask``; masked entries are exactly 0."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.shape:
        raise ShapeError(f"masked_softmax: mask {mask.shape} vs logits {x.shape}")
    if not mask.any(axis=-1).all():
        raise ValueError("masked_softmax: a row has no valid entries")
    z = np.where(mask, x.value, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.where(mask, np.exp(z), 0.0)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (y * (g - np.sum(g * y, axis=-1, keepdims=True)),)

    return _make(y, (x,), backward, "softmax")


# -- backward ----------------------------------------------------------------------


def _topo(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` on every node reachable from the scalar ``loss``.

    Gradients are zeroed first, so leaves shared between graphs never
    accumulate across calls. A graph can be differentiated once.
    """
    if loss.value.shape != ():
        raise ShapeError(f"backward: loss must be a scalar, got shape {loss.shape}")
    if loss._consumed:
        raise GraphError("backward called twice on the same graph; re-run the forward pass")
    loss._consumed = True
    if not loss.requires_grad:
        return
    order = _topo(loss)
    for node in order:
        node.grad = np.zeros_like(node.value)
    loss.grad = np.ones_like(loss.value)
    for node in reversed(order):
        if node.backward_fn is None:
            continue
        grads = node.backward_fn(node.grad)
        for p, g in zip(node.parents, grads):
            if p.requires_grad:
                p.grad += g
        if node.parents:
            # free the closure; leaves keep their grads
            node.backward_fn = None


def grad(loss: Tensor, params: Iterable[Tensor]) -> list[np.ndarray]:
    params = list(params)
    for p in params:
        p.grad = None
    backward(loss)
    return [np.zeros_like(p.value) if p.grad is None else p.grad for p in params]
