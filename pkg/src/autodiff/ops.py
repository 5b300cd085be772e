"""
Differentiable primitives.

Each primitive computes its forward value with numpy and returns a node
whose closure maps the output gradient to one gradient per input.
Broadcasting follows numpy; gradients are summed back to input shapes.
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .tensor import Tensor, as_tensor, make_node
from ..utils.errors import LocovError


# Entries of q below this are clamped before the KL logarithm
KL_EPSILON = 1e-12

# Additive logit used to exclude padded positions from a softmax
MASK_LOGIT = -1e30

Axis = Optional[Union[int, Tuple[int, ...]]]


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for i, extent in enumerate(shape):
        if extent == 1 and grad.shape[i] != 1:
            grad = grad.sum(axis=i, keepdims=True)
    return grad


def _expand_reduced(grad: np.ndarray, shape: Tuple[int, ...], axis: Axis, keepdims: bool) -> np.ndarray:
    """Broadcast the gradient of a reduction back to the input shape."""
    if axis is None:
        return np.broadcast_to(grad.reshape((1,) * len(shape)), shape)
    if not keepdims:
        axes = (axis,) if isinstance(axis, int) else axis
        axes = sorted(a % len(shape) for a in axes)
        for a in axes:
            grad = np.expand_dims(grad, a)
    return np.broadcast_to(grad, shape)


# ---------------------------------------------------------------------- #
# Elementwise arithmetic
# ---------------------------------------------------------------------- #
def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def grad_fn(g):
        return (
            _unbroadcast(g, a.shape) if a.requires_grad else None,
            _unbroadcast(g, b.shape) if b.requires_grad else None,
        )

    return make_node(a.data + b.data, (a, b), grad_fn, "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def grad_fn(g):
        return (
            _unbroadcast(g, a.shape) if a.requires_grad else None,
            _unbroadcast(-g, b.shape) if b.requires_grad else None,
        )

    return make_node(a.data - b.data, (a, b), grad_fn, "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def grad_fn(g):
        return (
            _unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
            _unbroadcast(g * a.data, b.shape) if b.requires_grad else None,
        )

    return make_node(a.data * b.data, (a, b), grad_fn, "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data

    def grad_fn(g):
        return (
            _unbroadcast(g / b.data, a.shape) if a.requires_grad else None,
            _unbroadcast(-g * out / b.data, b.shape) if b.requires_grad else None,
        )

    return make_node(out, (a, b), grad_fn, "div")


def neg(a) -> Tensor:
    a = as_tensor(a)
    return make_node(-a.data, (a,), lambda g: (-g,), "neg")


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return make_node(out, (a,), lambda g: (g * out,), "exp")


def log(a) -> Tensor:
    a = as_tensor(a)
    return make_node(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return make_node(out, (a,), lambda g: (g * 0.5 / out,), "sqrt")


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return make_node(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def gelu(a) -> Tensor:
    """Tanh approximation of GELU, composed from primitives."""
    a = as_tensor(a)
    inner = tanh((a + a * a * a * 0.044715) * float(np.sqrt(2.0 / np.pi)))
    return a * (inner + 1.0) * 0.5


def masked_fill(a, mask: np.ndarray, value: float) -> Tensor:
    """Replace entries where ``mask`` is true by a constant (no gradient there)."""
    a = as_tensor(a)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), a.shape)
    out = np.where(mask, value, a.data)
    return make_node(out, (a,), lambda g: (np.where(mask, 0.0, g),), "masked_fill")


# ---------------------------------------------------------------------- #
# Reductions and shape manipulation
# ---------------------------------------------------------------------- #
def sum(a, axis: Axis = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)
    return make_node(out, (a,), lambda g: (_expand_reduced(g, a.shape, axis, keepdims),), "sum")


def mean(a, axis: Axis = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size // max(out.size, 1)

    def grad_fn(g):
        return (_expand_reduced(g, a.shape, axis, keepdims) / count,)

    return make_node(out, (a,), grad_fn, "mean")


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    return make_node(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a, axes: Optional[Sequence[int]] = None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inverse = np.argsort(axes)
    return make_node(a.data.transpose(axes), (a,), lambda g: (g.transpose(inverse),), "transpose")


def swapaxes(a, axis1: int, axis2: int) -> Tensor:
    a = as_tensor(a)
    axes = list(range(a.ndim))
    axes[axis1], axes[axis2] = axes[axis2], axes[axis1]
    return transpose(a, axes)


def getitem(a, index) -> Tensor:
    """Basic and advanced indexing; repeated indices accumulate."""
    a = as_tensor(a)
    out = a.data[index]

    def grad_fn(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return (full,)

    return make_node(np.array(out, copy=True), (a,), grad_fn, "getitem")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def grad_fn(g):
        return tuple(np.split(g, bounds, axis=axis))

    return make_node(out, tuple(tensors), grad_fn, "concat")


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.stack([t.data for t in tensors], axis=axis)

    def grad_fn(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return make_node(out, tuple(tensors), grad_fn, "stack")


# ---------------------------------------------------------------------- #
# Linear algebra
# ---------------------------------------------------------------------- #
def matmul(a, b) -> Tensor:
    """Batched matrix product with broadcasting over leading axes (ndim >= 2)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise LocovError("shape-mismatch", "matmul operands need at least two axes; use dot for vectors")
    if a.shape[-1] != b.shape[-2]:
        raise LocovError("shape-mismatch", f"matmul of {a.shape} and {b.shape}")
    out = np.matmul(a.data, b.data)

    def grad_fn(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        if b.requires_grad:
            gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return ga, gb

    return make_node(out, (a, b), grad_fn, "matmul")


def dot(a, b) -> Tensor:
    """Inner product over the last axis."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1] != b.shape[-1]:
        raise LocovError("shape-mismatch", f"dot of {a.shape} and {b.shape}")
    return sum(a * b, axis=-1)


# ---------------------------------------------------------------------- #
# Normalisation and divergences
# ---------------------------------------------------------------------- #
def softmax(logits, axis: int = -1) -> Tensor:
    """Stable softmax via max-subtraction."""
    logits = as_tensor(logits)
    if logits.size == 0 or logits.shape[axis] == 0:
        raise LocovError("empty-distribution", "softmax over an empty axis")
    shifted = logits.data - logits.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def grad_fn(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make_node(out, (logits,), grad_fn, "softmax")


def log_softmax(logits, axis: int = -1) -> Tensor:
    logits = as_tensor(logits)
    if logits.size == 0 or logits.shape[axis] == 0:
        raise LocovError("empty-distribution", "log-softmax over an empty axis")
    m = logits.data.max(axis=axis, keepdims=True)
    lse = m + np.log(np.exp(logits.data - m).sum(axis=axis, keepdims=True))
    out = logits.data - lse
    probs = np.exp(out)

    def grad_fn(g):
        return (g - probs * g.sum(axis=axis, keepdims=True),)

    return make_node(out, (logits,), grad_fn, "log_softmax")


def kl_divergence(p, q, axis: int = -1, eps: float = KL_EPSILON) -> Tensor:
    """Sum of p * ln(p / q) along ``axis`` with 0 * ln 0 = 0 and q clamped to ``eps``."""
    p, q = as_tensor(p), as_tensor(q)
    if p.shape != q.shape:
        raise LocovError("shape-mismatch", f"KL operands have shapes {p.shape} and {q.shape}")
    positive = p.data > 0
    q_clamped = np.maximum(q.data, eps)
    safe_p = np.where(positive, p.data, 1.0)
    terms = np.where(positive, p.data * (np.log(safe_p) - np.log(q_clamped)), 0.0)
    out = terms.sum(axis=axis)

    def grad_fn(g):
        g = np.expand_dims(g, axis)
        gp = np.where(positive, np.log(safe_p) - np.log(q_clamped) + 1.0, 0.0) * g
        gq = np.where(q.data >= eps, -p.data / q_clamped, 0.0) * g
        return gp, gq

    return make_node(out, (p, q), grad_fn, "kl_divergence")


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis, then scale and shift."""
    x = as_tensor(x)
    centred = x - mean(x, axis=-1, keepdims=True)
    variance = mean(centred * centred, axis=-1, keepdims=True)
    return centred / sqrt(variance + eps) * gamma + beta


def logsumexp(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    m = a.data.max(axis=axis, keepdims=True)
    e = np.exp(a.data - m)
    s = e.sum(axis=axis, keepdims=True)
    out = (m + np.log(s)).squeeze(axis)

    def grad_fn(g):
        return (np.expand_dims(g, axis) * e / s,)

    return make_node(out, (a,), grad_fn, "logsumexp")


def diagonal(a) -> Tensor:
    """Main diagonal of a square matrix."""
    a = as_tensor(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise LocovError("shape-mismatch", f"diagonal of non-square shape {a.shape}")
    idx = np.arange(a.shape[0])
    return getitem(a, (idx, idx))


__all__ = [
    'KL_EPSILON',
    'MASK_LOGIT',
    'add', 'sub', 'mul', 'div', 'neg', 'exp', 'log', 'sqrt', 'tanh', 'gelu',
    'masked_fill', 'sum', 'mean', 'reshape', 'transpose', 'swapaxes',
    'getitem', 'concat', 'stack', 'matmul', 'dot', 'softmax', 'log_softmax',
    'kl_divergence', 'layer_norm', 'logsumexp', 'diagonal',
]
