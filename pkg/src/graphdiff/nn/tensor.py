"""Dense f64 tensors with reverse-mode differentiation.

Shapes are strict: elementwise ops need equal shapes, except that a 1-D
operand matching the last axis is accepted as a bias/channel vector. Anything
else goes through explicit ``reshape`` / ``expand``.
"""

from __future__ import annotations

import contextlib
import math

import numpy as np

LOG_CLAMP = 1e-12
LN_EPS = 1e-5


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op", "_consumed")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None, op: str = ""):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self.op = op
        self._consumed = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op or 'leaf'})"

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape)

    def backward(self):
        backward(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Skip graph construction inside the block (inference only)."""
    global _grad_enabled
    prev, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = prev


def _make(data, parents, backward_fn, op):
    req = _grad_enabled and any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=req, _parents=parents if req else (), _backward=backward_fn if req else None, op=op)


def _acc(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad = t.grad + g


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` on every tensor that ``loss`` depends on.

    A graph can be differentiated once; a second call raises.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._consumed:
        raise RuntimeError("backward already ran on this graph; rebuild the forward pass")
    order = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    for node in order:
        if node._backward is not None:
            node.grad = None
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    loss._consumed = True


# --- elementwise ---------------------------------------------------------------


def _check_pair(a: Tensor, b: Tensor, op: str) -> bool:
    """True when ``b`` is a last-axis vector broadcast over ``a``."""
    if a.shape == b.shape:
        return False
    if b.ndim == 1 and a.ndim >= 1 and b.shape[0] == a.shape[-1]:
        return True
    raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


def _reduce_vec(g: np.ndarray) -> np.ndarray:
    return g.reshape(-1, g.shape[-1]).sum(0)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim == 1 and b.ndim > 1:
        a, b = b, a
    vec = _check_pair(a, b, "add")

    def bw(g):
        _acc(a, g)
        _acc(b, _reduce_vec(g) if vec else g)

    return _make(a.data + b.data, (a, b), bw, "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    vec = _check_pair(a, b, "sub")

    def bw(g):
        _acc(a, g)
        _acc(b, -(_reduce_vec(g) if vec else g))

    return _make(a.data - b.data, (a, b), bw, "sub")


def mul(a, b) -> Tensor:
    if not isinstance(b, (Tensor, np.ndarray)) and np.ndim(b) == 0:
        return scale(a, float(b))
    if not isinstance(a, (Tensor, np.ndarray)) and np.ndim(a) == 0:
        return scale(b, float(a))
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim == 1 and b.ndim > 1:
        a, b = b, a
    vec = _check_pair(a, b, "mul")

    def bw(g):
        _acc(a, g * b.data)
        gb = g * a.data
        _acc(b, _reduce_vec(gb) if vec else gb)

    return _make(a.data * b.data, (a, b), bw, "mul")


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)

    def bw(g):
        _acc(a, g * c)

    return _make(a.data * c, (a,), bw, "scale")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def bw(g):
        _acc(a, g * mask)

    return _make(a.data * mask, (a,), bw, "relu")


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)

    def bw(g):
        _acc(a, g * out)

    return _make(out, (a,), bw, "exp")


def log(a: Tensor, clamp: float = LOG_CLAMP) -> Tensor:
    safe = np.maximum(a.data, clamp)

    def bw(g):
        _acc(a, g * (a.data > clamp) / safe)

    return _make(np.log(safe), (a,), bw, "log")


def square(a: Tensor) -> Tensor:
    def bw(g):
        _acc(a, 2.0 * g * a.data)

    return _make(a.data * a.data, (a,), bw, "square")


# --- linear algebra and shape -------------------------------------------------


def matmul(a, w) -> Tensor:
    """``a`` of shape (..., k) times a 2-D ``w`` of shape (k, p)."""
    a, w = as_tensor(a), as_tensor(w)
    if w.ndim != 2 or a.shape[-1] != w.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {w.shape}")

    def bw(g):
        _acc(a, g @ w.data.T)
        if w.requires_grad:
            _acc(w, a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1]))

    return _make(a.data @ w.data, (a, w), bw, "matmul")


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    old = a.shape
    try:
        out = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"reshape: cannot view {old} as {shape}") from exc

    def bw(g):
        _acc(a, g.reshape(old))

    return _make(out, (a,), bw, "reshape")


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))

    def bw(g):
        _acc(a, g.transpose(inv))

    return _make(a.data.transpose(axes), (a,), bw, "transpose")


def swap_nodes(a: Tensor) -> Tensor:
    """Swap the two node axes of an edge tensor (..., n, n, d)."""
    axes = list(range(a.ndim))
    axes[-3], axes[-2] = axes[-2], axes[-3]
    return transpose(a, axes)


def expand(a: Tensor, shape) -> Tensor:
    """Broadcast size-1 axes of ``a`` to ``shape`` (same number of axes)."""
    shape = tuple(shape)
    if len(shape) != a.ndim or any(s != t and s != 1 for s, t in zip(a.shape, shape)):
        raise ShapeError(f"expand: cannot expand {a.shape} to {shape}")
    axes = tuple(i for i, (s, t) in enumerate(zip(a.shape, shape)) if s == 1 and t != 1)

    def bw(g):
        _acc(a, g.sum(axis=axes, keepdims=True))

    return _make(np.broadcast_to(a.data, shape).copy(), (a,), bw, "expand")


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    ax = axis % tensors[0].ndim
    for t in tensors[1:]:
        if t.ndim != tensors[0].ndim or any(
            s != r for i, (s, r) in enumerate(zip(t.shape, tensors[0].shape)) if i != ax
        ):
            raise ShapeError(f"concat: incompatible shapes {[t.shape for t in tensors]}")
    sizes = [t.shape[ax] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        for t, part in zip(tensors, np.split(g, splits, axis=ax)):
            _acc(t, part)

    return _make(np.concatenate([t.data for t in tensors], axis=ax), tuple(tensors), bw, "concat")


def take(a: Tensor, indices, axis: int) -> Tensor:
    indices = np.asarray(indices, dtype=np.int64)
    ax = axis % a.ndim

    def bw(g):
        full = np.zeros_like(a.data)
        np.add.at(full, (slice(None),) * ax + (indices,), g)
        _acc(a, full)

    return _make(np.take(a.data, indices, axis=ax), (a,), bw, "take")


# --- reductions -----------------------------------------------------------------


def _restore(g, shape, axis, keepdims):
    if not keepdims and axis is not None:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def reduce_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    def bw(g):
        _acc(a, _restore(g, a.shape, axis, keepdims))

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), bw, "sum")


def reduce_mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])

    def bw(g):
        _acc(a, _restore(g, a.shape, axis, keepdims) / count)

    return _make(a.data.mean(axis=axis, keepdims=keepdims), (a,), bw, "mean")


def _extreme(a: Tensor, axis: int, keepdims: bool, fn, name: str) -> Tensor:
    out = fn(a.data, axis=axis, keepdims=True)
    # ties share the gradient equally so the result is order independent
    hit = a.data == out
    share = hit / hit.sum(axis=axis, keepdims=True)

    def bw(g):
        gk = g if keepdims else np.expand_dims(g, axis)
        _acc(a, share * gk)

    return _make(out if keepdims else np.squeeze(out, axis), (a,), bw, name)


def reduce_max(a: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    return _extreme(a, axis, keepdims, np.max, "max")


def reduce_min(a: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    return _extreme(a, axis, keepdims, np.min, "min")


def reduce_std(a: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    """Population standard deviation; zero spread gets a zero gradient."""
    n = a.shape[axis]
    centered = a.data - a.data.mean(axis=axis, keepdims=True)
    std = np.sqrt((centered**2).mean(axis=axis, keepdims=True))

    def bw(g):
        gk = g if keepdims else np.expand_dims(g, axis)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(std > 0, centered / (n * std), 0.0)
        _acc(a, gk * d)

    return _make(std if keepdims else np.squeeze(std, axis), (a,), bw, "std")


def sum_exact(a: Tensor) -> Tensor:
    """Scalar sum with correctly rounded (order independent) forward value."""

    def bw(g):
        _acc(a, np.broadcast_to(g, a.shape))

    return _make(np.array(math.fsum(a.data.ravel().tolist())), (a,), bw, "fsum")


# --- normalisation and losses ---------------------------------------------------


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        _acc(a, out * (g - (g * out).sum(axis=axis, keepdims=True)))

    return _make(out, (a,), bw, "softmax")


def layernorm(a: Tensor, gamma: Tensor | None = None, beta: Tensor | None = None, eps: float = LN_EPS) -> Tensor:
    """Normalise over the last axis, then apply the optional affine map."""
    mu = a.data.mean(-1, keepdims=True)
    xc = a.data - mu
    var = (xc**2).mean(-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    d = a.shape[-1]
    parents = [a]
    out = xhat
    if gamma is not None:
        if gamma.shape != (d,) or beta is None or beta.shape != (d,):
            raise ShapeError(f"layernorm: affine params must have shape ({d},)")
        parents += [gamma, beta]
        out = xhat * gamma.data + beta.data

    def bw(g):
        gx = g
        if gamma is not None:
            _acc(gamma, _reduce_vec(g * xhat))
            _acc(beta, _reduce_vec(g))
            gx = g * gamma.data
        _acc(a, inv * (gx - gx.mean(-1, keepdims=True) - xhat * (gx * xhat).mean(-1, keepdims=True)))

    return _make(out, tuple(parents), bw, "layernorm")


def cross_entropy(probs: Tensor, target: np.ndarray, clamp: float = LOG_CLAMP) -> Tensor:
    """Per-row ``-sum(target * log(max(p, clamp)))`` over the last axis."""
    target = np.asarray(target, dtype=np.float64)
    if target.shape != probs.shape:
        raise ShapeError(f"cross_entropy: shapes {probs.shape} and {target.shape}")
    safe = np.maximum(probs.data, clamp)

    def bw(g):
        _acc(probs, -g[..., None] * target * (probs.data > clamp) / safe)

    return _make(-(target * np.log(safe)).sum(-1), (probs,), bw, "cross_entropy")
