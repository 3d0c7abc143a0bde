"""Reverse-mode automatic differentiation over numpy arrays.

Just enough of an array engine for the tagger: a define-by-run graph is
built during the forward pass and discarded after ``backward``. Tensors are
immutable once created except for gradient accumulation, so a fixed set of
parameters can be read from any number of forward passes concurrently;
gradient application must be serialized by the caller.

Training runs in float32 by default; gradient checking switches the engine
to float64 via ``set_default_dtype``. Random initialization uses numpy's
Philox generator (a 64-bit counter-based PRNG), so identical seeds give
identical tensors on every platform.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "ShapeError",
    "set_default_dtype",
    "get_default_dtype",
    "constant",
    "parameter",
    "zeros",
    "ones",
    "rng_normal",
    "matmul",
    "add",
    "sub",
    "mul",
    "scale",
    "softmax",
    "layer_norm",
    "relu",
    "embedding_lookup",
    "concat",
    "reshape",
    "transpose",
    "masked_fill",
    "tsum",
    "mean",
    "cross_entropy",
    "backward",
]

_default_dtype = np.float32


def set_default_dtype(dtype) -> None:
    """Set the dtype used by tensor constructors (float32 or float64)."""
    global _default_dtype
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported default dtype {dtype}")
    _default_dtype = dtype.type


def get_default_dtype():
    return _default_dtype


class ShapeError(ValueError):
    """Incompatible operand shapes; message names the op and both shapes."""


class Tensor:
    """N-dimensional real array, optionally part of a differentiation graph.

    ``data`` is a numpy array; ``grad`` is lazily allocated during backward.
    ``_parents``/``_backward`` record how the tensor was produced.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data, dtype=_default_dtype)
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in _parents)
        self._parents = _parents if self.requires_grad else ()
        self._backward = _backward if self.requires_grad else None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        self.grad = g if self.grad is None else self.grad + g

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


def constant(data) -> Tensor:
    """Wrap an array as a non-differentiable tensor (dtype preserved)."""
    return Tensor(np.asarray(data))


def parameter(data) -> Tensor:
    return Tensor(np.asarray(data, dtype=_default_dtype), requires_grad=True)


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape, dtype=_default_dtype))


def ones(shape) -> Tensor:
    return Tensor(np.ones(shape, dtype=_default_dtype))


def rng_normal(shape, seed: int, std: float, mean: float = 0.0) -> Tensor:
    """Normal sample, deterministic for a fixed seed (Philox counter PRNG)."""
    if std <= 0:
        raise ValueError(f"rng_normal requires std > 0, got {std}")
    gen = np.random.Generator(np.random.Philox(seed))
    return Tensor(gen.normal(mean, std, size=shape).astype(_default_dtype))


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=_default_dtype))


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _broadcast_check(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.data.shape} and {b.data.shape}") from None


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_check("add", a, b)
    out = Tensor(a.data + b.data, _parents=(a, b))

    def _bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    out._backward = _bwd if out.requires_grad else None
    return out


def sub(a, b) -> Tensor:
    return add(a, scale(_as_tensor(b), -1.0))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_check("mul", a, b)
    out = Tensor(a.data * b.data, _parents=(a, b))

    def _bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    out._backward = _bwd if out.requires_grad else None
    return out


def scale(a, s: float) -> Tensor:
    a = _as_tensor(a)
    s = float(s)
    out = Tensor(a.data * a.data.dtype.type(s), _parents=(a,))

    def _bwd(g):
        a._accumulate(g * a.data.dtype.type(s))

    out._backward = _bwd if out.requires_grad else None
    return out


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul: operands must be at least 2-D, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    out = Tensor(a.data @ b.data, _parents=(a, b))

    def _bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape))

    out._backward = _bwd if out.requires_grad else None
    return out


def softmax(x, axis: int = -1) -> Tensor:
    x = _as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(s, _parents=(x,))

    def _bwd(g):
        dot = (g * s).sum(axis=axis, keepdims=True)
        x._accumulate(s * (g - dot))

    out._backward = _bwd if out.requires_grad else None
    return out


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale and shift."""
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    if gain.shape != x.shape[-1:] or bias.shape != x.shape[-1:]:
        raise ShapeError(
            f"layer_norm: gain/bias shapes {gain.shape}/{bias.shape} do not match last axis of {x.shape}"
        )
    n = x.shape[-1]
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = Tensor(xhat * gain.data + bias.data, _parents=(x, gain, bias))

    def _bwd(g):
        if gain.requires_grad:
            gain._accumulate((g * xhat).reshape(-1, n).sum(axis=0))
        if bias.requires_grad:
            bias._accumulate(g.reshape(-1, n).sum(axis=0))
        if x.requires_grad:
            gx = g * gain.data
            m1 = gx.mean(axis=-1, keepdims=True)
            m2 = (gx * xhat).mean(axis=-1, keepdims=True)
            x._accumulate(inv * (gx - m1 - xhat * m2))

    out._backward = _bwd if out.requires_grad else None
    return out


def relu(x) -> Tensor:
    x = _as_tensor(x)
    pos = x.data > 0
    out = Tensor(np.where(pos, x.data, x.data.dtype.type(0)), _parents=(x,))

    def _bwd(g):
        x._accumulate(g * pos)

    out._backward = _bwd if out.requires_grad else None
    return out


def embedding_lookup(table, ids: np.ndarray) -> Tensor:
    """Gather rows of ``table`` by integer index; gradients scatter-add back."""
    table = _as_tensor(table)
    ids = np.asarray(ids)
    if table.ndim != 2:
        raise ShapeError(f"embedding_lookup: table must be 2-D, got {table.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(
            f"embedding_lookup: ids out of range [0, {table.shape[0]}): "
            f"min={ids.min()}, max={ids.max()}"
        )
    out = Tensor(table.data[ids], _parents=(table,))

    def _bwd(g):
        dt = np.zeros_like(table.data)
        np.add.at(dt, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        table._accumulate(dt)

    out._backward = _bwd if out.requires_grad else None
    return out


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError(f"concat: incompatible shapes {[t.shape for t in tensors]}") from None
    out = Tensor(data, _parents=tuple(tensors))
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def _bwd(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            if t.requires_grad:
                t._accumulate(piece)

    out._backward = _bwd if out.requires_grad else None
    return out


def reshape(x, shape) -> Tensor:
    x = _as_tensor(x)
    try:
        data = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {x.shape} to {tuple(shape)}") from None
    out = Tensor(data, _parents=(x,))

    def _bwd(g):
        x._accumulate(g.reshape(x.data.shape))

    out._backward = _bwd if out.requires_grad else None
    return out


def transpose(x, axis1: int = -2, axis2: int = -1) -> Tensor:
    """Swap two axes (the last two by default)."""
    x = _as_tensor(x)
    out = Tensor(np.swapaxes(x.data, axis1, axis2), _parents=(x,))

    def _bwd(g):
        x._accumulate(np.swapaxes(g, axis1, axis2))

    out._backward = _bwd if out.requires_grad else None
    return out


def masked_fill(x, mask: np.ndarray, value: float) -> Tensor:
    """Replace positions where ``mask`` is true with ``value`` (no gradient there)."""
    x = _as_tensor(x)
    mask = np.asarray(mask, dtype=bool)
    if np.broadcast_shapes(mask.shape, x.data.shape) != x.data.shape:
        raise ShapeError(f"masked_fill: mask shape {mask.shape} does not broadcast to {x.shape}")
    out = Tensor(np.where(mask, x.data.dtype.type(value), x.data), _parents=(x,))

    def _bwd(g):
        x._accumulate(np.where(mask, g.dtype.type(0), g))

    out._backward = _bwd if out.requires_grad else None
    return out


def tsum(x, axis=None, keepdims: bool = False) -> Tensor:
    x = _as_tensor(x)
    out = Tensor(x.data.sum(axis=axis, keepdims=keepdims), _parents=(x,))

    def _bwd(g):
        if axis is None:
            x._accumulate(np.broadcast_to(g, x.data.shape).copy())
        else:
            if not keepdims:
                g = np.expand_dims(g, axis)
            x._accumulate(np.broadcast_to(g, x.data.shape).copy())

    out._backward = _bwd if out.requires_grad else None
    return out


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = _as_tensor(x)
    n = x.size if axis is None else x.shape[axis]
    return scale(tsum(x, axis=axis, keepdims=keepdims), 1.0 / n)


def cross_entropy(logits, targets: np.ndarray) -> Tensor:
    """Per-row negative log-likelihood of ``targets`` under softmax(logits).

    ``logits`` is [N, C]; ``targets`` an integer vector of length N. Returns
    a length-N tensor so callers can mask and reduce as they like.
    """
    logits = _as_tensor(logits)
    targets = np.asarray(targets)
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy: logits must be 2-D, got {logits.shape}")
    if targets.shape != (logits.shape[0],):
        raise ShapeError(
            f"cross_entropy: targets shape {targets.shape} does not match logits {logits.shape}"
        )
    if targets.size and (targets.min() < 0 or targets.max() >= logits.shape[1]):
        raise IndexError(f"cross_entropy: target index out of range for {logits.shape[1]} classes")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=1, keepdims=True)
    rows = np.arange(logits.shape[0])
    lse = np.log(e.sum(axis=1)) + logits.data.max(axis=1)
    out = Tensor(lse - logits.data[rows, targets], _parents=(logits,))

    def _bwd(g):
        d = probs * g[:, None]
        d[rows, targets] -= g
        logits._accumulate(d)

    out._backward = _bwd if out.requires_grad else None
    return out


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, emitted = stack.pop()
        if emitted:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every tensor the scalar ``loss`` depends on.

    Gradients sum over fan-out: a tensor consumed by several ops receives
    the sum of all incoming contributions, which is what makes weighted
    subtoken aggregation train the way it should.
    """
    if loss.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ValueError("backward called on a tensor with no graph attached")
    loss.grad = np.ones_like(loss.data)
    for node in reversed(_topo_order(loss)):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
