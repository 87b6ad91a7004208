"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

Each op builds a node of a dynamically-recorded tape (parent references plus
a backward closure); `backward` walks the tape once in reverse topological
order. Every op output is checked for NaN/Inf.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "NumericError",
    "tensor",
    "backward",
    "matmul",
    "add",
    "sub",
    "mul",
    "div",
    "relu",
    "sigmoid",
    "tanh",
    "exp",
    "log",
    "softmax",
    "concat",
    "gather",
    "segment_sum",
    "segment_max",
    "reduce_sum",
    "reduce_mean",
    "clip",
    "scale",
    "gradcheck",
]


class NumericError(ArithmeticError):
    """Raised when an op produces a NaN or Inf."""


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, parents=(), backward_fn=None, check=True):
        self.data = np.asarray(data, dtype=np.float64)
        if check and not np.isfinite(self.data).all():
            raise NumericError("non-finite tensor value")
        self.grad = None
        self._parents = parents
        self._backward = backward_fn

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"

    # operator sugar (constants are wrapped as leaves)
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


def tensor(data) -> Tensor:
    """Leaf tensor (a parameter or constant input)."""
    return Tensor(data)


def _wrap(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _accumulate(t: Tensor, g: np.ndarray):
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64)
    else:
        t.grad = t.grad + g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a gradient back to `shape` after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


def backward(loss: Tensor):
    """Populate .grad on every tensor reachable from `loss`.

    The loss must be scalar. Nodes are visited exactly once, in reverse
    topological order.
    """
    if loss.data.size != 1:
        raise ValueError("loss must be scalar")
    topo = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# Ops
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data, (a, b))

    def bw(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    out._backward = bw
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data - b.data, (a, b))

    def bw(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(-g, b.data.shape))

    out._backward = bw
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data, (a, b))

    def bw(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    out._backward = bw
    return out


def div(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data / b.data, (a, b))

    def bw(g):
        _accumulate(a, _unbroadcast(g / b.data, a.data.shape))
        _accumulate(b, _unbroadcast(-g * a.data / (b.data**2), b.data.shape))

    out._backward = bw
    return out


def scale(a: Tensor, c: float) -> Tensor:
    out = Tensor(a.data * c, (a,))

    def bw(g):
        _accumulate(a, g * c)

    out._backward = bw
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data @ b.data, (a, b))

    def bw(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    out._backward = bw
    return out


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    out = Tensor(np.where(mask, a.data, 0.0), (a,))

    def bw(g):
        _accumulate(a, g * mask)

    out._backward = bw
    return out


def sigmoid(a: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-np.clip(a.data, -500, 500)))
    out = Tensor(y, (a,))

    def bw(g):
        _accumulate(a, g * y * (1.0 - y))

    out._backward = bw
    return out


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = Tensor(y, (a,))

    def bw(g):
        _accumulate(a, g * (1.0 - y * y))

    out._backward = bw
    return out


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    out = Tensor(y, (a,))

    def bw(g):
        _accumulate(a, g * y)

    out._backward = bw
    return out


def log(a: Tensor) -> Tensor:
    out = Tensor(np.log(a.data), (a,))

    def bw(g):
        _accumulate(a, g / a.data)

    out._backward = bw
    return out


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient flows only through the interior."""
    mask = (a.data > lo) & (a.data < hi)
    out = Tensor(np.clip(a.data, lo, hi), (a,))

    def bw(g):
        _accumulate(a, g * mask)

    out._backward = bw
    return out


def softmax(a: Tensor) -> Tensor:
    """Row-wise softmax of a 2D tensor."""
    z = a.data - a.data.max(axis=-1, keepdims=True)
    ez = np.exp(z)
    y = ez / ez.sum(axis=-1, keepdims=True)
    out = Tensor(y, (a,))

    def bw(g):
        dot = (g * y).sum(axis=-1, keepdims=True)
        _accumulate(a, (g - dot) * y)

    out._backward = bw
    return out


def concat(tensors, axis: int = 1) -> Tensor:
    ts = list(tensors)
    out = Tensor(np.concatenate([t.data for t in ts], axis=axis), tuple(ts))
    sizes = [t.data.shape[axis] for t in ts]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        for t, piece in zip(ts, np.split(g, splits, axis=axis)):
            _accumulate(t, piece)

    out._backward = bw
    return out


def gather(a: Tensor, idx) -> Tensor:
    """Select rows of a 2D tensor."""
    idx = np.asarray(idx, dtype=np.int64)
    out = Tensor(a.data[idx], (a,))

    def bw(g):
        acc = np.zeros_like(a.data)
        np.add.at(acc, idx, g)
        _accumulate(a, acc)

    out._backward = bw
    return out


def segment_sum(a: Tensor, segments, num_segments: int) -> Tensor:
    """Sum rows of `a` into `num_segments` buckets; empty buckets are zero."""
    seg = np.asarray(segments, dtype=np.int64)
    y = np.zeros((num_segments,) + a.data.shape[1:], dtype=np.float64)
    np.add.at(y, seg, a.data)
    out = Tensor(y, (a,))

    def bw(g):
        _accumulate(a, g[seg])

    out._backward = bw
    return out


def segment_max(a: Tensor, segments, num_segments: int) -> Tensor:
    """Row-wise max per segment; empty segments yield the zero vector.

    Gradient flows only to the maximizing element, ties broken toward the
    lowest input row index.
    """
    seg = np.asarray(segments, dtype=np.int64)
    n, d = a.data.shape
    y = np.full((num_segments, d), -np.inf)
    np.maximum.at(y, seg, a.data)
    empty = ~np.isin(np.arange(num_segments), seg)
    y[empty] = 0.0

    big = n + 1
    src = np.full((num_segments, d), big, dtype=np.int64)
    if n:
        rows = np.arange(n)[:, None]
        cand = np.where(a.data == y[seg], rows, big)
        np.minimum.at(src, seg, cand)
    out = Tensor(y, (a,))

    def bw(g):
        acc = np.zeros_like(a.data)
        valid = src < big
        if valid.any():
            cols = np.broadcast_to(np.arange(d), (num_segments, d))
            flat = src[valid] * d + cols[valid]
            np.add.at(acc.reshape(-1), flat, g[valid])
        _accumulate(a, acc)

    out._backward = bw
    return out


def reduce_sum(a: Tensor) -> Tensor:
    out = Tensor(a.data.sum(), (a,))

    def bw(g):
        _accumulate(a, np.broadcast_to(g, a.data.shape).copy())

    out._backward = bw
    return out


def reduce_mean(a: Tensor) -> Tensor:
    n = a.data.size
    out = Tensor(a.data.mean(), (a,))

    def bw(g):
        _accumulate(a, np.broadcast_to(g / n, a.data.shape).copy())

    out._backward = bw
    return out


# ---------------------------------------------------------------------------
# Finite-difference checking
# ---------------------------------------------------------------------------

def gradcheck(f, params, h: float = 1e-5, rel_tol: float = 1e-4) -> float:
    """Compare reverse-mode gradients of scalar f(params) against central
    differences. Returns the max relative error; raises AssertionError if it
    exceeds rel_tol.
    """
    for p in params:
        p.grad = None
    loss = f()
    backward(loss)
    worst = 0.0
    for p in params:
        an = p.grad if p.grad is not None else np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        num = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            hi = float(f().data)
            flat[i] = orig - h
            lo = float(f().data)
            flat[i] = orig
            num[i] = (hi - lo) / (2 * h)
        num = num.reshape(p.data.shape)
        denom = np.maximum(np.maximum(np.abs(an), np.abs(num)), 1e-6)
        err = float((np.abs(an - num) / denom).max()) if flat.size else 0.0
        worst = max(worst, err)
    assert worst <= rel_tol, f"gradient check failed: {worst:.3e}"
    return worst
