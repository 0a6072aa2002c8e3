"""Reverse-mode automatic differentiation over numpy arrays.

A `Tensor` wraps an ndarray and remembers how it was produced; `backward`
walks the graph in reverse topological order and accumulates gradients
into every tensor created with ``requires_grad=True``. Only the operations
this model family needs are provided. All ops are deterministic: the same
inputs produce bit-identical outputs.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np


class GraphError(Exception):
    """Raised for malformed graphs or non-conforming shapes."""


_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (inference fast path)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, grad={self.grad is not None})"

    # Convenience operators; the heavy lifting lives in the module functions.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum-reduce a gradient back to the shape it was broadcast from."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def backward(loss: Tensor, grad: np.ndarray | None = None) -> None:
    """Accumulate gradients of `loss` into every requires_grad leaf.

    `loss` is typically scalar; a seed gradient of matching shape may be
    supplied otherwise.
    """
    if grad is None:
        grad = np.ones_like(loss.data)
    # Iterative topological order; recursion would overflow on long unrolls.
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    on_path: set[int] = set()
    while stack:
        node, processed = stack.pop()
        if processed:
            on_path.discard(id(node))
            order.append(node)
            continue
        if id(node) in visited:
            continue
        if id(node) in on_path:
            raise GraphError("cycle detected in computation graph")
        visited.add(id(node))
        on_path.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))
    loss.grad = np.asarray(grad)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
            # Interior activations are not reused; free the buffers eagerly.
            if node._parents:
                node.grad = None


# ---------------------------------------------------------------------------
# Elementwise and arithmetic ops


def add(a: Tensor, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data + b.data

    def bw(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), bw)


def sub(a: Tensor, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data - b.data

    def bw(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(-g, b.data.shape))

    return _make(out_data, (a, b), bw)


def mul(a: Tensor, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data * b.data

    def bw(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(out_data, (a, b), bw)


def scale(a: Tensor, s: float) -> Tensor:
    out_data = a.data * s

    def bw(g):
        _accum(a, g * s)

    return _make(out_data, (a,), bw)


def add_const(a: Tensor, c: float) -> Tensor:
    out_data = a.data + c

    def bw(g):
        _accum(a, g)

    return _make(out_data, (a,), bw)


def square(a: Tensor) -> Tensor:
    out_data = a.data * a.data

    def bw(g):
        _accum(a, g * (2.0 * a.data))

    return _make(out_data, (a,), bw)


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)

    def bw(g):
        _accum(a, g * out_data)

    return _make(out_data, (a,), bw)


def log(a: Tensor) -> Tensor:
    out_data = np.log(a.data)

    def bw(g):
        _accum(a, g / a.data)

    return _make(out_data, (a,), bw)


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)

    def bw(g):
        _accum(a, g * (1.0 - out_data * out_data))

    return _make(out_data, (a,), bw)


def sigmoid(a: Tensor) -> Tensor:
    out_data = sigmoid_np(a.data)

    def bw(g):
        _accum(a, g * out_data * (1.0 - out_data))

    return _make(out_data, (a,), bw)


def sigmoid_np(x: np.ndarray) -> np.ndarray:
    """Overflow-safe logistic function on raw arrays."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus_np(x: np.ndarray) -> np.ndarray:
    """log(exp(x) + 1) computed without overflow: max(x,0) + log1p(exp(-|x|))."""
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def softplus(a: Tensor) -> Tensor:
    out_data = softplus_np(a.data)

    def bw(g):
        _accum(a, g * sigmoid_np(a.data))

    return _make(out_data, (a,), bw)


def relu(a: Tensor) -> Tensor:
    out_data = np.maximum(a.data, 0.0)

    def bw(g):
        _accum(a, g * (a.data > 0.0))

    return _make(out_data, (a,), bw)


# ---------------------------------------------------------------------------
# Reductions


def sum_all(a: Tensor) -> Tensor:
    out_data = np.asarray(a.data.sum())

    def bw(g):
        _accum(a, np.broadcast_to(g, a.data.shape).copy() if np.ndim(g) else np.full_like(a.data, g))

    return _make(out_data, (a,), bw)


def sum_axis(a: Tensor, axis: int) -> Tensor:
    out_data = a.data.sum(axis=axis)

    def bw(g):
        _accum(a, np.broadcast_to(np.expand_dims(g, axis), a.data.shape))

    return _make(out_data, (a,), bw)


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    out_data = np.asarray(a.data.mean())

    def bw(g):
        _accum(a, np.full_like(a.data, g / n))

    return _make(out_data, (a,), bw)


# ---------------------------------------------------------------------------
# Linear algebra and shape ops


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Affine map y = x @ w.T (+ b) with w stored as (out_dim, in_dim)."""
    if x.data.shape[-1] != w.data.shape[1]:
        raise GraphError(f"linear: x has width {x.data.shape[-1]}, w expects {w.data.shape[1]}")
    if b is not None and b.data.shape != (w.data.shape[0],):
        raise GraphError(f"linear: bias shape {b.data.shape} != ({w.data.shape[0]},)")
    out_data = x.data @ w.data.T
    if b is not None:
        out_data += b.data

    def bw(g):
        _accum(x, g @ w.data)
        _accum(w, g.T @ x.data)
        if b is not None:
            _accum(b, g.sum(axis=0))

    parents = (x, w) if b is None else (x, w, b)
    return _make(out_data, parents, bw)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape[-1] != b.data.shape[0]:
        raise GraphError(f"matmul: inner dims {a.data.shape[-1]} != {b.data.shape[0]}")
    out_data = a.data @ b.data

    def bw(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _make(out_data, (a, b), bw)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    out_data = a.data.reshape(shape)

    def bw(g):
        _accum(a, g.reshape(a.data.shape))

    return _make(out_data, (a,), bw)


def concat(parts: list[Tensor], axis: int) -> Tensor:
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    bounds = np.cumsum([0] + sizes)

    def bw(g):
        for p, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _accum(p, g[tuple(idx)])

    return _make(out_data, tuple(parts), bw)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice along one axis."""
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)
    out_data = a.data[idx]

    def bw(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[idx] = g
            _accum(a, full)

    return _make(out_data, (a,), bw)


def split(a: Tensor, n: int, axis: int) -> list[Tensor]:
    size = a.data.shape[axis]
    if size % n != 0:
        raise GraphError(f"split: axis size {size} not divisible by {n}")
    step = size // n
    return [narrow(a, axis, i * step, step) for i in range(n)]


def flip0(a: Tensor) -> Tensor:
    """Reverse along axis 0 (time reversal for the backward RNN direction)."""
    out_data = a.data[::-1].copy()

    def bw(g):
        _accum(a, g[::-1])

    return _make(out_data, (a,), bw)


def broadcast0(a: Tensor, n: int) -> Tensor:
    """Tile a (B, D) tensor into (n, B, D); gradient sums over the new axis."""
    out_data = np.broadcast_to(a.data, (n,) + a.data.shape).copy()

    def bw(g):
        _accum(a, g.sum(axis=0))

    return _make(out_data, (a,), bw)


def embedding(weight: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup: result[..., :] = weight[ids[...], :]."""
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= weight.data.shape[0]):
        raise GraphError("embedding: index out of range")
    out_data = weight.data[ids]

    def bw(g):
        if weight.requires_grad:
            acc = np.zeros_like(weight.data)
            np.add.at(acc, ids.reshape(-1), g.reshape(-1, weight.data.shape[1]))
            _accum(weight, acc)

    return _make(out_data, (weight,), bw)


# ---------------------------------------------------------------------------
# Losses


def softmax_np(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Per-row -log softmax(logits)[target]; returns a (N,) tensor.

    Fused with its gradient (softmax - one_hot), computed with
    max-subtraction for stability.
    """
    if logits.data.ndim != 2 or logits.data.shape[1] < 2:
        raise GraphError("softmax_cross_entropy: logits must be (N, V) with V >= 2")
    targets = np.asarray(targets)
    n, v = logits.data.shape
    if targets.shape != (n,):
        raise GraphError(f"softmax_cross_entropy: targets shape {targets.shape} != ({n},)")
    if targets.size and (targets.min() < 0 or targets.max() >= v):
        raise GraphError("softmax_cross_entropy: target index out of range")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(n)
    out_data = logsumexp - shifted[rows, targets]

    def bw(g):
        if logits.requires_grad:
            grad = softmax_np(logits.data)
            grad[rows, targets] -= 1.0
            grad *= g[:, None]
            _accum(logits, grad)

    return _make(out_data, (logits,), bw)
