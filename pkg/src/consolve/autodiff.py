"""Minimal reverse-mode automatic differentiation over numpy arrays.

Forward evaluation records a graph of primitive operations; Tape linearizes
that graph once, in topological order, and the backward sweep visits each
node exactly once, accumulating gradients into leaf tensors. Arrays are
float32 by default (float64 is used by the finite-difference oracles, where
single precision would drown the comparison in rounding noise).

Every primitive checks its output for non-finite values and raises
NumericError naming the operation, so numeric failures surface at the op
that produced them rather than as a bad loss much later.
"""

from __future__ import annotations

from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ContractError, DimensionError, NumericError

DEFAULT_DTYPE = np.float32

_BCE_EPS = 1e-7


def _check_finite(data: np.ndarray, op: str) -> None:
    # Sum in float64: finite inputs can only produce a non-finite sum if the
    # array itself contains inf or nan, and one reduction is far cheaper
    # than a full isfinite scan on every op.
    if not np.isfinite(np.sum(data, dtype=np.float64)):
        raise NumericError(f"non-finite output in op '{op}'")


class Tensor:
    """A numpy array plus the bookkeeping needed for backpropagation."""

    __slots__ = ("data", "requires_grad", "grad", "op", "parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None, op: str = "leaf"):
        arr = np.asarray(data, dtype=dtype if dtype is not None else DEFAULT_DTYPE)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.op = op
        self.parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def detach(self) -> "Tensor":
        """A view of the same data cut off from the graph."""
        return Tensor(self.data, requires_grad=False, dtype=self.data.dtype, op="detach")

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.astype(self.data.dtype, copy=True)
        else:
            self.grad += g

    def backward(self) -> None:
        Tape(self).backward()

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return neg(self)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], (tuple, list)) else shape)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis=axis, keepdims=keepdims)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self.op!r}, requires_grad={self.requires_grad})"


class Tape:
    """Topologically ordered record of the operations reaching a root.

    Construction walks the graph once (iteratively, so deep chains cannot
    overflow the interpreter stack); backward() replays the record in
    reverse, visiting each node exactly once.
    """

    def __init__(self, root: Tensor):
        self.root = root
        self.nodes: List[Tensor] = []
        seen = set()
        stack: List[Tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                self.nodes.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                if id(p) not in seen:
                    stack.append((p, False))

    def backward(self) -> None:
        root = self.root
        if root.data.size != 1:
            raise ContractError(f"backward requires a scalar root, got shape {root.data.shape}")
        root.accumulate(np.ones_like(root.data))
        for node in reversed(self.nodes):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def _as_tensor(x, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.data.dtype if like is not None else DEFAULT_DTYPE
    return Tensor(np.asarray(x, dtype=dtype), requires_grad=False, dtype=dtype, op="const")


def _make(data: np.ndarray, op: str, parents: Sequence[Tensor], backward) -> Tensor:
    _check_finite(data, op)
    req = any(p.requires_grad for p in parents)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = req
    out.grad = None
    out.op = op
    if req:
        out.parents = tuple(parents)
        out._backward = backward
    else:
        out.parents = ()
        out._backward = None
    return out


def _unbroadcast(g: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Reduce a gradient back to the shape of a broadcast operand."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, dim in enumerate(shape):
        if dim == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# primitives


def add(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g, b.data.shape))

    return _make(data, "add", (a, b), backward)


def sub(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    data = a.data - b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(-g, b.data.shape))

    return _make(data, "sub", (a, b), backward)


def mul(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _make(data, "mul", (a, b), backward)


def div(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    with np.errstate(all="ignore"):
        data = a.data / b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g / b.data, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _make(data, "div", (a, b), backward)


def neg(a) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        if a.requires_grad:
            a.accumulate(-g)

    return _make(-a.data, "neg", (a,), backward)


def matmul(a, b) -> Tensor:
    """a @ b with b restricted to a 2D weight; a may carry leading axes."""
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    if b.data.ndim != 2 or a.data.ndim < 2:
        raise DimensionError(f"matmul expects (..., k) x (k, n) 2D weight, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[0]:
        raise DimensionError(f"matmul inner dims differ: {a.data.shape} @ {b.data.shape}")
    data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate(g @ b.data.T)
        if b.requires_grad:
            k = a.data.shape[-1]
            n = b.data.shape[1]
            b.accumulate(a.data.reshape(-1, k).T @ g.reshape(-1, n))

    return _make(data, "matmul", (a, b), backward)


def relu(a) -> Tensor:
    a = _as_tensor(a)
    mask = a.data > 0

    def backward(g):
        if a.requires_grad:
            a.accumulate(g * mask)

    return _make(a.data * mask, "relu", (a,), backward)


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    with np.errstate(all="ignore"):
        x = a.data
        out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-x)), np.exp(x) / (1.0 + np.exp(x)))

    def backward(g):
        if a.requires_grad:
            a.accumulate(g * out * (1.0 - out))

    return _make(out, "sigmoid", (a,), backward)


def exp(a) -> Tensor:
    a = _as_tensor(a)
    with np.errstate(all="ignore"):
        out = np.exp(a.data)

    def backward(g):
        if a.requires_grad:
            a.accumulate(g * out)

    return _make(out, "exp", (a,), backward)


def log(a) -> Tensor:
    a = _as_tensor(a)
    with np.errstate(all="ignore"):
        out = np.log(a.data)

    def backward(g):
        if a.requires_grad:
            a.accumulate(g / a.data)

    return _make(out, "log", (a,), backward)


def sin(a) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        if a.requires_grad:
            a.accumulate(g * np.cos(a.data))

    return _make(np.sin(a.data), "sin", (a,), backward)


def cos(a) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        if a.requires_grad:
            a.accumulate(-g * np.sin(a.data))

    return _make(np.cos(a.data), "cos", (a,), backward)


def sqrt(a) -> Tensor:
    a = _as_tensor(a)
    with np.errstate(all="ignore"):
        out = np.sqrt(a.data)

    def backward(g):
        if a.requires_grad:
            a.accumulate(g * 0.5 / out)

    return _make(out, "sqrt", (a,), backward)


def softmax_rows(a) -> Tensor:
    """Softmax over the last axis."""
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        if a.requires_grad:
            dot = (g * out).sum(axis=-1, keepdims=True)
            a.accumulate(out * (g - dot))

    return _make(out, "softmax_rows", (a,), backward)


def reduce_sum(a, axis=None, keepdims: bool = False) -> Tensor:
    """Sum over an axis, a tuple of axes, or all entries (axis=None)."""
    a = _as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if not a.requires_grad:
            return
        if axis is None:
            a.accumulate(np.broadcast_to(g, a.data.shape).copy())
            return
        if not keepdims:
            axes = axis if isinstance(axis, tuple) else (axis,)
            for ax in sorted(ax % a.data.ndim for ax in axes):
                g = np.expand_dims(g, ax)
        a.accumulate(np.broadcast_to(g, a.data.shape).copy())

    return _make(np.asarray(data), "sum", (a,), backward)


def reduce_mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    data = a.data.mean(axis=axis, keepdims=keepdims)
    if axis is None:
        count = a.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = 1
        for ax in axes:
            count *= a.data.shape[ax]

    def backward(g):
        if not a.requires_grad:
            return
        gg = g / count
        if axis is not None and not keepdims:
            axes = axis if isinstance(axis, tuple) else (axis,)
            for ax in sorted(ax % a.data.ndim for ax in axes):
                gg = np.expand_dims(gg, ax)
        a.accumulate(np.broadcast_to(gg, a.data.shape).copy())

    return _make(np.asarray(data), "mean", (a,), backward)


def concat(tensors: Iterable, axis: int = -1) -> Tensor:
    ts = [_as_tensor(t) for t in tensors]
    if not ts:
        raise ContractError("concat needs at least one tensor")
    data = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.data.shape[axis] for t in ts]

    def backward(g):
        splits = np.cumsum(sizes)[:-1]
        for t, piece in zip(ts, np.split(g, splits, axis=axis)):
            if t.requires_grad:
                t.accumulate(piece)

    return _make(data, "concat", tuple(ts), backward)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    shape = tuple(shape)
    data = a.data.reshape(shape)

    def backward(g):
        if a.requires_grad:
            a.accumulate(g.reshape(a.data.shape))

    return _make(data, "reshape", (a,), backward)


def col(a, k: int) -> Tensor:
    """Select index k of the last axis, dropping that axis."""
    a = _as_tensor(a)
    data = a.data[..., k]

    def backward(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[..., k] = g
            a.accumulate(full)

    return _make(data, "col", (a,), backward)


def bce(p, target) -> Tensor:
    """Elementwise binary cross entropy -[t log p + (1-t) log(1-p)].

    p is clamped to [1e-7, 1 - 1e-7]; the gradient passes through at the
    clamped value so saturated entries still receive a finite, bounded-push
    signal. target is treated as a constant.
    """
    p = _as_tensor(p)
    t = np.asarray(target, dtype=p.data.dtype)
    if t.shape != p.data.shape:
        raise DimensionError(f"bce target shape {t.shape} != input shape {p.data.shape}")
    pc = np.clip(p.data, _BCE_EPS, 1.0 - _BCE_EPS)
    data = -(t * np.log(pc) + (1.0 - t) * np.log1p(-pc))

    def backward(g):
        if p.requires_grad:
            p.accumulate(g * (-t / pc + (1.0 - t) / (1.0 - pc)))

    return _make(data, "bce", (p,), backward)


# ---------------------------------------------------------------------------
# composites and utilities


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then apply a learnable affine map."""
    return channel_norm(x, gain, bias, axes=(-1,), eps=eps)


def channel_norm(x: Tensor, gain: Tensor, bias: Tensor, axes: Tuple[int, ...], eps: float = 1e-5) -> Tensor:
    """Zero-mean unit-variance over the given axes, then a learnable affine
    map (gain and bias broadcast against the untouched axes)."""
    mu = reduce_mean(x, axis=axes, keepdims=True)
    xc = sub(x, mu)
    var = reduce_mean(mul(xc, xc), axis=axes, keepdims=True)
    y = div(xc, sqrt(add(var, eps)))
    return add(mul(y, gain), bias)


def fd_gradients(f: Callable, xs, eps: float = 1e-3):
    """Central finite-difference gradients of a scalar function.

    ``xs`` is one array (f takes the array, one gradient comes back) or a
    list of arrays (f takes the list, a list comes back).  f must be a
    pure function of the given arrays. Used as the independent oracle
    against which analytic gradients are certified.
    """
    single = isinstance(xs, np.ndarray)
    arrays = [np.array(xs, dtype=np.float64)] if single else [np.array(x, dtype=np.float64) for x in xs]
    evaluate = (lambda: float(f(arrays[0]))) if single else (lambda: float(f(arrays)))
    grads = []
    for x in arrays:
        g = np.zeros(x.shape, dtype=np.float64)
        for idx in np.ndindex(*x.shape):
            orig = x[idx]
            x[idx] = orig + eps
            hi = evaluate()
            x[idx] = orig - eps
            lo = evaluate()
            x[idx] = orig
            g[idx] = (hi - lo) / (2.0 * eps)
        grads.append(g)
    return grads[0] if single else grads


def relative_gradient_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """Worst-case |a - n| / max(|a|, |n|, floor) over all entries."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float((np.abs(a - n) / denom).max())
