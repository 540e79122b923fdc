"""Reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps an ndarray. Operations record their parents and a backward
closure; calling backward() on a recorded scalar walks the graph in reverse
topological order and accumulates gradients into the ``grad`` field of every
tensor created with requires_grad=True. Inside a ``no_grad()`` block nothing
is recorded, so inference costs no graph memory.

Everything is float32 or float64; the dtype of an operation follows numpy's
promotion of its inputs. Python scalars mixed into an expression are treated
as constants.
"""

from __future__ import annotations

import contextlib

import numpy as np

from ..errors import RangeError, ShapeError, StateError

_grad_enabled = True

_FLOAT_DTYPES = (np.float32, np.float64)


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference mode)."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward_fn = None

    # -- graph construction -------------------------------------------------

    @staticmethod
    def _make(data, parents, backward_fn):
        """Create an op result; records the graph only when it matters."""
        out = Tensor(data)
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward_fn = backward_fn
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    # -- backward ------------------------------------------------------------

    def backward(self):
        """Populate gradients of all reachable requires_grad tensors.

        The receiver must be a scalar produced by a recorded forward pass.
        Gradients accumulate into ``grad`` (call zero_grad on parameters
        first if fresh gradients are wanted).
        """
        if self._backward_fn is None:
            raise StateError("backward called without a recorded forward pass")
        if self.data.size != 1:
            raise StateError(f"backward requires a scalar output, got shape {self.data.shape}")

        # Iterative topological sort over recorded nodes.
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in visited or node._backward_fn is None:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                stack.append((parent, False))

        flowing: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            grad_out = flowing.pop(id(node), None)
            if grad_out is None:
                continue
            for parent, grad_in in zip(node._parents, node._backward_fn(grad_out)):
                if grad_in is None:
                    continue
                if parent._backward_fn is None:
                    # Leaf: accumulate directly into .grad when requested.
                    if parent.requires_grad:
                        if parent.grad is None:
                            parent.grad = np.array(grad_in, copy=True)
                        else:
                            parent.grad = parent.grad + grad_in
                    continue
                key = id(parent)
                if key in flowing:
                    flowing[key] = flowing[key] + grad_in
                else:
                    flowing[key] = grad_in

    # -- operator sugar --------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(_coerce(other, self), -1.0))

    def __rsub__(self, other):
        return add(_coerce(other, self), mul(self, -1.0))

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise ShapeError("tensor/tensor division is not supported; divide by a scalar")
        return mul(self, 1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{flag})"


def _coerce(value, like: Tensor) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=like.data.dtype))


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcasted gradient back to the original operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# -- primitive operations -------------------------------------------------------


def add(a: Tensor, b) -> Tensor:
    a = a if isinstance(a, Tensor) else Tensor(a)
    b = _coerce(b, a)
    out = a.data + b.data

    def backward(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return Tensor._make(out, (a, b), backward)


def mul(a: Tensor, b) -> Tensor:
    a = a if isinstance(a, Tensor) else Tensor(a)
    b = _coerce(b, a)
    out = a.data * b.data

    def backward(g):
        return (_unbroadcast(g * b.data, a.data.shape),
                _unbroadcast(g * a.data, b.data.shape))

    return Tensor._make(out, (a, b), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    out = a.data @ b.data

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return Tensor._make(out, (a, b), backward)


def reshape(t: Tensor, shape) -> Tensor:
    original = t.data.shape
    out = t.data.reshape(shape)

    def backward(g):
        return (g.reshape(original),)

    return Tensor._make(out, (t,), backward)


def transpose(t: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    out = t.data.transpose(axes)

    def backward(g):
        return (g.transpose(inverse),)

    return Tensor._make(out, (t,), backward)


def narrow(t: Tensor, axis: int, start: int, length: int) -> Tensor:
    index = [slice(None)] * t.data.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)
    out = t.data[index]

    def backward(g):
        full = np.zeros_like(t.data)
        full[index] = g
        return (full,)

    return Tensor._make(out, (t,), backward)


def concat(tensors: list[Tensor], axis: int) -> Tensor:
    sizes = [t.data.shape[axis] for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        pieces = []
        index = [slice(None)] * g.ndim
        for i in range(len(sizes)):
            index[axis] = slice(offsets[i], offsets[i + 1])
            pieces.append(g[tuple(index)])
        return tuple(pieces)

    return Tensor._make(out, tuple(tensors), backward)


def relu(t: Tensor) -> Tensor:
    out = np.maximum(t.data, 0.0)

    def backward(g):
        return (g * (t.data > 0.0),)

    return Tensor._make(out, (t,), backward)


def sigmoid(t: Tensor) -> Tensor:
    x = t.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    expx = np.exp(x[~pos])
    out[~pos] = expx / (1.0 + expx)

    def backward(g):
        return (g * out * (1.0 - out),)

    return Tensor._make(out, (t,), backward)


def tanh(t: Tensor) -> Tensor:
    out = np.tanh(t.data)

    def backward(g):
        return (g * (1.0 - out * out),)

    return Tensor._make(out, (t,), backward)


def softmax(t: Tensor, axis: int = -1) -> Tensor:
    shifted = t.data - t.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - inner),)

    return Tensor._make(out, (t,), backward)


def log_clipped(t: Tensor, floor: float) -> Tensor:
    clipped = np.maximum(t.data, floor)
    out = np.log(clipped)

    def backward(g):
        return (np.where(t.data > floor, g / clipped, 0.0),)

    return Tensor._make(out, (t,), backward)


def gather_rows(t: Tensor, indices: np.ndarray) -> Tensor:
    """Pick one column per row of a 2-D tensor: out[i] = t[i, indices[i]]."""
    if t.data.ndim != 2:
        raise ShapeError(f"gather_rows expects a 2-D tensor, got {t.data.shape}")
    indices = np.asarray(indices)
    if indices.ndim != 1 or indices.shape[0] != t.data.shape[0]:
        raise ShapeError("one index per row required")
    if indices.min(initial=0) < 0 or indices.max(initial=0) >= t.data.shape[1]:
        raise RangeError("gather index out of range")
    rows = np.arange(t.data.shape[0])
    out = t.data[rows, indices]

    def backward(g):
        full = np.zeros_like(t.data)
        np.add.at(full, (rows, indices), g)
        return (full,)

    return Tensor._make(out, (t,), backward)


def sum_all(t: Tensor) -> Tensor:
    out = t.data.sum()

    def backward(g):
        return (np.broadcast_to(g, t.data.shape).astype(t.data.dtype, copy=True),)

    return Tensor._make(out, (t,), backward)


def mean_all(t: Tensor) -> Tensor:
    n = t.data.size
    out = t.data.mean()

    def backward(g):
        return (np.broadcast_to(g / n, t.data.shape).astype(t.data.dtype, copy=True),)

    return Tensor._make(out, (t,), backward)
