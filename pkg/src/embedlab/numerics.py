"""Reverse-mode automatic differentiation over dense numpy arrays.

Everything is computed and accumulated in float64. Each op records a
closure that routes the upstream gradient to its operands; ``Tensor.backward``
walks the graph once in reverse topological order. NaN/Inf anywhere is
treated as an error state, not a value.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "NumericsError",
    "ShapeError",
    "Tensor",
    "as_tensor",
    "matmul",
    "softmax",
    "gelu",
    "layer_norm",
    "stack",
    "gather_rows",
    "select_positions",
    "seeded_rng",
]


class NumericsError(ValueError):
    """Non-finite values or a violated numeric contract."""


class ShapeError(NumericsError):
    """Operand shapes do not satisfy an op's precondition."""


def seeded_rng(seed: int) -> np.random.Generator:
    """Deterministic generator used everywhere randomness is needed."""
    return np.random.Generator(np.random.PCG64(seed))


def _check_finite(data: np.ndarray, op: str) -> None:
    # a single-pass sum is finite iff every element is (inf-inf yields nan)
    if not np.isfinite(data.sum()):
        raise NumericsError(f"non-finite values produced by {op}")


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """A node in the computation graph: value, gradient slot, parents."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None, _op: str = "leaf"):
        self.data = np.asarray(data, dtype=np.float64)
        _check_finite(self.data, _op)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = _parents
        self._backward = _backward

    # -- introspection -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- graph ---------------------------------------------------------

    def backward(self) -> None:
        """Populate .grad on every reachable tensor with requires_grad.

        The loss must be scalar. Each node's backward closure runs exactly
        once, after all of its consumers.
        """
        if self.data.size != 1:
            raise NumericsError("backward() requires a scalar loss")

        order: list[Tensor] = []
        seen: set[int] = set()
        stack_: list[tuple[Tensor, bool]] = [(self, False)]
        while stack_:
            node, processed = stack_.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack_.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack_.append((p, False))

        for node in order:
            node.grad = None
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad += grad

    # -- elementwise arithmetic -----------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        out_data = self.data + other.data

        def bwd(g):
            if self.requires_grad or self._parents:
                self._accumulate(_unbroadcast(g, self.shape))
            if other.requires_grad or other._parents:
                other._accumulate(_unbroadcast(g, other.shape))

        return Tensor(out_data, _parents=(self, other), _backward=bwd, _op="add")

    __radd__ = __add__

    def __mul__(self, other):
        other = as_tensor(other)
        out_data = self.data * other.data

        def bwd(g):
            if self.requires_grad or self._parents:
                self._accumulate(_unbroadcast(g * other.data, self.shape))
            if other.requires_grad or other._parents:
                other._accumulate(_unbroadcast(g * self.data, other.shape))

        return Tensor(out_data, _parents=(self, other), _backward=bwd, _op="mul")

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __truediv__(self, other):
        return self * as_tensor(other).power(-1.0)

    def power(self, exponent: float):
        """Elementwise x**p for a fixed scalar exponent."""
        out_data = self.data ** exponent

        def bwd(g):
            self._accumulate(g * exponent * self.data ** (exponent - 1.0))

        return Tensor(out_data, _parents=(self,), _backward=bwd, _op="power")

    def exp(self):
        out_data = np.exp(self.data)
        _check_finite(out_data, "exp")

        def bwd(g):
            self._accumulate(g * out_data)

        return Tensor(out_data, _parents=(self,), _backward=bwd, _op="exp")

    def log(self):
        out_data = np.log(self.data)

        def bwd(g):
            self._accumulate(g / self.data)

        return Tensor(out_data, _parents=(self,), _backward=bwd, _op="log")

    # -- reductions ------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        out_data = self.data.sum(axis=axis, keepdims=keepdims)

        def bwd(g):
            if axis is None:
                grad = np.broadcast_to(g, self.shape)
            else:
                if not keepdims:
                    g = np.expand_dims(g, axis)
                grad = np.broadcast_to(g, self.shape)
            self._accumulate(np.ascontiguousarray(grad))

        return Tensor(out_data, _parents=(self,), _backward=bwd, _op="sum")

    def mean(self, axis=None, keepdims: bool = False):
        if axis is None:
            n = self.data.size
        else:
            n = self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # -- shape manipulation ----------------------------------------------

    def reshape(self, *shape):
        out_data = self.data.reshape(*shape)
        src_shape = self.shape

        def bwd(g):
            self._accumulate(g.reshape(src_shape))

        return Tensor(out_data, _parents=(self,), _backward=bwd, _op="reshape")

    def transpose(self, *axes):
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inv = np.argsort(axes)
        out_data = self.data.transpose(axes)

        def bwd(g):
            self._accumulate(np.ascontiguousarray(g.transpose(inv)))

        return Tensor(out_data, _parents=(self,), _backward=bwd, _op="transpose")

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=np.float64))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with numpy-style stacking over leading axes."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs >=2-d operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} x {b.shape}")
    out_data = np.matmul(a.data, b.data)

    def bwd(g):
        if a.requires_grad or a._parents:
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            a._accumulate(_unbroadcast(ga, a.shape))
        if b.requires_grad or b._parents:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            b._accumulate(_unbroadcast(gb, b.shape))

    return Tensor(out_data, _parents=(a, b), _backward=bwd, _op="matmul")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax along `axis` (max-subtracted)."""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        dot = (g * out_data).sum(axis=axis, keepdims=True)
        x._accumulate(out_data * (g - dot))

    return Tensor(out_data, _parents=(x,), _backward=bwd, _op="softmax")


# tanh-form GELU; the constant is sqrt(2/pi)
_GELU_C = 0.7978845608028654


def gelu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    v = x.data
    inner = _GELU_C * (v + 0.044715 * v ** 3)
    t = np.tanh(inner)
    out_data = 0.5 * v * (1.0 + t)

    def bwd(g):
        d_inner = _GELU_C * (1.0 + 3 * 0.044715 * v ** 2)
        grad = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t ** 2) * d_inner
        x._accumulate(g * grad)

    return Tensor(out_data, _parents=(x,), _backward=bwd, _op="gelu")


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = (var + eps).power(-0.5)
    return centered * inv_std * gain + bias


def stack(tensors: list[Tensor], axis: int = 0) -> Tensor:
    """Stack same-shape tensors along a new axis."""
    tensors = [as_tensor(t) for t in tensors]
    out_data = np.stack([t.data for t in tensors], axis=axis)

    def bwd(g):
        pieces = np.moveaxis(g, axis, 0)
        for t, piece in zip(tensors, pieces):
            t._accumulate(np.ascontiguousarray(piece))

    return Tensor(out_data, _parents=tuple(tensors), _backward=bwd, _op="stack")


def gather_rows(table: Tensor, ids: np.ndarray) -> Tensor:
    """table[ids] for an integer index array; rows may repeat."""
    table = as_tensor(table)
    ids = np.asarray(ids)
    out_data = table.data[ids]

    def bwd(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        table._accumulate(gt)

    return Tensor(out_data, _parents=(table,), _backward=bwd, _op="gather_rows")


def select_positions(x: Tensor, positions: np.ndarray) -> Tensor:
    """Pick x[b, positions[b], :] from a [B, T, d] tensor -> [B, d]."""
    x = as_tensor(x)
    positions = np.asarray(positions)
    batch_idx = np.arange(x.shape[0])
    out_data = x.data[batch_idx, positions]

    def bwd(g):
        gx = np.zeros_like(x.data)
        gx[batch_idx, positions] = g
        x._accumulate(gx)

    return Tensor(out_data, _parents=(x,), _backward=bwd, _op="select_positions")
