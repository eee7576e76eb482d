"""Array-valued reverse-mode automatic differentiation.

Each :class:`Tensor` remembers its parents and a closure that pushes its
gradient back to them.  :func:`backward` walks the graph in reverse
topological order.  Only the operations the networks in this package need
are implemented.
"""
from __future__ import annotations

import math

import numpy as np

_GELU_C = math.sqrt(2.0 / math.pi)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (reverses numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward", "op")

    def __init__(self, data, _parents=(), op="", grad=None):
        self.data = np.asarray(data, dtype=float)
        self.grad = grad
        self._parents = _parents
        self._backward = None
        self.op = op

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self.op!r})"

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=float)
        else:
            # in place: parameter leaves carry views into a flat gradient buffer
            self.grad += g

    # --- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        out = Tensor(self.data + other.data, (self, other), "+")

        def back(g):
            self._accumulate(_unbroadcast(g, self.data.shape))
            other._accumulate(_unbroadcast(g, other.data.shape))

        out._backward = back
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.data, (self,), "neg")
        out._backward = lambda g: self._accumulate(-g)
        return out

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)
        out = Tensor(self.data * other.data, (self, other), "*")

        def back(g):
            self._accumulate(_unbroadcast(g * other.data, self.data.shape))
            other._accumulate(_unbroadcast(g * self.data, other.data.shape))

        out._backward = back
        return out

    __rmul__ = __mul__

    def __pow__(self, k):
        if not isinstance(k, (int, float)):
            raise TypeError("only constant exponents are supported")
        out = Tensor(self.data**k, (self,), f"**{k}")
        out._backward = lambda g: self._accumulate(g * k * self.data ** (k - 1))
        return out

    def __matmul__(self, other):
        other = as_tensor(other)
        out = Tensor(self.data @ other.data, (self, other), "@")

        def back(g):
            a, b = self.data, other.data
            if a.ndim == 1 and b.ndim == 1:
                self._accumulate(g * b)
                other._accumulate(g * a)
                return
            if a.ndim == 1:
                self._accumulate(b @ g)
                other._accumulate(np.outer(a, g))
                return
            if b.ndim == 1:
                self._accumulate(np.outer(g, b))
                other._accumulate(a.T @ g)
                return
            self._accumulate(g @ b.T)
            other._accumulate(a.T @ g)

        out._backward = back
        return out

    @property
    def T(self):
        out = Tensor(self.data.T, (self,), "T")
        out._backward = lambda g: self._accumulate(g.T)
        return out

    def reshape(self, *shape):
        out = Tensor(self.data.reshape(*shape), (self,), "reshape")
        out._backward = lambda g: self._accumulate(g.reshape(self.data.shape))
        return out

    # --- reductions ---------------------------------------------------------

    def sum(self, axis=None):
        out = Tensor(self.data.sum(axis=axis), (self,), "sum")

        def back(g):
            if axis is not None:
                g = np.expand_dims(g, axis)
            self._accumulate(np.broadcast_to(g, self.data.shape))

        out._backward = back
        return out

    def mean(self):
        return self.sum() * (1.0 / self.data.size)

    # --- activations --------------------------------------------------------

    def relu(self):
        mask = self.data > 0
        out = Tensor(self.data * mask, (self,), "relu")
        out._backward = lambda g: self._accumulate(g * mask)
        return out

    def gelu(self):
        """Tanh approximation of GELU."""
        x = self.data
        inner = _GELU_C * (x + 0.044715 * x**3)
        t = np.tanh(inner)
        out = Tensor(0.5 * x * (1.0 + t), (self,), "gelu")

        def back(g):
            d_inner = _GELU_C * (1.0 + 3 * 0.044715 * x * x)
            self._accumulate(g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * d_inner))

        out._backward = back
        return out


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def backward(root: Tensor) -> None:
    """Populate ``.grad`` on every tensor that ``root`` depends on.

    ``root`` is seeded with ones; for a scalar loss that is d(loss)/d(loss).
    Existing gradients on leaves are accumulated into, not replaced.
    """
    order, seen = [], set()
    stack = [(root, False)]
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
            if id(p) not in seen:
                stack.append((p, False))

    root._accumulate(np.ones_like(root.data))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
