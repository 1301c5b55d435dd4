"""Reverse-mode automatic differentiation over numpy arrays.

A ``Tensor`` wraps a float64 ndarray and records the operations applied to
it.  Calling :meth:`Tensor.backward` on a scalar result walks the recorded
graph once in reverse topological order and accumulates vector-Jacobian
products into every reachable leaf with ``requires_grad=True``.

The op set is deliberately small: exactly what the rendering, field and
loss pipelines need.  Heavier fused operations (trilinear grid lookup,
volumetric compositing, plane fitting) register themselves through
:func:`make_op` with hand-written vjps.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor", "as_tensor", "make_op",
    "add", "sub", "mul", "div", "neg", "pow_", "matmul",
    "sum_", "mean", "exp", "log", "sqrt", "sin", "cos", "tanh",
    "softplus", "sigmoid", "maximum", "minimum", "clip",
    "concatenate", "stack", "reshape", "getitem", "norm", "dot",
]


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """A float64 array plus the tape bookkeeping needed for backward()."""

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, value, requires_grad=False, parents=(), vjp=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = parents
        self._vjp = vjp

    # -- basic introspection -------------------------------------------------
    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def size(self):
        return self.value.size

    def __repr__(self):
        return f"Tensor({self.value!r}, requires_grad={self.requires_grad})"

    def detach(self) -> "Tensor":
        return Tensor(self.value)

    def zero_grad(self):
        self.grad = None

    # -- operators -----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, expo):
        return pow_(self, expo)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    # -- backward ------------------------------------------------------------
    def backward(self, seed=None):
        """Accumulate gradients of this (scalar) tensor into the leaves."""
        if seed is None:
            if self.value.size != 1:
                raise ValueError("backward() without a seed needs a scalar")
            seed = np.ones_like(self.value)
        order = _topo_order(self)
        grads = {id(self): np.asarray(seed, dtype=np.float64)}
        for node in order:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._vjp is not None:
                parent_grads = node._vjp(g)
                for parent, pg in zip(node._parents, parent_grads):
                    if pg is None or not parent.requires_grad:
                        continue
                    prev = grads.get(id(parent))
                    grads[id(parent)] = pg if prev is None else prev + pg
            elif node.requires_grad:
                node.grad = g if node.grad is None else node.grad + g


def _topo_order(root: Tensor):
    """Reverse topological order of the graph reachable from `root`."""
    order, visited, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return list(reversed(order))


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def make_op(value, parents, vjp) -> Tensor:
    """Create a tape node; prunes the recording when no parent needs grads."""
    parents = tuple(as_tensor(p) for p in parents)
    rg = any(p.requires_grad for p in parents)
    if not rg:
        return Tensor(value)
    return Tensor(value, requires_grad=True, parents=parents, vjp=vjp)


# ---------------------------------------------------------------------------
# elementwise and structural ops
# ---------------------------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return make_op(a.value + b.value, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return make_op(a.value - b.value, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return make_op(a.value * b.value, (a, b),
                   lambda g: (_unbroadcast(g * b.value, a.shape),
                              _unbroadcast(g * a.value, b.shape)))


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return make_op(a.value / b.value, (a, b),
                   lambda g: (_unbroadcast(g / b.value, a.shape),
                              _unbroadcast(-g * a.value / b.value**2, b.shape)))


def neg(a):
    a = as_tensor(a)
    return make_op(-a.value, (a,), lambda g: (-g,))


def pow_(a, expo):
    a = as_tensor(a)
    e = float(expo)
    return make_op(a.value**e, (a,), lambda g: (g * e * a.value**(e - 1),))


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def vjp(g):
        ga = g @ np.swapaxes(b.value, -1, -2)
        gb = np.swapaxes(a.value, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return make_op(a.value @ b.value, (a, b), vjp)


def sum_(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out = a.value.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return make_op(out, (a,), vjp)


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    if axis is None:
        n = a.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        n = int(np.prod([a.shape[ax] for ax in axes]))
    return sum_(a, axis=axis, keepdims=keepdims) * (1.0 / n)


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.value)
    return make_op(out, (a,), lambda g: (g * out,))


def log(a):
    a = as_tensor(a)
    return make_op(np.log(a.value), (a,), lambda g: (g / a.value,))


def sqrt(a):
    a = as_tensor(a)
    out = np.sqrt(a.value)
    return make_op(out, (a,), lambda g: (g * 0.5 / out,))


def sin(a):
    a = as_tensor(a)
    return make_op(np.sin(a.value), (a,), lambda g: (g * np.cos(a.value),))


def cos(a):
    a = as_tensor(a)
    return make_op(np.cos(a.value), (a,), lambda g: (-g * np.sin(a.value),))


def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.value)
    return make_op(out, (a,), lambda g: (g * (1.0 - out**2),))


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a):
    a = as_tensor(a)
    out = _sigmoid(a.value)
    return make_op(out, (a,), lambda g: (g * out * (1.0 - out),))


def _softplus(x):
    # max(x, 0) + log1p(exp(-|x|)) is overflow-safe
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def softplus(a):
    a = as_tensor(a)
    return make_op(_softplus(a.value), (a,), lambda g: (g * _sigmoid(a.value),))


def maximum(a, b):
    a, b = as_tensor(a), as_tensor(b)
    mask = a.value >= b.value
    return make_op(np.maximum(a.value, b.value), (a, b),
                   lambda g: (_unbroadcast(g * mask, a.shape),
                              _unbroadcast(g * ~mask, b.shape)))


def minimum(a, b):
    a, b = as_tensor(a), as_tensor(b)
    mask = a.value <= b.value
    return make_op(np.minimum(a.value, b.value), (a, b),
                   lambda g: (_unbroadcast(g * mask, a.shape),
                              _unbroadcast(g * ~mask, b.shape)))


def clip(a, lo, hi):
    a = as_tensor(a)
    mask = (a.value >= lo) & (a.value <= hi)
    return make_op(np.clip(a.value, lo, hi), (a,), lambda g: (g * mask,))


def concatenate(parts, axis=0):
    parts = [as_tensor(p) for p in parts]
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.ascontiguousarray(piece)
                     for piece in np.split(g, splits, axis=axis))

    return make_op(np.concatenate([p.value for p in parts], axis=axis),
                   parts, vjp)


def stack(parts, axis=0):
    parts = [as_tensor(p) for p in parts]

    def vjp(g):
        return tuple(np.ascontiguousarray(s) for s in np.moveaxis(g, axis, 0))

    return make_op(np.stack([p.value for p in parts], axis=axis), parts, vjp)


def reshape(a, shape):
    a = as_tensor(a)
    return make_op(a.value.reshape(shape), (a,),
                   lambda g: (g.reshape(a.shape),))


def getitem(a, idx):
    a = as_tensor(a)

    def vjp(g):
        out = np.zeros(a.shape)
        np.add.at(out, idx, g)
        return (out,)

    return make_op(a.value[idx], (a,), vjp)


def dot(a, b, axis=-1, keepdims=False):
    return sum_(mul(a, b), axis=axis, keepdims=keepdims)


def norm(a, axis=-1, keepdims=False, eps=0.0):
    sq = sum_(mul(a, a), axis=axis, keepdims=keepdims)
    if eps:
        sq = sq + eps
    return sqrt(sq)
