"""Minimal reverse-mode engine over numpy arrays.

Losses are written once against the helpers below and run in two modes: on
plain ndarrays everything evaluates eagerly to ndarrays, and on ``Node``
inputs the same expressions build a graph whose :func:`backward` pass
accumulates vector-Jacobian products.  Only the handful of operations the
loss functionals need is implemented.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient down to ``shape`` after numpy broadcasting."""
    grad = np.asarray(grad)
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Node:
    """A value in the graph plus the links needed for backpropagation."""

    __slots__ = ("value", "parents")
    __array_ufunc__ = None  # keep numpy from consuming Node operands

    def __init__(self, value, parents=()):
        self.value = np.asarray(value, dtype=float) if not np.isscalar(value) else float(value)
        self.parents = parents

    @property
    def shape(self):
        return np.shape(self.value)

    def __repr__(self):
        return f"Node(shape={np.shape(self.value)})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return Node(-self.value, ((self, lambda g: -g),))

    def __sub__(self, other):
        return add(self, -other if isinstance(other, Node) else np.negative(other))

    def __rsub__(self, other):
        return add(-self, other)

    def __mul__(self, other):
        return multiply(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Node):
            raise TypeError("division by a Node is not supported")
        return multiply(self, 1.0 / np.asarray(other, dtype=float))

    def __pow__(self, exponent):
        if exponent != 2:
            raise TypeError("only squaring is supported")
        return square(self)


def value_of(x):
    """The plain array behind either a Node or an ndarray/scalar."""
    return x.value if isinstance(x, Node) else x


def add(a, b):
    if not isinstance(a, Node) and not isinstance(b, Node):
        return np.add(a, b)
    av, bv = value_of(a), value_of(b)
    out = np.add(av, bv)
    parents = []
    if isinstance(a, Node):
        parents.append((a, lambda g: _unbroadcast(g, np.shape(av))))
    if isinstance(b, Node):
        parents.append((b, lambda g: _unbroadcast(g, np.shape(bv))))
    return Node(out, tuple(parents))


def multiply(a, b):
    if not isinstance(a, Node) and not isinstance(b, Node):
        return np.multiply(a, b)
    av, bv = value_of(a), value_of(b)
    out = np.multiply(av, bv)
    parents = []
    if isinstance(a, Node):
        parents.append((a, lambda g: _unbroadcast(g * bv, np.shape(av))))
    if isinstance(b, Node):
        parents.append((b, lambda g: _unbroadcast(g * av, np.shape(bv))))
    return Node(out, tuple(parents))


def subtract(a, b):
    if isinstance(a, Node) or isinstance(b, Node):
        return add(a, multiply(b, -1.0) if isinstance(b, Node) else np.negative(b))
    return np.subtract(a, b)


def square(x):
    if not isinstance(x, Node):
        return np.square(x)
    return Node(np.square(x.value), ((x, lambda g: g * (2.0 * x.value)),))


def nsum(x, axis=None):
    if not isinstance(x, Node):
        return np.sum(x, axis=axis)
    v = x.value
    out = np.sum(v, axis=axis)

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g, np.shape(v)).copy()
        return np.broadcast_to(np.expand_dims(g, axis), np.shape(v)).copy()

    return Node(out, ((x, vjp),))


def nmean(x, axis=None):
    v = value_of(x)
    count = v.size if axis is None else v.shape[axis]
    return nsum(x, axis=axis) / count if isinstance(x, Node) else np.mean(v, axis=axis)


def jacobian_trace(jac):
    """Divergence from a (n, d, d) jacobian batch: sum of the diagonal."""
    if not isinstance(jac, Node):
        return np.einsum("nkk->n", jac)
    v = jac.value

    def vjp(g):
        out = np.zeros_like(v)
        idx = np.arange(v.shape[1])
        out[:, idx, idx] = g[:, None]
        return out

    return Node(np.einsum("nkk->n", v), ((jac, vjp),))


def backward(root: Node) -> dict[int, np.ndarray]:
    """Accumulated gradients of a scalar Node, keyed by ``id`` of each Node.

    Pure with respect to the graph: running it twice on the same root gives
    identical results.
    """
    if not isinstance(root, Node):
        raise TypeError("backward expects a Node")
    if np.shape(root.value) != ():
        raise ValueError("backward expects a scalar root")

    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))

    grads: dict[int, np.ndarray] = {id(root): np.asarray(1.0)}
    for node in reversed(order):
        g = grads.get(id(node))
        if g is None:
            continue
        for parent, vjp in node.parents:
            contrib = vjp(g)
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + contrib
            else:
                grads[key] = np.asarray(contrib)
    return grads
