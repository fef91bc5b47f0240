"""Minimal reverse-mode autodiff over dense float64 arrays.

The graph is a tape rebuilt on every forward pass: each Tensor records its
parent tensors and a closure that maps the output gradient to parent
gradient contributions.  Gradients accumulate additively over fan-out and
the backward pass visits each node exactly once in reverse topological
order.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    pass


class Tensor:
    """Dense float64 array participating in the differentiation graph."""

    __slots__ = ("data", "grad", "parents", "vjp", "requires_grad")

    def __init__(self, data, parents=(), vjp=None, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self.vjp = vjp
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def detach(self):
        return Tensor(self.data.copy())

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"


class Parameter(Tensor):
    """Trainable tensor with a unique name inside one network."""

    __slots__ = ("name",)

    def __init__(self, data, name):
        super().__init__(data, requires_grad=True)
        self.name = name


def constant(data):
    return Tensor(data)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_same_shape(op, a, b):
    if a.data.shape != b.data.shape:
        raise ShapeError(f"{op}: shape mismatch {a.data.shape} vs {b.data.shape}")


# ---------------------------------------------------------------------------
# primitives


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: shape mismatch {a.data.shape} vs {b.data.shape}")
    out = Tensor(a.data @ b.data, (a, b))
    out.vjp = lambda g: (g @ b.data.T, a.data.T @ g)
    return out


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape == b.data.shape:
        out = Tensor(a.data + b.data, (a, b))
        out.vjp = lambda g: (g, g)
    elif a.data.ndim == 2 and b.data.shape == (a.data.shape[1],):
        # matrix + row-vector bias, broadcast over rows
        out = Tensor(a.data + b.data, (a, b))
        out.vjp = lambda g: (g, g.sum(axis=0))
    elif b.data.ndim == 0:
        out = Tensor(a.data + b.data, (a, b))
        out.vjp = lambda g: (g, g.sum())
    else:
        raise ShapeError(f"add: shape mismatch {a.data.shape} vs {b.data.shape}")
    return out


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape == b.data.shape:
        out = Tensor(a.data - b.data, (a, b))
        out.vjp = lambda g: (g, -g)
    elif b.data.ndim == 0:
        out = Tensor(a.data - b.data, (a, b))
        out.vjp = lambda g: (g, -g.sum())
    else:
        raise ShapeError(f"sub: shape mismatch {a.data.shape} vs {b.data.shape}")
    return out


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same_shape("mul", a, b)
    out = Tensor(a.data * b.data, (a, b))
    out.vjp = lambda g: (g * b.data, g * a.data)
    return out


def smul(a, c):
    a = _as_tensor(a)
    c = float(c)
    out = Tensor(a.data * c, (a,))
    out.vjp = lambda g: (g * c,)
    return out


def tsum(a):
    a = _as_tensor(a)
    out = Tensor(a.data.sum(), (a,))
    out.vjp = lambda g: (np.full_like(a.data, float(g)),)
    return out


def tmean(a):
    a = _as_tensor(a)
    n = a.data.size
    out = Tensor(a.data.mean(), (a,))
    out.vjp = lambda g: (np.full_like(a.data, float(g) / n),)
    return out


def tlog(a):
    a = _as_tensor(a)
    out = Tensor(np.log(a.data), (a,))
    out.vjp = lambda g: (g / a.data,)
    return out


def square(a):
    a = _as_tensor(a)
    out = Tensor(a.data ** 2, (a,))
    out.vjp = lambda g: (2.0 * a.data * g,)
    return out


def norm_sq(a):
    """Sum of squared entries (scalar)."""
    return tsum(square(a))


def clamp(a, lo, hi):
    a = _as_tensor(a)
    out = Tensor(np.clip(a.data, lo, hi), (a,))
    mask = (a.data > lo) & (a.data < hi)
    out.vjp = lambda g: (g * mask,)
    return out


def relu(a):
    a = _as_tensor(a)
    out = Tensor(np.maximum(a.data, 0.0), (a,))
    out.vjp = lambda g: (g * (a.data > 0.0),)
    return out


def requ(a):
    a = _as_tensor(a)
    pos = np.maximum(a.data, 0.0)
    out = Tensor(pos ** 2, (a,))
    out.vjp = lambda g: (g * 2.0 * pos,)
    return out


def recu(a):
    a = _as_tensor(a)
    pos = np.maximum(a.data, 0.0)
    out = Tensor(pos ** 3, (a,))
    out.vjp = lambda g: (g * 3.0 * pos ** 2,)
    return out


def leaky_relu(a, slope=0.01):
    a = _as_tensor(a)
    out = Tensor(np.where(a.data > 0.0, a.data, slope * a.data), (a,))
    out.vjp = lambda g: (g * np.where(a.data > 0.0, 1.0, slope),)
    return out


def sigmoid(a):
    a = _as_tensor(a)
    # evaluate via exp(-|x|) so neither branch overflows
    t = np.exp(-np.abs(a.data))
    s = np.where(a.data >= 0.0, 1.0 / (1.0 + t), t / (1.0 + t))
    out = Tensor(s, (a,))
    out.vjp = lambda g: (g * s * (1.0 - s),)
    return out


def reshape(a, shape):
    a = _as_tensor(a)
    old = a.data.shape
    out = Tensor(a.data.reshape(shape), (a,))
    out.vjp = lambda g: (g.reshape(old),)
    return out


# ---------------------------------------------------------------------------
# backward pass


def _toposort(root):
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad:
                stack.append((p, False))
    return order  # children before parents when reversed below


def backward(root):
    """Accumulate gradients of a scalar root into .grad of reachable tensors."""
    if root.data.size != 1:
        raise ValueError(f"backward: root must be scalar, got shape {root.data.shape}")
    order = _toposort(root)
    for node in order:
        node.grad = None
    root.grad = np.ones_like(root.data)
    for node in reversed(order):
        if node.vjp is None or node.grad is None:
            continue
        grads = node.vjp(node.grad)
        for p, g in zip(node.parents, grads):
            if not p.requires_grad:
                continue
            if p.grad is None:
                p.grad = np.zeros_like(p.data)
            p.grad += g


def gradients(root, params):
    """Gradient of scalar root with respect to each parameter, as a dict."""
    backward(root)
    out = {}
    for p in params:
        out[p.name] = p.grad.copy() if p.grad is not None else np.zeros_like(p.data)
    return out


def grad_check(f, point, h=1e-5):
    """Compare backward() gradients of f at point to central finite differences.

    f maps a Tensor to a scalar Tensor.  Returns the worst relative error,
    with a unit floor on the denominator to keep zero gradients meaningful.
    """
    x = Tensor(np.asarray(point, dtype=np.float64), requires_grad=True)
    out = f(x)
    backward(out)
    analytic = x.grad.copy() if x.grad is not None else np.zeros_like(x.data)

    numeric = np.zeros_like(x.data)
    flat = x.data.reshape(-1)
    nflat = numeric.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = float(f(Tensor(x.data)).data)
        flat[i] = orig - h
        lo = float(f(Tensor(x.data)).data)
        flat[i] = orig
        nflat[i] = (hi - lo) / (2.0 * h)

    denom = np.maximum(np.abs(numeric), 1.0)
    return float(np.max(np.abs(analytic - numeric) / denom))
