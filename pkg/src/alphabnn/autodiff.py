"""Reverse-mode automatic differentiation over dense float64 arrays.

Define-by-run: every operation records its parents and a closure that maps
the output adjoint to parent adjoints.  Graphs are rebuilt each step, which
matches the resampling of all stochastic quantities between gradient steps.

Conventions:
  - everything is float64
  - broadcasting follows numpy (trailing-dimension alignment, extent-1
    expansion); adjoints are summed back over broadcast dimensions
  - relu'(0) = 0
"""

from __future__ import annotations

import numpy as np


class Tensor:
    """A value in the computation graph.

    Leaves created with ``requires_grad=True`` are trainable parameters;
    ``backward`` populates their ``grad`` field and returns them in a map.
    """

    __slots__ = ("data", "parents", "_grad_fn", "requires_grad", "grad", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.parents = ()
        self._grad_fn = None
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        return float(self.data)

    def __repr__(self):
        tag = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag})"

    # operator sugar
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return subtract(self, _lift(other))

    def __rsub__(self, other):
        return subtract(_lift(other), self)

    def __mul__(self, other):
        return multiply(self, _lift(other))

    def __rmul__(self, other):
        return multiply(_lift(other), self)

    def __truediv__(self, other):
        return divide(self, _lift(other))

    def __rtruediv__(self, other):
        return divide(_lift(other), self)

    def __matmul__(self, other):
        return matmul(self, _lift(other))

    def __neg__(self):
        return negate(self)

    def __getitem__(self, key):
        return slice_(self, key)


def _lift(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data, parents, grad_fn):
    out = Tensor(data)
    if any(p.requires_grad or p._grad_fn is not None for p in parents):
        out.parents = tuple(parents)
        out._grad_fn = grad_fn
    return out


def _unbroadcast(grad, shape):
    """Sum an adjoint back down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class ShapeMismatchError(ValueError):
    pass


class DomainError(ValueError):
    pass


# ---------------------------------------------------------------------------
# elementwise ops


def add(a, b):
    a, b = _lift(a), _lift(b)
    data = _bcast_op("add_broadcast", a, b, np.add)
    return _node(data, (a, b), lambda g: (_unbroadcast(g, a.data.shape),
                                          _unbroadcast(g, b.data.shape)))


add_broadcast = add


def subtract(a, b):
    a, b = _lift(a), _lift(b)
    data = _bcast_op("subtract", a, b, np.subtract)
    return _node(data, (a, b), lambda g: (_unbroadcast(g, a.data.shape),
                                          _unbroadcast(-g, b.data.shape)))


def multiply(a, b):
    a, b = _lift(a), _lift(b)
    data = _bcast_op("multiply", a, b, np.multiply)
    return _node(data, (a, b), lambda g: (_unbroadcast(g * b.data, a.data.shape),
                                          _unbroadcast(g * a.data, b.data.shape)))


def divide(a, b):
    a, b = _lift(a), _lift(b)
    if np.any(b.data == 0.0):
        raise DomainError("divide: zero in denominator")
    data = _bcast_op("divide", a, b, np.divide)
    return _node(data, (a, b),
                 lambda g: (_unbroadcast(g / b.data, a.data.shape),
                            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)))


def _bcast_op(kind, a, b, fn):
    try:
        return fn(a.data, b.data)
    except ValueError as e:
        raise ShapeMismatchError(
            f"{kind}: incompatible shapes {a.data.shape} and {b.data.shape}") from e


def relu(x):
    x = _lift(x)
    mask = x.data > 0.0
    return _node(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def tanh(x):
    x = _lift(x)
    t = np.tanh(x.data)
    return _node(t, (x,), lambda g: (g * (1.0 - t * t),))


def exp(x):
    x = _lift(x)
    e = np.exp(x.data)
    return _node(e, (x,), lambda g: (g * e,))


def log(x):
    x = _lift(x)
    if np.any(x.data <= 0.0):
        raise DomainError("log: non-positive operand")
    return _node(np.log(x.data), (x,), lambda g: (g / x.data,))


def square(x):
    x = _lift(x)
    return _node(x.data * x.data, (x,), lambda g: (2.0 * g * x.data,))


def sqrt(x):
    x = _lift(x)
    if np.any(x.data < 0.0):
        raise DomainError("sqrt: negative operand")
    r = np.sqrt(x.data)
    return _node(r, (x,), lambda g: (g * 0.5 / r,))


def negate(x):
    x = _lift(x)
    return _node(-x.data, (x,), lambda g: (-g,))


# ---------------------------------------------------------------------------
# linear algebra / shape ops


def matmul(a, b):
    a, b = _lift(a), _lift(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeMismatchError(
            f"matmul: operands must be >= 2-d, got {a.data.shape} and {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeMismatchError(
            f"matmul: inner dimensions differ, {a.data.shape} vs {b.data.shape}")
    data = a.data @ b.data

    def grad_fn(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return (_unbroadcast(ga, a.data.shape), _unbroadcast(gb, b.data.shape))

    return _node(data, (a, b), grad_fn)


def transpose(x, axes=None):
    x = _lift(x)
    axes = tuple(axes) if axes is not None else tuple(reversed(range(x.data.ndim)))
    inv = np.argsort(axes)
    return _node(np.transpose(x.data, axes), (x,),
                 lambda g: (np.transpose(g, inv),))


def reshape(x, shape):
    x = _lift(x)
    orig = x.data.shape
    return _node(x.data.reshape(shape), (x,), lambda g: (g.reshape(orig),))


def broadcast_to(x, shape):
    x = _lift(x)
    data = np.broadcast_to(x.data, shape).copy()
    return _node(data, (x,), lambda g: (_unbroadcast(g, x.data.shape),))


def concat_axis(tensors, axis):
    tensors = [_lift(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeMismatchError(
            f"concat_axis: incompatible shapes {[t.data.shape for t in tensors]}") from e
    splits = np.cumsum(sizes)[:-1]

    def grad_fn(g):
        return tuple(np.split(g, splits, axis=axis))

    return _node(data, tensors, grad_fn)


def slice_(x, key):
    x = _lift(x)
    data = x.data[key]

    def grad_fn(g):
        full = np.zeros_like(x.data)
        np.add.at(full, key, g)
        return (full,)

    return _node(np.array(data, copy=True), (x,), grad_fn)


def gather(x, idx, axis=0):
    """Integer-index selection along one axis (duplicate indices allowed)."""
    x = _lift(x)
    idx = np.asarray(idx, dtype=np.intp)
    data = np.take(x.data, idx, axis=axis)

    def grad_fn(g):
        full = np.zeros_like(x.data)
        sl = (slice(None),) * axis
        np.add.at(full, sl + (idx,), g)
        return (full,)

    return _node(data, (x,), grad_fn)


# ---------------------------------------------------------------------------
# reductions


def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def sum_axis(x, axis=None, keepdims=False):
    x = _lift(x)
    ax = _norm_axis(axis, x.data.ndim)
    data = x.data.sum(axis=ax, keepdims=keepdims)

    def grad_fn(g):
        if not keepdims:
            g = np.expand_dims(g, ax)
        return (np.broadcast_to(g, x.data.shape).copy(),)

    return _node(data, (x,), grad_fn)


def mean_axis(x, axis=None, keepdims=False):
    x = _lift(x)
    ax = _norm_axis(axis, x.data.ndim)
    count = int(np.prod([x.data.shape[a] for a in ax])) if ax else 1
    data = x.data.mean(axis=ax, keepdims=keepdims)

    def grad_fn(g):
        if not keepdims:
            g = np.expand_dims(g, ax)
        return (np.broadcast_to(g / count, x.data.shape).copy(),)

    return _node(data, (x,), grad_fn)


def logsumexp_axis(x, axis=None, keepdims=False):
    """Max-shifted log-sum-exp; stable for large inputs."""
    x = _lift(x)
    ax = _norm_axis(axis, x.data.ndim)
    m = np.max(x.data, axis=ax, keepdims=True)
    shifted = np.exp(x.data - m)
    total = shifted.sum(axis=ax, keepdims=True)
    data = m + np.log(total)
    soft = shifted / total
    if not keepdims:
        data = np.squeeze(data, axis=ax)

    def grad_fn(g):
        if not keepdims:
            g = np.expand_dims(g, ax)
        return (g * soft,)

    return _node(data, (x,), grad_fn)


# ---------------------------------------------------------------------------
# graph traversal

_OPS = {
    "matmul": matmul,
    "add_broadcast": add,
    "subtract": subtract,
    "multiply": multiply,
    "divide": divide,
    "relu": relu,
    "tanh": tanh,
    "exp": exp,
    "log": log,
    "square": square,
    "sqrt": sqrt,
    "negate": negate,
    "sum_axis": sum_axis,
    "mean_axis": mean_axis,
    "logsumexp_axis": logsumexp_axis,
    "concat_axis": concat_axis,
    "slice": slice_,
}


def build_op(kind, *inputs, **kwargs):
    """Dispatch an op by name; raises KeyError on unknown kinds."""
    if kind not in _OPS:
        raise KeyError(f"unknown op kind {kind!r}")
    return _OPS[kind](*inputs, **kwargs)


class NonFiniteError(FloatingPointError):
    pass


def backward(root):
    """Reverse sweep from a scalar root.

    Returns a dict mapping each trainable leaf reached from ``root`` to its
    gradient array; also stores it on ``leaf.grad``.  Deterministic: nodes
    are visited in reverse topological (construction) order exactly once.
    """
    if root.data.size != 1:
        raise ValueError(f"backward: root must be scalar, got shape {root.data.shape}")
    if not np.isfinite(root.data):
        raise NonFiniteError("backward: root value is not finite")

    topo = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))

    adjoints = {id(root): np.ones_like(root.data)}
    grads = {}
    for node in reversed(topo):
        g = adjoints.pop(id(node), None)
        if g is None:
            continue
        if node.requires_grad:
            node.grad = g if node.grad is None else node.grad + g
            grads[node] = node.grad
        if node._grad_fn is None:
            continue
        pgrads = node._grad_fn(g)
        for p, pg in zip(node.parents, pgrads):
            if not (p.requires_grad or p._grad_fn is not None):
                continue
            pg = np.asarray(pg, dtype=np.float64)
            prev = adjoints.get(id(p))
            adjoints[id(p)] = pg if prev is None else prev + pg
    return grads


def zero_grads(params):
    for p in params:
        p.grad = None


def finite_diff_check(builder, params, step=1e-5):
    """Max relative error between analytic and central-difference gradients.

    ``builder`` must be pure and deterministic given the parameter tensors.
    """
    for p in params:
        p.grad = None
    root = builder(params)
    backward(root)
    worst = 0.0
    for p in params:
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        flat = p.data.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = builder(params).item()
            flat[i] = orig - step
            lo = builder(params).item()
            flat[i] = orig
            numeric = (hi - lo) / (2.0 * step)
            err = abs(analytic.ravel()[i] - numeric) / (abs(numeric) + 1e-8)
            worst = max(worst, err)
    return worst
