"""Reverse-mode differentiation over dense float64 arrays.

Every value is a numpy float64 array. Each operation here accepts plain
arrays or ``Var`` nodes and returns the same kind: with plain arrays it is
ordinary numpy, with at least one ``Var`` argument it records the operation
so that ``backward`` can later accumulate exact gradients into the leaves.
This lets one implementation of a network or loss serve both evaluation
(no tape) and training (tape).

Only first-order parameter gradients are supported; higher-order input
derivatives are handled separately in :mod:`geofair.derivatives` and reduce
to compositions of these first-order primitives.

Non-finite results never pass silently: every operation checks its output
and raises :class:`NumericError` naming itself.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError, ShapeError

__all__ = [
    "Var",
    "as_tensor",
    "value_of",
    "leaf",
    "add",
    "sub",
    "mul",
    "neg",
    "matmul",
    "reshape",
    "transpose",
    "getitem",
    "reduce_sum",
    "reduce_mean",
    "exp",
    "expm1",
    "log",
    "sigmoid",
    "softplus",
    "clip",
    "select",
    "norm_trailing",
    "backward",
    "grad_scalar",
]


def _require_finite(arr, tag):
    # Summing is one fast pass; any NaN/Inf poisons the result. A finite
    # array whose true sum overflows is astronomically out of range for
    # this package, but double-check before raising to avoid a false alarm.
    total = float(np.sum(arr)) if arr.size else 0.0
    if not np.isfinite(total) and not np.isfinite(arr).all():
        raise NumericError(f"non-finite values produced by '{tag}'")


def as_tensor(x, tag="tensor"):
    """Coerce to a finite float64 array, raising NumericError otherwise."""
    arr = np.asarray(x, dtype=np.float64)
    _require_finite(arr, tag)
    return arr


def value_of(x):
    """The plain ndarray behind ``x``, whether or not it is a Var."""
    if isinstance(x, Var):
        return x.value
    return np.asarray(x, dtype=np.float64)


class Var:
    """A node in the differentiation tape.

    ``value`` is the primal ndarray; ``links`` pairs each parent Var with
    the vector-Jacobian product mapping this node's gradient to a gradient
    contribution for that parent.
    """

    __slots__ = ("value", "links", "grad")

    # make ndarray <op> Var defer to the reflected Var methods instead of
    # numpy trying to broadcast the node as an object scalar
    __array_ufunc__ = None

    def __init__(self, value, links=()):
        self.value = value
        self.links = links
        self.grad = None

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(shape={self.value.shape})"

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

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __truediv__(self, other):
        if isinstance(other, Var):
            raise TypeError("division by a Var is not a supported primitive")
        return mul(self, 1.0 / float(other))

    def __getitem__(self, idx):
        return getitem(self, idx)


def leaf(x):
    """A gradient-carrying input node."""
    return Var(as_tensor(x, "leaf"))


def _node(value, links, tag):
    value = np.asarray(value, dtype=np.float64)
    _require_finite(value, tag)
    return Var(value, tuple(links))


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _binary_elementwise(a, b, fwd, vjp_a, vjp_b, tag):
    av, bv = value_of(a), value_of(b)
    with np.errstate(over="ignore", invalid="ignore"):
        val = fwd(av, bv)
    if not isinstance(a, Var) and not isinstance(b, Var):
        _require_finite(np.asarray(val), tag)
        return np.asarray(val, dtype=np.float64)
    links = []
    if isinstance(a, Var):
        links.append((a, lambda g: _unbroadcast(vjp_a(g, av, bv), av.shape)))
    if isinstance(b, Var):
        links.append((b, lambda g: _unbroadcast(vjp_b(g, av, bv), bv.shape)))
    return _node(val, links, tag)


def add(a, b):
    return _binary_elementwise(
        a, b, lambda x, y: x + y, lambda g, x, y: g, lambda g, x, y: g, "add"
    )


def sub(a, b):
    return _binary_elementwise(
        a, b, lambda x, y: x - y, lambda g, x, y: g, lambda g, x, y: -g, "sub"
    )


def mul(a, b):
    return _binary_elementwise(
        a, b, lambda x, y: x * y, lambda g, x, y: g * y, lambda g, x, y: g * x, "mul"
    )


def neg(a):
    if not isinstance(a, Var):
        return -value_of(a)
    return _node(-a.value, [(a, lambda g: -g)], "neg")


def matmul(a, b):
    av, bv = value_of(a), value_of(b)
    if av.ndim < 2 or bv.ndim < 2:
        raise ShapeError("matmul operands must have at least 2 dimensions")
    if av.shape[-1] != bv.shape[-2]:
        raise ShapeError(
            f"matmul inner dimensions disagree: {av.shape} @ {bv.shape}"
        )
    with np.errstate(over="ignore", invalid="ignore"):
        val = av @ bv
    if not isinstance(a, Var) and not isinstance(b, Var):
        _require_finite(val, "matmul")
        return val
    links = []
    if isinstance(a, Var):
        links.append(
            (a, lambda g: _unbroadcast(g @ bv.swapaxes(-1, -2), av.shape))
        )
    if isinstance(b, Var):
        links.append(
            (b, lambda g: _unbroadcast(av.swapaxes(-1, -2) @ g, bv.shape))
        )
    return _node(val, links, "matmul")


def reshape(a, shape):
    if not isinstance(a, Var):
        return value_of(a).reshape(shape)
    old = a.value.shape
    return _node(a.value.reshape(shape), [(a, lambda g: g.reshape(old))], "reshape")


def transpose(a, axes):
    if not isinstance(a, Var):
        return np.transpose(value_of(a), axes)
    inverse = np.argsort(axes)
    return _node(
        np.transpose(a.value, axes),
        [(a, lambda g: np.transpose(g, inverse))],
        "transpose",
    )


def getitem(a, idx):
    """Basic (slice/int-tuple) indexing; gradients scatter back additively."""
    if not isinstance(a, Var):
        return value_of(a)[idx]
    shape = a.value.shape

    def scatter(g):
        buf = np.zeros(shape, dtype=np.float64)
        np.add.at(buf, idx, g)
        return buf

    return _node(a.value[idx], [(a, scatter)], "getitem")


def reduce_sum(a, axis=None, keepdims=False):
    av = value_of(a)
    with np.errstate(over="ignore", invalid="ignore"):
        val = av.sum(axis=axis, keepdims=keepdims)
    if not isinstance(a, Var):
        _require_finite(np.asarray(val), "sum")
        return np.asarray(val, dtype=np.float64)

    def spread(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, av.shape)

    return _node(val, [(a, spread)], "sum")


def reduce_mean(a, axis=None, keepdims=False):
    av = value_of(a)
    count = av.size if axis is None else np.prod(
        [av.shape[ax] for ax in np.atleast_1d(axis)]
    )
    return mul(reduce_sum(a, axis=axis, keepdims=keepdims), 1.0 / float(count))


def exp(a):
    with np.errstate(over="ignore"):
        val = np.exp(value_of(a))
    if not isinstance(a, Var):
        _require_finite(val, "exp")
        return val
    return _node(val, [(a, lambda g: g * val)], "exp")


def expm1(a):
    with np.errstate(over="ignore"):
        val = np.expm1(value_of(a))
    if not isinstance(a, Var):
        _require_finite(val, "expm1")
        return val
    return _node(val, [(a, lambda g: g * (val + 1.0))], "expm1")


def log(a):
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.log(value_of(a))
    if not isinstance(a, Var):
        _require_finite(val, "log")
        return val
    av = a.value
    return _node(val, [(a, lambda g: g / av)], "log")


def _sigmoid_stable(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a):
    av = np.atleast_1d(value_of(a))
    val = _sigmoid_stable(av).reshape(value_of(a).shape)
    if not isinstance(a, Var):
        return val
    return _node(val, [(a, lambda g: g * val * (1.0 - val))], "sigmoid")


def softplus(a):
    av = value_of(a)
    val = np.logaddexp(0.0, av)
    if not isinstance(a, Var):
        _require_finite(val, "softplus")
        return val
    grad_scale = _sigmoid_stable(np.atleast_1d(av)).reshape(av.shape)
    return _node(val, [(a, lambda g: g * grad_scale)], "softplus")


def clip(a, lo=None, hi=None):
    """Clamp to [lo, hi]; gradient passes only where the input was in range."""
    av = value_of(a)
    val = np.clip(av, lo, hi)
    if not isinstance(a, Var):
        return val
    inside = np.ones(av.shape, dtype=bool)
    if lo is not None:
        inside &= av >= lo
    if hi is not None:
        inside &= av <= hi
    return _node(val, [(a, lambda g: g * inside)], "clip")


def select(mask, a, b):
    """Elementwise ``mask ? a : b``; the mask is constant (no gradient)."""
    mask = np.asarray(mask, dtype=bool)
    av, bv = value_of(a), value_of(b)
    val = np.where(mask, av, bv)
    if not isinstance(a, Var) and not isinstance(b, Var):
        _require_finite(val, "select")
        return val
    links = []
    if isinstance(a, Var):
        links.append(
            (a, lambda g: _unbroadcast(np.where(mask, g, 0.0), av.shape))
        )
    if isinstance(b, Var):
        links.append(
            (b, lambda g: _unbroadcast(np.where(mask, 0.0, g), bv.shape))
        )
    return _node(val, links, "select")


def norm_trailing(a, naxes):
    """Frobenius norm over the last ``naxes`` axes.

    The gradient at an exactly-zero norm is taken to be 0 (a valid
    subgradient), so discrepancies between identical inputs stay finite.
    """
    av = value_of(a)
    if naxes < 1 or naxes > av.ndim:
        raise ShapeError(f"norm_trailing over {naxes} axes of shape {av.shape}")
    axes = tuple(range(av.ndim - naxes, av.ndim))
    val = np.sqrt(np.sum(av * av, axis=axes))
    if not isinstance(a, Var):
        _require_finite(np.asarray(val), "norm")
        return np.asarray(val, dtype=np.float64)

    def vjp(g):
        scale = np.where(val == 0.0, 0.0, g / np.where(val == 0.0, 1.0, val))
        return av * scale.reshape(scale.shape + (1,) * naxes)

    return _node(val, [(a, vjp)], "norm")


def backward(root, leaves):
    """Gradients of scalar ``root`` with respect to each leaf Var."""
    if not isinstance(root, Var):
        raise TypeError("backward needs a Var built from engine operations")
    if root.value.shape != ():
        raise ShapeError("backward requires a scalar root")

    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent, _ in node.links:
            if id(parent) not in visited:
                stack.append((parent, False))

    for node in order:
        node.grad = None
    root.grad = np.ones((), dtype=np.float64)
    for node in reversed(order):
        if node.grad is None:
            continue
        for parent, vjp in node.links:
            contribution = vjp(node.grad)
            if parent.grad is None:
                parent.grad = np.zeros(parent.value.shape, dtype=np.float64)
            parent.grad = parent.grad + contribution

    grads = []
    for lf in leaves:
        g = lf.grad if lf.grad is not None else np.zeros(lf.value.shape)
        _require_finite(g, "gradient")
        grads.append(np.asarray(g, dtype=np.float64))
    return grads


def grad_scalar(f, p):
    """Exact gradient of the scalar function ``f`` at parameter vector ``p``.

    ``f`` must be written over engine operations (anything in this module,
    or code built on it such as network forwards and stencil derivative
    subexpressions); the returned array matches the shape of ``p``.
    """
    p_leaf = leaf(p)
    out = f(p_leaf)
    if not isinstance(out, Var):
        raise TypeError("function did not produce a differentiable scalar")
    return backward(out, [p_leaf])[0]
