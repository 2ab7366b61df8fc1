"""Differentiation engine.

Two mechanisms work together here:

* a reverse-mode tape over numpy arrays (:class:`Tape`, :class:`Var`) that
  yields gradients of a scalar loss with respect to the network parameters;
* closed-form forward-mode propagation of first and second input
  derivatives through a fully connected network (:func:`mlp_jets`).

The forward jets are written with ordinary arithmetic, so when the weights
are tape variables every jet entry is itself taped and the parameter
gradient flows through spatial derivatives (forward-over-reverse).

All math helpers in this module (``tanh``, ``log``, ``concat`` ...) accept
plain arrays as well as :class:`Var` and only touch the tape when needed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


class UnsupportedOrder(ValueError):
    """Requested derivative order is not available for the activation."""


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    ndim_extra = grad.ndim - len(shape)
    if ndim_extra > 0:
        grad = grad.sum(axis=tuple(range(ndim_extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tape:
    """Records operations in creation order.

    Creation order is a topological order, so walking it backwards is a
    valid reverse sweep. ``gradient(..., order="dfs")`` instead walks a
    depth-first topological sort of the sub-graph reachable from the output;
    both accumulate the same adjoints.
    """

    def __init__(self):
        self.nodes: list[Var] = []

    def variable(self, value) -> "Var":
        return Var(np.asarray(value, dtype=float), self, ())

    def _record(self, value, parents) -> "Var":
        return Var(value, self, parents)

    def gradient(self, out: "Var", wrt: Sequence["Var"], order: str = "tape"):
        if out.value.size != 1:
            raise ValueError("gradient requires a scalar output")
        adj: dict[int, np.ndarray] = {out._id: np.ones_like(out.value)}
        if order == "tape":
            sweep = reversed(self.nodes[: out._id + 1])
        elif order == "dfs":
            sweep = reversed(_topological(out))
        else:
            raise ValueError(f"unknown traversal order {order!r}")
        for node in sweep:
            g = adj.pop(node._id, None)
            if g is None or not node._parents:
                if g is not None:
                    adj[node._id] = g
                continue
            for parent, vjp in node._parents:
                contrib = vjp(g)
                prev = adj.get(parent._id)
                adj[parent._id] = contrib if prev is None else prev + contrib
        return [adj.get(v._id, np.zeros_like(v.value)) for v in wrt]


def _topological(out: "Var") -> list["Var"]:
    seen = set()
    order = []
    stack = [(out, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if node._id in seen:
            continue
        seen.add(node._id)
        stack.append((node, True))
        # reversed so parents are visited in their listed order
        for parent, _ in reversed(node._parents):
            if parent._id not in seen:
                stack.append((parent, False))
    return order


class Var:
    """A taped array value."""

    __slots__ = ("value", "_parents", "_tape", "_id")
    __array_ufunc__ = None  # make ndarray <op> Var defer to Var's reflected ops

    def __init__(self, value, tape: Tape, parents):
        self.value = value
        self._parents = parents
        self._tape = tape
        self._id = len(tape.nodes)
        tape.nodes.append(self)

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __len__(self):
        return len(self.value)

    def __repr__(self):
        return f"Var(shape={self.value.shape})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(other))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, key):
        return getitem(self, key)

    @property
    def T(self):
        return transpose(self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return reshape(self, shape)

    def sum(self, axis=None):
        return vsum(self, axis)


def _val(x):
    return x.value if isinstance(x, Var) else x


def _tape_of(*xs) -> Tape | None:
    for x in xs:
        if isinstance(x, Var):
            return x._tape
    return None


def value(x) -> np.ndarray:
    """Strip the tape from ``x`` (no-op for arrays)."""
    return np.asarray(_val(x))


def add(a, b):
    tape = _tape_of(a, b)
    av, bv = _val(a), _val(b)
    out = av + bv
    if tape is None:
        return out
    parents = []
    if isinstance(a, Var):
        sa = np.shape(av)
        parents.append((a, lambda g: _unbroadcast(g, sa)))
    if isinstance(b, Var):
        sb = np.shape(bv)
        parents.append((b, lambda g: _unbroadcast(g, sb)))
    return tape._record(out, tuple(parents))


def neg(a):
    if not isinstance(a, Var):
        return -a
    return a._tape._record(-a.value, ((a, lambda g: -g),))


def mul(a, b):
    tape = _tape_of(a, b)
    av, bv = _val(a), _val(b)
    out = av * bv
    if tape is None:
        return out
    parents = []
    if isinstance(a, Var):
        sa = np.shape(av)
        parents.append((a, lambda g: _unbroadcast(g * bv, sa)))
    if isinstance(b, Var):
        sb = np.shape(bv)
        parents.append((b, lambda g: _unbroadcast(g * av, sb)))
    return tape._record(out, tuple(parents))


def div(a, b):
    tape = _tape_of(a, b)
    av, bv = _val(a), _val(b)
    out = av / bv
    if tape is None:
        return out
    parents = []
    if isinstance(a, Var):
        sa = np.shape(av)
        parents.append((a, lambda g: _unbroadcast(g / bv, sa)))
    if isinstance(b, Var):
        sb = np.shape(bv)
        parents.append((b, lambda g: _unbroadcast(-g * out / bv, sb)))
    return tape._record(out, tuple(parents))


def power(a, p: float):
    if not isinstance(a, Var):
        return a ** p
    av = a.value
    out = av ** p
    return a._tape._record(out, ((a, lambda g: g * p * av ** (p - 1)),))


def matmul(a, b):
    tape = _tape_of(a, b)
    av, bv = _val(a), _val(b)
    out = av @ bv
    if tape is None:
        return out
    a2 = av[None, :] if av.ndim == 1 else av
    b2 = bv[:, None] if bv.ndim == 1 else bv

    def lift(g):
        g = np.asarray(g)
        if av.ndim == 1:
            g = np.expand_dims(g, -2)
        if bv.ndim == 1:
            g = np.expand_dims(g, -1)
        return g

    parents = []
    if isinstance(a, Var):
        parents.append(
            (a, lambda g: _unbroadcast(lift(g) @ np.swapaxes(b2, -1, -2), a2.shape).reshape(av.shape))
        )
    if isinstance(b, Var):
        parents.append(
            (b, lambda g: _unbroadcast(np.swapaxes(a2, -1, -2) @ lift(g), b2.shape).reshape(bv.shape))
        )
    return tape._record(out, tuple(parents))


def _unary(a, fn, dfn):
    if not isinstance(a, Var):
        return fn(a)
    av = a.value
    out = fn(av)
    return a._tape._record(out, ((a, lambda g: g * dfn(av, out)),))


def tanh(a):
    return _unary(a, np.tanh, lambda x, y: 1.0 - y * y)


def log(a):
    return _unary(a, np.log, lambda x, y: 1.0 / x)


def exp(a):
    return _unary(a, np.exp, lambda x, y: y)


def sqrt(a):
    return _unary(a, np.sqrt, lambda x, y: 0.5 / y)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(a):
    return _unary(a, _sigmoid, lambda x, y: y * (1.0 - y))


def softplus(a):
    return _unary(a, lambda x: np.logaddexp(0.0, x), lambda x, y: _sigmoid(x))


def vsum(a, axis=None):
    if not isinstance(a, Var):
        return np.sum(a, axis=axis)
    av = a.value
    out = np.sum(av, axis=axis)

    def vjp(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, av.shape).copy()

    return a._tape._record(np.asarray(out), ((a, vjp),))


def mean(a, axis=None):
    n = np.size(_val(a)) if axis is None else np.shape(_val(a))[axis]
    return vsum(a, axis) * (1.0 / n)


def reshape(a, shape):
    if not isinstance(a, Var):
        return np.reshape(a, shape)
    src = a.value.shape
    return a._tape._record(a.value.reshape(shape), ((a, lambda g: g.reshape(src)),))


def transpose(a, axes=None):
    if not isinstance(a, Var):
        return np.transpose(a, axes)
    inv = None if axes is None else np.argsort(axes)
    return a._tape._record(np.transpose(a.value, axes), ((a, lambda g: np.transpose(g, inv)),))


def _is_advanced(key) -> bool:
    keys = key if isinstance(key, tuple) else (key,)
    return any(isinstance(k, (list, np.ndarray)) for k in keys)


def getitem(a, key):
    if not isinstance(a, Var):
        return a[key]
    av = a.value
    advanced = _is_advanced(key)

    def vjp(g):
        z = np.zeros_like(av)
        if advanced:
            np.add.at(z, key, g)
        else:
            z[key] = g
        return z

    return a._tape._record(av[key], ((a, vjp),))


def concat(xs: Sequence, axis: int = 0):
    tape = _tape_of(*xs)
    vals = [np.asarray(_val(x)) for x in xs]
    out = np.concatenate(vals, axis=axis)
    if tape is None:
        return out
    bounds = np.cumsum([0] + [v.shape[axis] for v in vals])
    parents = []
    for x, lo, hi in zip(xs, bounds[:-1], bounds[1:]):
        if isinstance(x, Var):
            sl = [slice(None)] * out.ndim
            sl[axis] = slice(lo, hi)
            sl = tuple(sl)
            parents.append((x, lambda g, sl=sl: g[sl]))
    return tape._record(out, tuple(parents))


def stack(xs: Sequence, axis: int = 0):
    return concat([expand_dims(x, axis) for x in xs], axis=axis)


def expand_dims(a, axis):
    if not isinstance(a, Var):
        return np.expand_dims(a, axis)
    return reshape(a, np.expand_dims(a.value, axis).shape)


def where(mask: np.ndarray, a, b):
    """Select ``a`` where ``mask`` is true, else ``b``; ``mask`` is constant."""
    tape = _tape_of(a, b)
    av, bv = _val(a), _val(b)
    out = np.where(mask, av, bv)
    if tape is None:
        return out
    parents = []
    if isinstance(a, Var):
        sa = np.shape(av)
        parents.append((a, lambda g: _unbroadcast(np.where(mask, g, 0.0), sa)))
    if isinstance(b, Var):
        sb = np.shape(bv)
        parents.append((b, lambda g: _unbroadcast(np.where(mask, 0.0, g), sb)))
    return tape._record(out, tuple(parents))


# ---------------------------------------------------------------------------
# forward-mode input jets through a fully connected network

# index pairs of the stored second derivatives: (xx, xy, yy)
HESS_PAIRS = ((0, 0), (0, 1), (1, 1))
_P = np.array([p for p, _ in HESS_PAIRS])
_Q = np.array([q for _, q in HESS_PAIRS])

ACTIVATIONS = ("tanh", "softplus", "identity", "relu")


def activation_jet(name: str, a, order: int):
    """Activation value and its first (and second) derivative at ``a``."""
    if name == "tanh":
        s = tanh(a)
        s1 = 1.0 - s * s
        s2 = -2.0 * s * s1 if order >= 2 else None
    elif name == "softplus":
        s = softplus(a)
        s1 = sigmoid(a)
        s2 = s1 * (1.0 - s1) if order >= 2 else None
    elif name == "identity":
        s, s1 = a, 1.0
        s2 = 0.0 if order >= 2 else None
    elif name == "relu":
        if order >= 2:
            raise UnsupportedOrder("relu has no second derivative")
        mask = value(a) > 0
        s = where(mask, a, 0.0)
        s1 = mask.astype(float)
        s2 = None
    else:
        raise ValueError(f"unknown activation {name!r}")
    return s, s1, s2


def mlp_jets(weights: Sequence, biases: Sequence, activation: str, x: np.ndarray, order: int):
    """Propagate value and input derivatives through the network.

    ``x`` has shape (N, 2). Weights follow the (out, in) convention.
    Returns ``(z, dz, d2z)`` with ``z`` (N, out), ``dz`` (2, N, out) holding
    d z / d x_j, and ``d2z`` (3, N, out) holding the second derivatives in
    ``HESS_PAIRS`` order (``None`` when ``order == 1``).
    """
    if order not in (1, 2):
        raise UnsupportedOrder(f"order must be 1 or 2, got {order}")
    if order == 2 and activation == "relu":
        raise UnsupportedOrder("relu has no second derivative")
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    n_layers = len(weights)
    h = x
    dh = None  # first layer: d x / d x_j = e_j, handled through W columns
    d2h = None
    for k, (W, b) in enumerate(zip(weights, biases)):
        Wt = transpose(W)
        a = h @ Wt + b
        if dh is None:
            # (2, 1, out): column j of W broadcast over points
            da = reshape(Wt, (2, 1, -1)) + np.zeros((2, n, 1))
            d2a = 0.0 if order == 2 else None
        else:
            da = dh @ Wt
            d2a = d2h @ Wt if order == 2 else None
        if k == n_layers - 1:
            z, dz, d2z = a, da, d2a
            break
        s, s1, s2 = activation_jet(activation, a, order)
        h = s
        dh = s1 * da
        if order == 2:
            d2h = s2 * (da[_P] * da[_Q]) + s1 * d2a
    if order == 2 and not isinstance(d2z, Var) and np.isscalar(d2z):
        d2z = np.zeros((3,) + np.shape(_val(z)))
    return z, dz, d2z


@dataclass
class DualBundle:
    """Network output with its input Jacobian and (optionally) Hessian.

    ``jacobian[n, i, j] = d z_i / d x_j``; ``hessian[n, i, j, k]`` is the
    matching second derivative, symmetric in ``j, k``.
    """

    value: np.ndarray
    jacobian: np.ndarray
    hessian: np.ndarray | None = None


def _full_hessian(d2z) -> np.ndarray:
    d2z = np.asarray(d2z)
    hxx, hxy, hyy = d2z
    return np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)


def forward_with_input_derivatives(params, x, order: int = 1) -> DualBundle:
    """Raw network output and its spatial derivatives at ``x`` ((2,) or (N, 2))."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    z, dz, d2z = mlp_jets(params.weights, params.biases, params.activation, pts, order)
    z, dz = value(z), value(dz)
    jac = np.moveaxis(dz, 0, -1)
    hess = _full_hessian(value(d2z)) if order == 2 else None
    if single:
        return DualBundle(z[0], jac[0], None if hess is None else hess[0])
    return DualBundle(z, jac, hess)


def loss_gradient(params, loss_evaluator: Callable, order: str = "tape"):
    """Value and parameter-shaped gradient of a scalar taped loss.

    ``loss_evaluator`` receives a copy of ``params`` whose arrays are tape
    variables and must return a scalar :class:`Var`.
    """
    tape = Tape()
    theta = tape.variable(params.to_vector())
    out = loss_evaluator(params.unflatten(theta))
    if not isinstance(out, Var):
        # loss does not depend on the parameters at all
        return float(out), params.unflatten(np.zeros_like(theta.value))
    (g,) = tape.gradient(out, [theta], order=order)
    return float(out.value), params.unflatten(g)
