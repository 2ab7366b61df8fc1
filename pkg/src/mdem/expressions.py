"""Closed-form coordinate expressions used for transforms and loads.

Grammar: numbers, the coordinates ``X``/``Y`` (``x``/``y`` accepted),
``+ - * /``, integer powers ``**`` and parentheses. Expressions are parsed
with :mod:`ast` and evaluated as second-order jets so transforms supply
their own exact spatial derivatives.
"""
from __future__ import annotations

import ast
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class ExpressionError(ValueError):
    pass


@dataclass
class Jet:
    """Value with gradient and Hessian (xx, xy, yy) over a point set."""

    v: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    dxx: np.ndarray
    dxy: np.ndarray
    dyy: np.ndarray

    @classmethod
    def const(cls, c, n):
        z = np.zeros(n)
        return cls(np.full(n, float(c)), z, z, z, z, z)

    def __add__(self, o):
        return Jet(self.v + o.v, self.dx + o.dx, self.dy + o.dy,
                   self.dxx + o.dxx, self.dxy + o.dxy, self.dyy + o.dyy)

    def __sub__(self, o):
        return self + (-o)

    def __neg__(self):
        return Jet(-self.v, -self.dx, -self.dy, -self.dxx, -self.dxy, -self.dyy)

    def __mul__(self, o):
        a, b = self, o
        return Jet(
            a.v * b.v,
            a.dx * b.v + a.v * b.dx,
            a.dy * b.v + a.v * b.dy,
            a.dxx * b.v + 2 * a.dx * b.dx + a.v * b.dxx,
            a.dxy * b.v + a.dx * b.dy + a.dy * b.dx + a.v * b.dxy,
            a.dyy * b.v + 2 * a.dy * b.dy + a.v * b.dyy,
        )

    def scale(self, c):
        return Jet(c * self.v, c * self.dx, c * self.dy, c * self.dxx, c * self.dxy, c * self.dyy)

    def grad(self):
        return np.stack([self.dx, self.dy])

    def hess(self):
        return np.stack([self.dxx, self.dxy, self.dyy])


_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)


def _to_float(node) -> float | None:
    """Constant value of a parameter-free sub-expression, else None."""
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.UnaryOp):
        inner = _to_float(node.operand)
        if inner is None:
            return None
        return -inner if isinstance(node.op, ast.USub) else inner
    if isinstance(node, ast.BinOp):
        a, b = _to_float(node.left), _to_float(node.right)
        if a is None or b is None:
            return None
        op = node.op
        if isinstance(op, ast.Add):
            return a + b
        if isinstance(op, ast.Sub):
            return a - b
        if isinstance(op, ast.Mult):
            return a * b
        if isinstance(op, ast.Div):
            return a / b
        if isinstance(op, ast.Pow):
            return a ** b
    return None


def _validate(node, text):
    if isinstance(node, ast.Expression):
        return _validate(node.body, text)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError(f"non-numeric constant in {text!r}")
        return
    if isinstance(node, ast.Name):
        if node.id not in ("X", "Y", "x", "y"):
            raise ExpressionError(f"unknown name {node.id!r} in {text!r}")
        return
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        return _validate(node.operand, text)
    if isinstance(node, ast.BinOp) and isinstance(node.op, _BINOPS):
        _validate(node.left, text)
        _validate(node.right, text)
        if isinstance(node.op, ast.Pow):
            p = _to_float(node.right)
            if p is None or p != int(p) or p < 0:
                raise ExpressionError(f"only non-negative integer powers allowed in {text!r}")
        if isinstance(node.op, ast.Div) and _to_float(node.right) is None:
            raise ExpressionError(f"division only by constants in {text!r}")
        return
    raise ExpressionError(f"unsupported syntax in {text!r}")


class Expr:
    """A parsed coordinate expression."""

    def __init__(self, text):
        if isinstance(text, (int, float)) and not isinstance(text, bool):
            text = repr(float(text))
        if not isinstance(text, str):
            raise ExpressionError(f"expression must be a string or number, got {text!r}")
        self.text = text.strip()
        try:
            tree = ast.parse(self.text, mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
        _validate(tree, self.text)
        self._tree = tree.body
        self.constant = _to_float(self._tree)

    def __repr__(self):
        return f"Expr({self.text!r})"

    def jet(self, pts) -> Jet:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        return self._eval(self._tree, pts)

    def __call__(self, pts) -> np.ndarray:
        return self.jet(pts).v

    def _eval(self, node, pts) -> Jet:
        n = len(pts)
        c = _to_float(node)
        if c is not None:
            return Jet.const(c, n)
        if isinstance(node, ast.Name):
            z, o = np.zeros(n), np.ones(n)
            if node.id in ("X", "x"):
                return Jet(pts[:, 0].copy(), o, z, z, z, z)
            return Jet(pts[:, 1].copy(), z, o, z, z, z)
        if isinstance(node, ast.UnaryOp):
            inner = self._eval(node.operand, pts)
            return -inner if isinstance(node.op, ast.USub) else inner
        a = self._eval(node.left, pts)
        op = node.op
        if isinstance(op, ast.Pow):
            p = int(_to_float(node.right))
            out = Jet.const(1.0, n)
            for _ in range(p):
                out = out * a
            return out
        if isinstance(op, ast.Div):
            return a.scale(1.0 / _to_float(node.right))
        b = self._eval(node.right, pts)
        if isinstance(op, ast.Add):
            return a + b
        if isinstance(op, ast.Sub):
            return a - b
        return a * b


@lru_cache(maxsize=256)
def parse(text) -> Expr:
    return Expr(text)


def vector_jets(exprs, pts):
    """Stack jets of a list of expressions: value (N, k), grad (2, N, k), hess (3, N, k)."""
    jets = [parse(e).jet(pts) for e in exprs]
    v = np.stack([j.v for j in jets], axis=-1)
    g = np.stack([j.grad() for j in jets], axis=-1)
    h = np.stack([j.hess() for j in jets], axis=-1)
    return v, g, h
