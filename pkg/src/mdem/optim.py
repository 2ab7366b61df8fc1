"""Full-batch optimizers on flat parameter vectors: Adam and L-BFGS.

Both take ``fun(x) -> (f, g, aux)`` where ``aux`` is passed through to the
callback untouched (the solvers use it for the loss breakdown).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import line_search


class LineSearchFailure(RuntimeError):
    pass


@dataclass
class OptResult:
    x: np.ndarray
    f: float
    n_iter: int
    n_eval: int
    losses: list = field(default_factory=list)
    line_search_failures: int = 0
    converged: bool = False
    message: str = ""


def adam(fun: Callable, x0, steps: int, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8,
         callback: Callable | None = None) -> OptResult:
    """Bias-corrected Adam; ``callback(k, x, f, aux)`` sees the loss before each update."""
    x = np.array(x0, dtype=float)
    b1, b2 = betas
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    losses = []
    f = np.nan
    for k in range(1, int(steps) + 1):
        f, g, aux = fun(x)
        losses.append(f)
        if callback is not None:
            callback(k, x, f, aux)
        if not np.all(np.isfinite(g)):
            return OptResult(x, f, k - 1, k, losses, message="non-finite gradient")
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1 ** k)
        vhat = v / (1 - b2 ** k)
        x = x - lr * mhat / (np.sqrt(vhat) + eps)
    return OptResult(x, f, int(steps), int(steps), losses, converged=True, message="step budget reached")


class _Cached:
    """Memoize the last few evaluations so the line search does not repeat work."""

    def __init__(self, fun):
        self.fun = fun
        self.n_eval = 0
        self._cache: list = []

    def __call__(self, x):
        for xc, out in self._cache:
            if np.array_equal(xc, x):
                return out
        f, g, aux = self.fun(x)
        self.n_eval += 1
        f = float(f)
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            f, g = np.inf, np.zeros_like(x)
        out = (f, np.asarray(g, dtype=float), aux)
        self._cache = ([(x.copy(), out)] + self._cache)[:4]
        return out

    def f(self, x):
        return self(x)[0]

    def g(self, x):
        return self(x)[1]


def _two_loop(g, S, Y, rho):
    q = g.copy()
    alpha = [0.0] * len(S)
    for i in range(len(S) - 1, -1, -1):
        alpha[i] = rho[i] * np.dot(S[i], q)
        q -= alpha[i] * Y[i]
    if S:
        q *= np.dot(S[-1], Y[-1]) / np.dot(Y[-1], Y[-1])
    for i in range(len(S)):
        b = rho[i] * np.dot(Y[i], q)
        q += (alpha[i] - b) * S[i]
    return -q


def _wolfe(fc, x, d, f, g, c1, c2):
    with warnings.catch_warnings():
        # scipy warns when the search does not converge; that case is handled below
        warnings.simplefilter("ignore")
        alpha, _, _, f_new, _, _ = line_search(fc.f, fc.g, x, d, g, f, c1=c1, c2=c2, maxiter=40)
    if alpha is None or f_new is None or not np.isfinite(f_new) or f_new > f:
        return None
    return alpha


def _backtrack(fc, x, d, f, g, c1, t0, max_halvings=40):
    slope = float(np.dot(g, d))
    t = t0
    for _ in range(max_halvings):
        fn = fc.f(x + t * d)
        if fn <= f + c1 * t * slope:
            return t
        t *= 0.5
    return None


def lbfgs(fun: Callable, x0, max_iter: int, lr: float = 1e-3, m: int = 20, c1: float = 1e-4,
          c2: float = 0.9, tol_change: float = 1e-9, patience: int = 10, tol_grad: float = 1e-12,
          callback: Callable | None = None) -> OptResult:
    """Limited-memory BFGS with a strong-Wolfe line search.

    Without curvature pairs (first iteration, or after a memory reset) the
    trial step is ``lr * min(1, 1/|g|_1)`` along ``-g``; afterwards it is the
    unit step along the scaled two-loop direction. A failed search falls back to a backtracking step
    along ``-g``; if that also fails the run stops. Only steps that do not
    increase the loss are accepted, so the recorded sequence is monotone.
    ``callback(k, x, f, aux)`` runs after each accepted step.
    """
    fc = _Cached(fun)
    x = np.array(x0, dtype=float)
    f, g, aux = fc(x)
    S, Y, rho = [], [], []
    losses = []
    failures = 0
    window = [f]
    message = "iteration budget reached"
    converged = False
    k = 0
    for k in range(1, int(max_iter) + 1):
        if not np.isfinite(f):
            message = "non-finite loss"
            k -= 1
            break
        if np.max(np.abs(g)) <= tol_grad:
            converged, message, k = True, "gradient tolerance reached", k - 1
            break
        d = _two_loop(g, S, Y, rho)
        if np.dot(d, g) >= 0:
            S, Y, rho = [], [], []
            d = -g
        t0 = 1.0 if S else lr * min(1.0, 1.0 / np.sum(np.abs(g)))
        pk = t0 * d
        alpha = _wolfe(fc, x, pk, f, g, c1, c2)
        if alpha is not None:
            step = alpha * pk  # same expression as the line search, so the cache hits
        else:
            failures += 1
            S, Y, rho = [], [], []
            d = -g
            t = _backtrack(fc, x, d, f, g, c1, lr * min(1.0, 1.0 / max(np.sum(np.abs(g)), 1e-300)) * 10.0)
            if t is None:
                message = "line search failed along the steepest-descent direction"
                k -= 1
                break
            step = t * d
        x_new = x + step
        f_new, g_new, aux = fc(x_new)
        if f_new > f:  # never accept an increase
            message = "no decrease"
            k -= 1
            break
        s, y = x_new - x, g_new - g
        sy = float(np.dot(s, y))
        if sy > 1e-10 * float(np.dot(y, y)):
            S.append(s)
            Y.append(y)
            rho.append(1.0 / sy)
            if len(S) > m:
                S.pop(0), Y.pop(0), rho.pop(0)
        x, f, g = x_new, f_new, g_new
        losses.append(f)
        if callback is not None:
            callback(k, x, f, aux)
        window.append(f)
        if len(window) > patience + 1:
            window.pop(0)
            ref = max(abs(window[0]), 1e-300)
            if abs(window[0] - window[-1]) / ref < tol_change:
                converged, message = True, "relative loss change below tolerance"
                break
    return OptResult(x, f, k, fc.n_eval, losses, failures, converged, message)
