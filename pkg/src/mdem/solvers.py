"""PINN, DEM and mixed DEM losses and the Adam + L-BFGS training loop.

All three losses share one network pass over the concatenated
``[domain vertices; boundary points]`` and differ only in what they build
from it:

* PINN: mean squared residual of ``Div P + f_b`` (second derivatives) and
  the traction mismatch of the constitutive stress ``P(F)``.
* DEM: potential energy ``Pi`` from the vertex-mean domain rule and the
  boundary weights.
* mDEM: ``Pi`` plus the mismatch between the stress head and ``P(F)`` at the
  domain points, and the traction mismatch of the stress head.

Points where ``det F`` falls to ``j_min`` do not evaluate the constitutive
law; they add ``penalty * (J - j_min)^2`` instead.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from . import autodiff as ad
from .expressions import vector_jets
from .geometry import DomainSampling, DomainSpec, Triangulation
from .mechanics import (J_MIN, MaterialParams, energy_components, first_pk_stress, kinematics,
                        stress_components, stress_directional_components, strain_energy)
from .network import NetworkParams, OutputTransform, transformed_jets
from .optim import adam, lbfgs

METHODS = ("pinn", "dem", "mdem")


@dataclass(frozen=True)
class LossWeights:
    r: float = 1.0
    t: float = 1.0
    u: float = 1.0
    p: float = 1.0

    def __post_init__(self):
        for name in ("r", "t", "u", "p"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"loss weight {name} must be >= 0, got {v}")


@dataclass(frozen=True)
class ProblemDefinition:
    domain: DomainSpec
    material: MaterialParams
    transform: OutputTransform = field(default_factory=OutputTransform)
    body_force: tuple = ("0", "0")
    weights: LossWeights = field(default_factory=LossWeights)
    j_min: float = J_MIN
    inversion_penalty: float = 1e3

    def __post_init__(self):
        if not self.transform.a_priori:
            return
        # a-priori transforms must pin every prescribed component
        for seg in self.domain.boundary_segments():
            if seg.kind != "dirichlet":
                continue
            for comp, e in enumerate(seg.displacement or ("0", "0")):
                if e is None or str(e).strip().lower() == "free":
                    continue
                scale = self.transform.u_scale[comp]
                shift = self.transform.u_shift[comp]
                pts = _segment_probe(self.domain, seg)
                B = vector_jets((scale,), pts)[0][:, 0]
                A = vector_jets((shift,), pts)[0][:, 0]
                target = vector_jets((e,), pts)[0][:, 0]
                if np.max(np.abs(B)) > 1e-12 or np.max(np.abs(A - target)) > 1e-12:
                    raise ValueError(f"segment {seg.label!r}: the a-priori transform does not "
                                     f"enforce displacement component {comp + 1}")


def _segment_probe(spec: DomainSpec, seg) -> np.ndarray:
    from .geometry import _edge_points

    lo, hi = spec.edge_range(seg.edge)
    a = lo if seg.start is None else seg.start
    b = hi if seg.end is None else seg.end
    return _edge_points(spec, seg.edge, np.linspace(a, b, 7))


@dataclass
class LossBreakdown:
    total: float
    pi: float = 0.0
    mse_r: float = 0.0
    mse_t: float = 0.0
    mse_u: float = 0.0
    mse_p: float = 0.0
    penalty: float = 0.0
    n_inverted: int = 0

    def as_record(self, it: int, phase: str) -> dict:
        return {"iter": it, "total": self.total, "pi": self.pi, "mse_r": self.mse_r, "mse_t": self.mse_t,
                "mse_u": self.mse_u, "mse_p": self.mse_p, "phase": phase}


def _free(e) -> bool:
    return e is None or str(e).strip().lower() == "free"


class LossContext:
    """Point sets and every parameter-independent quantity a loss needs."""

    def __init__(self, problem: ProblemDefinition, sampling: DomainSampling,
                 triangulation: Triangulation | None = None):
        self.problem = problem
        self.sampling = sampling
        self.tri = triangulation
        dom = triangulation.vertices if triangulation is not None else sampling.points
        self.n_dom = len(dom)
        self.n_interior = len(sampling.points)
        if triangulation is not None and not np.array_equal(dom[: self.n_interior], sampling.points):
            raise ValueError("triangulation vertices must start with the sampling's domain points")
        self.vertex_weights = None if triangulation is None else triangulation.vertex_weights

        # non-Dirichlet boundary: traction segments carry loads, free ones t = 0
        tpts, tnorm, tval, tw = [], [], [], []
        upts, uval, umask = [], [], []
        for seg in sampling.segments:
            if seg.kind == "dirichlet":
                disp = seg.displacement if seg.displacement is not None else ("0", "0")
                upts.append(seg.points)
                uval.append(np.column_stack([
                    np.zeros(len(seg)) if _free(e) else vector_jets((e,), seg.points)[0][:, 0] for e in disp]))
                umask.append(np.tile([not _free(e) for e in disp], (len(seg), 1)))
                continue
            tpts.append(seg.points)
            tnorm.append(seg.normals)
            if seg.kind == "traction":
                tval.append(vector_jets(seg.traction, seg.points)[0])
                tw.append(seg.weights)
            else:
                tval.append(np.zeros((len(seg), 2)))
                tw.append(np.zeros(len(seg)))
        self.t_pts = np.vstack(tpts) if tpts else np.zeros((0, 2))
        self.t_normals = np.vstack(tnorm) if tnorm else np.zeros((0, 2))
        self.t_values = np.vstack(tval) if tval else np.zeros((0, 2))
        self.t_weights = np.concatenate(tw) if tw else np.zeros(0)
        self.u_pts = np.vstack(upts) if upts else np.zeros((0, 2))
        self.u_values = np.vstack(uval) if uval else np.zeros((0, 2))
        self.u_mask = np.vstack(umask) if umask else np.zeros((0, 2), dtype=bool)
        self.trained_u = not problem.transform.a_priori and len(self.u_pts) > 0
        # points shared with a Dirichlet segment (clamped corners) keep their
        # energy weight but are left out of the traction fit
        self.t_fit = np.arange(len(self.t_pts))
        if len(self.t_pts) and len(self.u_pts):
            d, _ = cKDTree(self.u_pts).query(self.t_pts, p=np.inf)
            self.t_fit = np.flatnonzero(d > 1e-12 * max(1.0, float(np.abs(self.t_pts).max())))

        parts = [dom, self.t_pts] + ([self.u_pts] if self.trained_u else [])
        self.points = np.vstack(parts)
        self.sl_dom = slice(0, self.n_dom)
        self.sl_t = slice(self.n_dom, self.n_dom + len(self.t_pts))
        self.sl_u = slice(self.sl_t.stop, len(self.points))
        self.transform_at = problem.transform.at(self.points)
        self.body = vector_jets(problem.body_force, dom)[0]
        self.has_body = bool(np.any(self.body != 0.0))
        self.dom_points = dom


def _safe_kinematics(F, j_min):
    """Mask inverted points: replace their F by I and return the penalty term."""
    Jv = ad.value(F[0] * F[3] - F[1] * F[2])
    bad = ~(Jv > j_min)
    if not np.any(bad):
        return F, bad, 0.0
    Fs = tuple(ad.where(bad, 1.0 if k in (0, 3) else 0.0, c) for k, c in enumerate(F))
    J = F[0] * F[3] - F[1] * F[2]
    pen = ad.vsum(ad.where(bad, J - j_min, 0.0) ** 2)
    return Fs, bad, pen


def _sl(F, sl):
    return tuple(c[sl] for c in F)


def _mean_sq(*comps):
    if not len(ad.value(comps[0])):
        return 0.0
    s = comps[0] * comps[0]
    for c in comps[1:]:
        s = s + c * c
    return ad.mean(s)


def _traction_residual(P, ctx: LossContext):
    """Components of P N - t on the fitted traction/free points; P is a 4-tuple."""
    idx = ctx.t_fit
    if len(idx) < len(ctx.t_pts):
        P = tuple(c[idx] for c in P)
    N1, N2 = ctx.t_normals[idx, 0], ctx.t_normals[idx, 1]
    r1 = P[0] * N1 + P[1] * N2 - ctx.t_values[idx, 0]
    r2 = P[2] * N1 + P[3] * N2 - ctx.t_values[idx, 1]
    return r1, r2


def loss_terms(ctx: LossContext, params: NetworkParams, method: str):
    """Taped loss and its (untaped) breakdown for ``method``."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if method == "mdem" and not params.has_stress_head:
        raise ValueError("mdem needs a network with 6 outputs")
    prob = ctx.problem
    lam, mu = prob.material.lam, prob.material.mu
    W = prob.weights
    order = 2 if method == "pinn" else 1
    jets = transformed_jets(params, ctx.transform_at, order)
    F_all, bad, pen = _safe_kinematics(jets.F_components(), prob.j_min)
    total = prob.inversion_penalty * pen if np.any(bad) else 0.0
    out = {"penalty": prob.inversion_penalty * pen if np.any(bad) else 0.0, "n_inverted": int(np.sum(bad))}
    u = jets.u
    n_int = ctx.n_interior

    if method in ("dem", "mdem"):
        psi = energy_components(*_sl(F_all, ctx.sl_dom), lam, mu)
        pi = ad.vsum(psi * ctx.vertex_weights)
        if ctx.has_body:
            phi = u[ctx.sl_dom] + ctx.dom_points
            pi = pi - ad.vsum(ad.vsum(phi * ctx.body, axis=1) * ctx.vertex_weights)
        if len(ctx.t_pts):
            phi_t = u[ctx.sl_t] + ctx.t_pts
            pi = pi - ad.vsum(ad.vsum(phi_t * ctx.t_values, axis=1) * ctx.t_weights)
        total = total + pi
        out["pi"] = pi
    if method == "mdem":
        ph = jets.p_hat
        Pc = stress_components(*_sl(F_all, slice(0, n_int)), lam, mu)
        mse_p = _mean_sq(*(ph[0:n_int, k] - Pc[k] for k in range(4)))
        total = total + W.p * mse_p
        out["mse_p"] = mse_p
        if len(ctx.t_fit):
            mse_t = _mean_sq(*_traction_residual(tuple(ph[ctx.sl_t, k] for k in range(4)), ctx))
            total = total + W.t * mse_t
            out["mse_t"] = mse_t
    if method == "pinn":
        F_dom = _sl(F_all, slice(0, n_int))
        d2 = jets.d2u
        uxx, uxy, uyy = d2[0][0:n_int], d2[1][0:n_int], d2[2][0:n_int]
        # dF/dX1 and dF/dX2, components (11, 12, 21, 22)
        dF1 = (uxx[:, 0], uxy[:, 0], uxx[:, 1], uxy[:, 1])
        dF2 = (uxy[:, 0], uyy[:, 0], uxy[:, 1], uyy[:, 1])
        dP1 = stress_directional_components(F_dom, dF1, lam, mu)
        dP2 = stress_directional_components(F_dom, dF2, lam, mu)
        r1 = dP1[0] + dP2[1] + ctx.body[0:n_int, 0]
        r2 = dP1[2] + dP2[3] + ctx.body[0:n_int, 1]
        if np.any(bad[0:n_int]):
            ok = ~bad[0:n_int]
            r1, r2 = ad.where(ok, r1, 0.0), ad.where(ok, r2, 0.0)
        mse_r = _mean_sq(r1, r2)
        total = total + W.r * mse_r
        out["mse_r"] = mse_r
        if len(ctx.t_fit):
            Pt = stress_components(*_sl(F_all, ctx.sl_t), lam, mu)
            mse_t = _mean_sq(*_traction_residual(Pt, ctx))
            total = total + W.t * mse_t
            out["mse_t"] = mse_t
    if ctx.trained_u:
        du = (u[ctx.sl_u] - ctx.u_values) * ctx.u_mask
        mse_u = ad.mean(ad.vsum(du * du, axis=1))
        total = total + W.u * mse_u
        out["mse_u"] = mse_u
    return total, out


def _breakdown(total, out) -> LossBreakdown:
    vals = {k: (float(ad.value(v)) if k != "n_inverted" else v) for k, v in out.items()}
    return LossBreakdown(total=float(ad.value(total)), **vals)


def evaluate_loss(ctx: LossContext, params: NetworkParams, method: str) -> LossBreakdown:
    total, out = loss_terms(ctx, params, method)
    return _breakdown(total, out)


def value_and_grad(ctx: LossContext, params: NetworkParams, method: str, theta=None):
    """Loss breakdown and flat gradient at ``theta`` (default: ``params``)."""
    tape = ad.Tape()
    theta = params.to_vector() if theta is None else np.asarray(theta, dtype=float)
    tv = tape.variable(theta)
    total, out = loss_terms(ctx, params.unflatten(tv), method)
    bd = _breakdown(total, out)
    if not isinstance(total, ad.Var):
        return bd, np.zeros_like(theta)
    (g,) = tape.gradient(total, [tv])
    return bd, g


def pinn_loss(problem, sampling, params) -> LossBreakdown:
    return evaluate_loss(LossContext(problem, sampling), params, "pinn")


def dem_loss(problem, sampling, triangulation, params) -> LossBreakdown:
    return evaluate_loss(LossContext(problem, sampling, triangulation), params, "dem")


def mdem_loss(problem, sampling, triangulation, params) -> LossBreakdown:
    return evaluate_loss(LossContext(problem, sampling, triangulation), params, "mdem")


def traction_mismatch(ctx: LossContext, params: NetworkParams, stress: str = "constitutive") -> float:
    """Mean |P N - t|^2 on the non-Dirichlet boundary using ``P(F)`` or the stress head."""
    if not len(ctx.t_fit):
        return 0.0
    jets = transformed_jets(params, ctx.problem.transform.at(ctx.t_pts), 1)
    if stress == "head":
        P = tuple(jets.p_hat[:, k] for k in range(4))
    else:
        P = stress_components(*jets.F_components(), ctx.problem.material.lam, ctx.problem.material.mu)
    return float(_mean_sq(*_traction_residual(P, ctx)))


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class Schedule:
    adam_steps: int = 50
    adam_lr: float = 1e-3
    lbfgs_steps: int = 1000
    lbfgs_lr: float = 1e-3
    lbfgs_history: int = 20
    seed: int = 0
    tol_change: float = 1e-9
    patience: int = 10

    def __post_init__(self):
        if self.adam_steps < 0 or self.lbfgs_steps < 0:
            raise ValueError("step counts must be >= 0")
        if self.adam_lr <= 0 or self.lbfgs_lr <= 0:
            raise ValueError("learning rates must be > 0")
        if self.lbfgs_history < 1:
            raise ValueError("lbfgs_history must be >= 1")


@dataclass
class FieldSnapshot:
    """Fields at the domain points (triangulation vertices when available)."""

    x: np.ndarray
    u: np.ndarray
    P: np.ndarray
    psi: np.ndarray
    p_hat: np.ndarray | None = None
    iteration: int = 0
    history: list = field(default_factory=list)


@dataclass
class TrainResult:
    params: NetworkParams
    history: list
    snapshot: FieldSnapshot
    line_search_failures: int = 0
    lbfgs_message: str = ""
    final: LossBreakdown | None = None


def snapshot(ctx: LossContext, params: NetworkParams, iteration: int = 0, history=None) -> FieldSnapshot:
    from .network import evaluate

    x = ctx.dom_points
    ev = evaluate(params, ctx.problem.transform, x, order=1)
    F = np.eye(2) + ev.grad_u
    J = F[:, 0, 0] * F[:, 1, 1] - F[:, 0, 1] * F[:, 1, 0]
    ok = J > ctx.problem.j_min
    P = np.full((len(x), 2, 2), np.nan)
    psi = np.full(len(x), np.nan)
    if np.any(ok):
        st = kinematics(F[ok], ctx.problem.j_min)
        P[ok] = first_pk_stress(st, ctx.problem.material)
        psi[ok] = strain_energy(st, ctx.problem.material)
    return FieldSnapshot(x, ev.u, P, psi, ev.p_hat, iteration, list(history or []))


def train(problem: ProblemDefinition, sampling: DomainSampling, triangulation: Triangulation | None,
          params: NetworkParams, schedule: Schedule = Schedule(), method: str = "mdem",
          callback: Callable | None = None) -> TrainResult:
    """Full-batch Adam for ``adam_steps`` followed by L-BFGS for ``lbfgs_steps``.

    The history holds one record per iteration (Adam: loss before the update;
    L-BFGS: loss after each accepted step). ``callback(record)`` sees each one.
    """
    if method in ("dem", "mdem") and triangulation is None:
        raise ValueError(f"{method} needs a triangulation")
    ctx = LossContext(problem, sampling, triangulation)
    history: list[dict] = []
    template = params

    def fun(theta):
        bd, g = value_and_grad(ctx, template, method, theta)
        return bd.total, g, bd

    def make_cb(phase, offset):
        def cb(k, x, f, bd):
            rec = bd.as_record(offset + k, phase)
            history.append(rec)
            if callback is not None:
                callback(rec)
        return cb

    theta = params.to_vector()
    if schedule.adam_steps:
        res = adam(fun, theta, schedule.adam_steps, lr=schedule.adam_lr, callback=make_cb("adam", 0))
        theta = res.x
    failures, message = 0, ""
    if schedule.lbfgs_steps:
        res = lbfgs(fun, theta, schedule.lbfgs_steps, lr=schedule.lbfgs_lr, m=schedule.lbfgs_history,
                    tol_change=schedule.tol_change, patience=schedule.patience,
                    callback=make_cb("lbfgs", len(history)))
        theta, failures, message = res.x, res.line_search_failures, res.message
    trained = template.unflatten(theta)
    final = evaluate_loss(ctx, trained, method)
    snap = snapshot(ctx, trained, len(history), history)
    return TrainResult(trained, history, snap, failures, message, final)
