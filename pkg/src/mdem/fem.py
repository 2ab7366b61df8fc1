"""Total-Lagrangian FEM reference solver on linear (constant-strain) triangles.

Newton-Raphson with the consistent tangent, incremental loading and step
bisection. The mesh is built from the same triangulation the meshfree
solvers integrate on, so both share their point set.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve
from scipy.spatial import cKDTree

from . import kernels
from .expressions import vector_jets
from .geometry import EDGES, Triangulation
from .mechanics import MaterialParams, NonPositiveJacobian, J_MIN


class NoConvergence(RuntimeError):
    pass


class PointOutsideMesh(ValueError):
    pass


@dataclass
class FemMesh:
    nodes: np.ndarray
    elements: np.ndarray
    dirichlet_dofs: np.ndarray
    dirichlet_values: np.ndarray
    f_ext: np.ndarray = None
    grads: np.ndarray = field(default=None, repr=False)
    areas: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.elements = np.asarray(self.elements, dtype=np.int64).reshape(-1, 3)
        self.dirichlet_dofs = np.asarray(self.dirichlet_dofs, dtype=np.int64)
        self.dirichlet_values = np.asarray(self.dirichlet_values, dtype=float)
        if self.f_ext is None:
            self.f_ext = np.zeros(2 * len(self.nodes))
        if len(self.dirichlet_dofs) == 0:
            raise ValueError("mesh needs at least one Dirichlet DOF")
        if len(np.unique(self.dirichlet_dofs)) != len(self.dirichlet_dofs):
            raise ValueError("duplicate Dirichlet DOFs")
        p = self.nodes[self.elements]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        if np.any(det <= 0):
            raise ValueError("elements must have positive (counter-clockwise) area")
        self.areas = 0.5 * det
        g1 = np.column_stack([e2[:, 1], -e2[:, 0]]) / det[:, None]
        g2 = np.column_stack([-e1[:, 1], e1[:, 0]]) / det[:, None]
        self.grads = np.stack([-g1 - g2, g1, g2], axis=1)

    @property
    def n_dof(self) -> int:
        return 2 * len(self.nodes)

    @property
    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.n_dof, dtype=bool)
        mask[self.dirichlet_dofs] = False
        return np.flatnonzero(mask)


@dataclass
class FemSolution:
    mesh: FemMesh
    u: np.ndarray
    F: np.ndarray
    P: np.ndarray
    psi: np.ndarray
    log: list
    converged: bool = True

    def nodal_average(self, values) -> np.ndarray:
        """Area-weighted average of element values over the elements touching each node."""
        values = np.asarray(values, dtype=float)
        m = self.mesh
        flat = values.reshape(len(values), -1)
        acc = np.zeros((len(m.nodes), flat.shape[1]))
        wsum = np.zeros(len(m.nodes))
        for k in range(3):
            np.add.at(acc, m.elements[:, k], flat * m.areas[:, None])
            np.add.at(wsum, m.elements[:, k], m.areas)
        return (acc / wsum[:, None]).reshape((len(m.nodes),) + values.shape[1:])


def assemble_residual_and_tangent(mesh: FemMesh, u, material: MaterialParams, load_factor: float = 1.0,
                                  j_min: float = J_MIN):
    """Residual ``f_int(u) - load_factor * f_ext`` (all DOFs) and the sparse tangent."""
    u = np.asarray(u, dtype=float).reshape(-1, 2)
    F, J, psi, P, f_int, rows, cols, vals = kernels.assemble_cst(
        mesh.grads, mesh.areas, mesh.elements, u, material.lam, material.mu)
    bad = ~(J > j_min)
    if np.any(bad):
        raise NonPositiveJacobian(f"{int(np.sum(bad))} element(s) with det F <= {j_min:g}", mask=bad)
    K = sp.coo_matrix((vals, (rows, cols)), shape=(mesh.n_dof, mesh.n_dof)).tocsr()
    return f_int - load_factor * mesh.f_ext, K


def element_fields(mesh: FemMesh, u, material: MaterialParams):
    F, J, psi, P, *_ = kernels.assemble_cst(mesh.grads, mesh.areas, mesh.elements,
                                            np.asarray(u, dtype=float).reshape(-1, 2),
                                            material.lam, material.mu)
    return F, J, psi, P


def potential_energy(mesh: FemMesh, u, material: MaterialParams, load_factor: float = 1.0) -> float:
    """Discrete potential: element energies minus the work of the dead loads."""
    _, J, psi, _ = element_fields(mesh, u, material)
    if np.any(J <= 0):
        return np.inf
    return float(np.dot(mesh.areas, psi) - load_factor * np.dot(mesh.f_ext, np.ravel(u)))


def _newton(mesh, material, u, lf, tol_r, max_iter, log, step):
    free = mesh.free_dofs
    r0 = None
    for it in range(max_iter + 1):
        R, K = assemble_residual_and_tangent(mesh, u, material, lf)
        rn = float(np.linalg.norm(R[free]))
        log.append({"step": step, "load": lf, "iter": it, "residual": rn})
        if r0 is None:
            r0 = rn
        # roundoff floor: external load, reactions or the shear modulus set the force scale
        scale = max(float(np.linalg.norm(lf * mesh.f_ext)), float(np.linalg.norm(R[mesh.dirichlet_dofs])),
                    material.mu * np.sqrt(mesh.areas.sum()))
        if rn <= tol_r * r0 or rn <= 1e-13 * scale:
            return u, True
        if it == max_iter or not np.isfinite(rn):
            break
        Kff = K[free][:, free].tocsc()
        du = spsolve(Kff, -R[free])
        if not np.all(np.isfinite(du)):
            break
        u = u.copy()
        u[free] += du
    return u, False


def solve_static(mesh: FemMesh, material: MaterialParams, load_steps: int = 1, tol_r: float = 1e-9,
                 max_iter: int = 25, max_bisections: int = 5) -> FemSolution:
    """Incremental Newton solve; steps that diverge or invert an element are bisected."""
    if load_steps < 1:
        raise ValueError("load_steps must be >= 1")
    u = np.zeros(mesh.n_dof)
    log: list = []
    lf, dl = 0.0, 1.0 / load_steps
    depth, step = 0, 0
    while lf < 1.0 - 1e-14:
        target = min(1.0, lf + dl)
        trial = u.copy()
        trial[mesh.dirichlet_dofs] = target * mesh.dirichlet_values
        step += 1
        try:
            trial, ok = _newton(mesh, material, trial, target, tol_r, max_iter, log, step)
        except NonPositiveJacobian:
            ok = False
        if ok:
            u, lf = trial, target
            continue
        depth += 1
        if depth > max_bisections:
            raise NoConvergence(f"no convergence at load factor {target:.4g} after {max_bisections} bisections")
        dl *= 0.5
    F, J, psi, P = element_fields(mesh, u, material)
    return FemSolution(mesh, u.reshape(-1, 2), F, P, psi, log)


# ---------------------------------------------------------------------------
# building a mesh from a problem definition


def _on_segment(nodes, spec, seg, tol):
    x0, y0, x1, y1 = spec.rect
    lo, hi = spec.edge_range(seg.edge)
    a = lo if seg.start is None else seg.start
    b = hi if seg.end is None else seg.end
    if seg.edge in ("left", "right"):
        c = x0 if seg.edge == "left" else x1
        return (np.abs(nodes[:, 0] - c) <= tol) & (nodes[:, 1] >= a - tol) & (nodes[:, 1] <= b + tol)
    c = y0 if seg.edge == "bottom" else y1
    return (np.abs(nodes[:, 1] - c) <= tol) & (nodes[:, 0] >= a - tol) & (nodes[:, 0] <= b + tol)


def boundary_edges(elements) -> np.ndarray:
    """Edges (a, b) used by exactly one element, oriented as in that element."""
    e = np.asarray(elements)
    edges = np.concatenate([e[:, [0, 1]], e[:, [1, 2]], e[:, [2, 0]]])
    key = np.sort(edges, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    return edges[counts[inv.ravel()] == 1]


def mesh_from_problem(problem, tri: Triangulation) -> FemMesh:
    """Dirichlet DOFs and consistent dead-load vector for ``problem`` on ``tri``."""
    spec = problem.domain
    nodes = tri.vertices
    tol = 1e-9 * max(spec.width, spec.height)
    dofs: dict[int, float] = {}
    f_ext = np.zeros(2 * len(nodes))
    bedges = boundary_edges(tri.triangles)
    for seg in spec.boundary_segments():
        if seg.edge not in EDGES:
            if seg.kind == "dirichlet":
                raise ValueError(f"segment {seg.label!r}: Dirichlet data on holes is not supported")
            if seg.kind == "traction":
                raise ValueError(f"segment {seg.label!r}: hole tractions are not supported by the FEM oracle")
            continue
        if seg.kind == "dirichlet":
            on = np.flatnonzero(_on_segment(nodes, spec, seg, tol))
            for comp, e in enumerate(seg.displacement or ("0", "0")):
                if e is None or str(e).strip().lower() == "free":
                    continue
                vals = vector_jets((e,), nodes[on])[0][:, 0]
                for n, v in zip(on, vals):
                    dofs[2 * int(n) + comp] = float(v)
        elif seg.kind == "traction":
            _add_traction(f_ext, nodes, bedges, spec, seg, tol)
    keys = np.array(sorted(dofs), dtype=np.int64)
    return FemMesh(nodes, tri.triangles, keys, np.array([dofs[k] for k in keys]), f_ext)


def _add_traction(f_ext, nodes, bedges, spec, seg, tol):
    """Trapezoidal edge integration of t N_a over the part of each edge inside the segment."""
    x0, y0, x1, y1 = spec.rect
    lo, hi = spec.edge_range(seg.edge)
    a = lo if seg.start is None else seg.start
    b = hi if seg.end is None else seg.end
    axis = 1 if seg.edge in ("left", "right") else 0
    fixed = {"left": x0, "right": x1, "bottom": y0, "top": y1}[seg.edge]
    other = 1 - axis
    for na, nb in bedges:
        pa, pb = nodes[na], nodes[nb]
        if abs(pa[other] - fixed) > tol or abs(pb[other] - fixed) > tol:
            continue
        sa, sb = pa[axis], pb[axis]
        s0, s1 = max(min(sa, sb), a), min(max(sa, sb), b)
        if s1 - s0 <= tol:
            continue
        # shape function of node na along the edge, at the clipped ends
        q = np.array([s0, s1])
        pts = np.empty((2, 2))
        pts[:, axis] = q
        pts[:, other] = fixed
        t = vector_jets(seg.traction, pts)[0]
        Na = (q - sb) / (sa - sb)
        Nb = 1.0 - Na
        L = s1 - s0
        for comp in range(2):
            f_ext[2 * na + comp] += 0.5 * L * np.dot(t[:, comp], Na)
            f_ext[2 * nb + comp] += 0.5 * L * np.dot(t[:, comp], Nb)


# ---------------------------------------------------------------------------
# point queries


def locate(mesh: FemMesh, pts, tol: float = 1e-9):
    """Containing element and barycentric coordinates for each point."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    p = mesh.nodes[mesh.elements]
    cent = p.mean(axis=1)
    tree = cKDTree(cent)
    k = min(16, len(cent))
    _, cand = tree.query(pts, k=k)
    cand = np.asarray(cand).reshape(len(pts), k)
    elem = np.full(len(pts), -1, dtype=np.int64)
    bary = np.zeros((len(pts), 3))
    scale = tol * max(1.0, float(np.ptp(mesh.nodes, axis=0).max()))

    def bary_of(e, q):
        g = mesh.grads[e]  # (m, 3, 2)
        lam = np.einsum("mai,mi->ma", g, q - p[e, 0])
        lam[:, 0] = 1.0 - lam[:, 1] - lam[:, 2]
        return lam

    todo = np.arange(len(pts))
    for j in range(k):
        if not len(todo):
            break
        e = cand[todo, j]
        lam = bary_of(e, pts[todo])
        h = np.sqrt(2.0 * mesh.areas[e])  # local size for the tolerance
        ok = np.all(lam >= -scale / h[:, None], axis=1)
        elem[todo[ok]] = e[ok]
        bary[todo[ok]] = lam[ok]
        todo = todo[~ok]
    for i in todo:  # brute force for whatever the neighbour search missed
        e = np.arange(len(mesh.elements))
        lam = bary_of(e, np.repeat(pts[i][None], len(e), axis=0))
        h = np.sqrt(2.0 * mesh.areas)
        ok = np.flatnonzero(np.all(lam >= -scale / h[:, None], axis=1))
        if len(ok) == 0:
            raise PointOutsideMesh(f"point {tuple(pts[i])} lies outside the mesh")
        elem[i] = ok[0]
        bary[i] = lam[ok[0]]
    return elem, bary


def sample_solution(sol: FemSolution, pts):
    """Barycentric displacement and element-constant stress at query points."""
    elem, bary = locate(sol.mesh, pts)
    un = sol.u[sol.mesh.elements[elem]]  # (m, 3, 2)
    u = np.einsum("ma,mai->mi", bary, un)
    # exact nodal values where a query coincides with a node
    node = np.argmax(bary, axis=1)
    at_node = np.isclose(bary[np.arange(len(elem)), node], 1.0, rtol=0, atol=1e-14)
    if np.any(at_node):
        u[at_node] = un[np.flatnonzero(at_node), node[at_node]]
    return u, sol.P[elem]
