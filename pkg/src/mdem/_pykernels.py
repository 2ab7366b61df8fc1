"""Pure-Python/numpy implementation of the hot kernels.

Used when the compiled ``_ckernels`` extension is unavailable (or when
``MDEM_PURE_PYTHON=1``). Triangulations match the compiled kernels exactly;
assembly agrees to floating-point roundoff.
"""
from __future__ import annotations

import numpy as np

_EPS = 2.0 ** -53
CCW_ERRBOUND_A = (3.0 + 16.0 * _EPS) * _EPS
ICC_ERRBOUND_A = (10.0 + 96.0 * _EPS) * _EPS


def _sign(v) -> float:
    return 1.0 if v > 0 else (-1.0 if v < 0 else 0.0)


def _common_ints(*vals):
    """Exact integers proportional to ``vals`` (doubles share a power-of-two denominator)."""
    ratios = [float(v).as_integer_ratio() for v in vals]
    den = max(d for _, d in ratios)
    return [n * (den // d) for n, d in ratios]


def orient2d_exact(ax, ay, bx, by, cx, cy) -> float:
    ax, ay, bx, by, cx, cy = _common_ints(ax, ay, bx, by, cx, cy)
    return _sign((ax - cx) * (by - cy) - (ay - cy) * (bx - cx))


def incircle_exact(ax, ay, bx, by, cx, cy, dx, dy) -> float:
    ax, ay, bx, by, cx, cy, dx, dy = _common_ints(ax, ay, bx, by, cx, cy, dx, dy)
    adx, ady, bdx, bdy, cdx, cdy = ax - dx, ay - dy, bx - dx, by - dy, cx - dx, cy - dy
    det = ((adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
           + (bdx * bdx + bdy * bdy) * (cdx * ady - adx * cdy)
           + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady))
    return _sign(det)


def orient2d(ax, ay, bx, by, cx, cy) -> float:
    """> 0 if a, b, c are counter-clockwise; exact sign."""
    detleft = (ax - cx) * (by - cy)
    detright = (ay - cy) * (bx - cx)
    det = detleft - detright
    errbound = CCW_ERRBOUND_A * (abs(detleft) + abs(detright))
    if det > errbound or -det > errbound:
        return det
    return orient2d_exact(ax, ay, bx, by, cx, cy)


def incircle(ax, ay, bx, by, cx, cy, dx, dy) -> float:
    """> 0 if d lies strictly inside the circle through CCW a, b, c; exact sign."""
    adx, ady = ax - dx, ay - dy
    bdx, bdy = bx - dx, by - dy
    cdx, cdy = cx - dx, cy - dy
    bdxcdy, cdxbdy = bdx * cdy, cdx * bdy
    cdxady, adxcdy = cdx * ady, adx * cdy
    adxbdy, bdxady = adx * bdy, bdx * ady
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady)
    permanent = ((abs(bdxcdy) + abs(cdxbdy)) * alift
                 + (abs(cdxady) + abs(adxcdy)) * blift
                 + (abs(adxbdy) + abs(bdxady)) * clift)
    errbound = ICC_ERRBOUND_A * permanent
    if det > errbound or -det > errbound:
        return det
    return incircle_exact(ax, ay, bx, by, cx, cy, dx, dy)


def super_triangle(pts: np.ndarray) -> np.ndarray:
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    c = 0.5 * (lo + hi)
    m = max(float(np.max(hi - lo)), 1.0)
    k = 1.0e4 * m
    return np.array([[c[0] - k, c[1] - k], [c[0] + k, c[1] - k], [c[0], c[1] + k]])


def delaunay(pts, order) -> np.ndarray:
    """Bowyer-Watson incremental insertion.

    ``pts`` (n, 2) distinct points, ``order`` the insertion order. Returns
    CCW triangles (m, 3) over the input indices.
    """
    pts = np.asarray(pts, dtype=float)
    n = len(pts)
    allpts = np.vstack([pts, super_triangle(pts)])
    xs = allpts[:, 0].tolist()
    ys = allpts[:, 1].tolist()
    V = [[n, n + 1, n + 2]]
    N = [[-1, -1, -1]]
    alive = [True]
    free: list[int] = []
    last = 0
    for p in (int(i) for i in order):
        px, py = xs[p], ys[p]
        # visibility walk
        t = last
        while True:
            v = V[t]
            for i in range(3):
                a, b = v[(i + 1) % 3], v[(i + 2) % 3]
                if orient2d(xs[a], ys[a], xs[b], ys[b], px, py) < 0:
                    t = N[t][i]
                    break
            else:
                break
        # cavity of triangles whose circumcircle strictly contains p
        cavity = [t]
        in_cav = {t}
        rejected = set()
        boundary = []
        stack = [t]
        while stack:
            c = stack.pop()
            v = V[c]
            for i in range(3):
                nb = N[c][i]
                if nb in in_cav:
                    continue
                a, b = v[(i + 1) % 3], v[(i + 2) % 3]
                if nb != -1 and nb not in rejected:
                    w = V[nb]
                    if incircle(xs[w[0]], ys[w[0]], xs[w[1]], ys[w[1]], xs[w[2]], ys[w[2]], px, py) > 0:
                        in_cav.add(nb)
                        cavity.append(nb)
                        stack.append(nb)
                        continue
                    rejected.add(nb)
                boundary.append((a, b, nb, c))
        for c in cavity:
            alive[c] = False
            free.append(c)
        new = []
        for _ in boundary:
            if free:
                s = free.pop()
            else:
                s = len(V)
                V.append([0, 0, 0])
                N.append([-1, -1, -1])
                alive.append(False)
            new.append(s)
        start = {}
        end = {}
        for s, (a, b, o, c) in zip(new, boundary):
            V[s] = [a, b, p]
            N[s] = [-1, -1, o]
            alive[s] = True
            start[a] = s
            end[b] = s
            if o != -1:
                # match the shared edge by vertices: slot ids may already be reused
                vo = V[o]
                for k in range(3):
                    if vo[k] != a and vo[k] != b:
                        N[o][k] = s
                        break
        for s in new:
            a, b, _ = V[s]
            N[s][0] = start[b]
            N[s][1] = end[a]
        last = new[0]
    tris = [v for v, ok in zip(V, alive) if ok and v[0] < n and v[1] < n and v[2] < n]
    return np.array(tris, dtype=np.int64).reshape(-1, 3)


def assemble_cst(grads, areas, elems, u, lam, mu):
    """Constant-strain triangle residual and tangent.

    ``grads`` (E, 3, 2) shape-function gradients, ``areas`` (E,), ``elems``
    (E, 3), ``u`` (n, 2). Returns the element deformation gradients and
    Jacobians, energy densities, stresses, the internal-force vector (2n,)
    and COO triplets of the tangent (local DOF order: node-major, x then y).
    """
    grads = np.asarray(grads, dtype=float)
    elems = np.asarray(elems)
    n = len(u)
    ue = np.asarray(u, dtype=float)[elems]  # (E, 3, 2)
    F = np.eye(2) + np.einsum("eai,eaJ->eiJ", ue, grads)
    J = F[:, 0, 0] * F[:, 1, 1] - F[:, 0, 1] * F[:, 1, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        G = np.empty_like(F)
        G[:, 0, 0] = F[:, 1, 1] / J
        G[:, 0, 1] = -F[:, 1, 0] / J
        G[:, 1, 0] = -F[:, 0, 1] / J
        G[:, 1, 1] = F[:, 0, 0] / J
        lnJ = np.log(J)
    trC = np.einsum("eiJ,eiJ->e", F, F)
    psi = 0.25 * lam * (J * J - 1 - 2 * lnJ) + 0.5 * mu * (trC - 2 - 2 * lnJ)
    c = (0.5 * lam * (J * J - 1))[:, None, None]
    P = mu * (F - G) + c * G
    J2 = (J * J)[:, None, None, None, None]
    eye = np.eye(2)
    A = (mu * np.einsum("ik,JL->iJkL", eye, eye)[None]
         + (mu - c[..., None, None]) * np.einsum("eiL,ekJ->eiJkL", G, G)
         + lam * J2 * np.einsum("eiJ,ekL->eiJkL", G, G))
    fe = areas[:, None, None] * np.einsum("eiJ,eaJ->eai", P, grads)  # (E, 3, 2)
    Ke = areas[:, None, None, None, None] * np.einsum("eiJkL,eaJ,ebL->eaibk", A, grads, grads)
    dof = (2 * elems[:, :, None] + np.arange(2)[None, None, :]).reshape(-1, 6)  # (E, 6)
    resid = np.zeros(2 * n)
    np.add.at(resid, dof.ravel(), fe.reshape(-1))
    rows = np.repeat(dof, 6, axis=1).ravel()
    cols = np.tile(dof, (1, 6)).ravel()
    vals = Ke.reshape(-1, 36).ravel()
    return F, J, psi, P, resid, rows, cols, vals
