# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: Delaunay insertion and CST element assembly.

Mirrors ``_pykernels`` exactly; near-degenerate predicate cases fall back
to the same exact integer evaluation.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, log

from ._pykernels import incircle_exact, orient2d_exact, super_triangle

cnp.import_array()

cdef double _EPS = 2.0 ** -53
cdef double CCW_ERRBOUND_A = (3.0 + 16.0 * _EPS) * _EPS
cdef double ICC_ERRBOUND_A = (10.0 + 96.0 * _EPS) * _EPS


cdef inline double _orient(double ax, double ay, double bx, double by, double cx, double cy):
    cdef double detleft = (ax - cx) * (by - cy)
    cdef double detright = (ay - cy) * (bx - cx)
    cdef double det = detleft - detright
    cdef double errbound = CCW_ERRBOUND_A * (fabs(detleft) + fabs(detright))
    if det > errbound or -det > errbound:
        return det
    return orient2d_exact(ax, ay, bx, by, cx, cy)


cdef inline double _incircle(double ax, double ay, double bx, double by,
                             double cx, double cy, double dx, double dy):
    cdef double adx = ax - dx, ady = ay - dy
    cdef double bdx = bx - dx, bdy = by - dy
    cdef double cdx = cx - dx, cdy = cy - dy
    cdef double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy
    cdef double cdxady = cdx * ady, adxcdy = adx * cdy
    cdef double adxbdy = adx * bdy, bdxady = bdx * ady
    cdef double alift = adx * adx + ady * ady
    cdef double blift = bdx * bdx + bdy * bdy
    cdef double clift = cdx * cdx + cdy * cdy
    cdef double det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady)
    cdef double permanent = ((fabs(bdxcdy) + fabs(cdxbdy)) * alift
                             + (fabs(cdxady) + fabs(adxcdy)) * blift
                             + (fabs(adxbdy) + fabs(bdxady)) * clift)
    cdef double errbound = ICC_ERRBOUND_A * permanent
    if det > errbound or -det > errbound:
        return det
    return incircle_exact(ax, ay, bx, by, cx, cy, dx, dy)


def orient2d(double ax, double ay, double bx, double by, double cx, double cy):
    return _orient(ax, ay, bx, by, cx, cy)


def incircle(double ax, double ay, double bx, double by,
             double cx, double cy, double dx, double dy):
    return _incircle(ax, ay, bx, by, cx, cy, dx, dy)


def delaunay(pts, order):
    """Bowyer-Watson incremental insertion; see ``_pykernels.delaunay``."""
    cdef cnp.ndarray[double, ndim=2] allpts = np.ascontiguousarray(
        np.vstack([np.asarray(pts, dtype=float), super_triangle(np.asarray(pts, dtype=float))]))
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ins = np.ascontiguousarray(order, dtype=np.int64)
    cdef Py_ssize_t n = allpts.shape[0] - 3
    cdef Py_ssize_t cap = 2 * (n + 3) + 16
    cdef double[:] xs = np.ascontiguousarray(allpts[:, 0])
    cdef double[:] ys = np.ascontiguousarray(allpts[:, 1])
    cdef cnp.int64_t[:, :] V = np.zeros((cap, 3), dtype=np.int64)
    cdef cnp.int64_t[:, :] N = np.full((cap, 3), -1, dtype=np.int64)
    cdef cnp.int8_t[:] alive = np.zeros(cap, dtype=np.int8)
    # per-triangle stamps: == step -> in cavity, == -step-1 -> rejected
    cdef cnp.int64_t[:] mark = np.zeros(cap, dtype=np.int64)
    cdef cnp.int64_t[:] free = np.zeros(cap, dtype=np.int64)
    cdef cnp.int64_t[:] cavity = np.zeros(cap, dtype=np.int64)
    cdef cnp.int64_t[:] stack = np.zeros(cap, dtype=np.int64)
    cdef cnp.int64_t[:, :] bnd = np.zeros((cap, 4), dtype=np.int64)
    cdef cnp.int64_t[:] newt = np.zeros(cap, dtype=np.int64)
    cdef cnp.int64_t[:] start = np.full(n + 3, -1, dtype=np.int64)
    cdef cnp.int64_t[:] endt = np.full(n + 3, -1, dtype=np.int64)
    cdef Py_ssize_t n_tri = 1, n_free = 0, last = 0
    cdef Py_ssize_t step, p, t, i, k, a, b, c, nb, s, o
    cdef Py_ssize_t n_cav, n_stack, n_bnd, moved
    cdef double px, py

    V[0, 0] = n
    V[0, 1] = n + 1
    V[0, 2] = n + 2
    alive[0] = 1
    for step in range(1, ins.shape[0] + 1):
        p = ins[step - 1]
        px = xs[p]
        py = ys[p]
        t = last
        while True:
            moved = 0
            for i in range(3):
                a = V[t, (i + 1) % 3]
                b = V[t, (i + 2) % 3]
                if _orient(xs[a], ys[a], xs[b], ys[b], px, py) < 0:
                    t = N[t, i]
                    moved = 1
                    break
            if not moved:
                break
        n_cav = 1
        cavity[0] = t
        mark[t] = step
        n_stack = 1
        stack[0] = t
        n_bnd = 0
        while n_stack > 0:
            n_stack -= 1
            c = stack[n_stack]
            for i in range(3):
                nb = N[c, i]
                if nb != -1 and mark[nb] == step:
                    continue
                a = V[c, (i + 1) % 3]
                b = V[c, (i + 2) % 3]
                if nb != -1 and mark[nb] != -step - 1:
                    if _incircle(xs[V[nb, 0]], ys[V[nb, 0]], xs[V[nb, 1]], ys[V[nb, 1]],
                                 xs[V[nb, 2]], ys[V[nb, 2]], px, py) > 0:
                        mark[nb] = step
                        cavity[n_cav] = nb
                        n_cav += 1
                        stack[n_stack] = nb
                        n_stack += 1
                        continue
                    mark[nb] = -step - 1
                bnd[n_bnd, 0] = a
                bnd[n_bnd, 1] = b
                bnd[n_bnd, 2] = nb
                bnd[n_bnd, 3] = c
                n_bnd += 1
        for k in range(n_cav):
            alive[cavity[k]] = 0
            free[n_free] = cavity[k]
            n_free += 1
        for k in range(n_bnd):
            if n_free > 0:
                n_free -= 1
                s = free[n_free]
            else:
                s = n_tri
                n_tri += 1
            newt[k] = s
        for k in range(n_bnd):
            s = newt[k]
            a = bnd[k, 0]
            b = bnd[k, 1]
            o = bnd[k, 2]
            c = bnd[k, 3]
            V[s, 0] = a
            V[s, 1] = b
            V[s, 2] = p
            N[s, 0] = -1
            N[s, 1] = -1
            N[s, 2] = o
            alive[s] = 1
            mark[s] = 0
            start[a] = s
            endt[b] = s
            if o != -1:
                # match the shared edge by vertices: slot ids may already be reused
                for i in range(3):
                    if V[o, i] != a and V[o, i] != b:
                        N[o, i] = s
                        break
        for k in range(n_bnd):
            s = newt[k]
            N[s, 0] = start[V[s, 1]]
            N[s, 1] = endt[V[s, 0]]
        last = newt[0]
    out = []
    for t in range(n_tri):
        if alive[t] and V[t, 0] < n and V[t, 1] < n and V[t, 2] < n:
            out.append((V[t, 0], V[t, 1], V[t, 2]))
    return np.array(out, dtype=np.int64).reshape(-1, 3)


def assemble_cst(grads_in, areas_in, elems_in, u_in, double lam, double mu):
    """Constant-strain triangle residual and tangent; see ``_pykernels.assemble_cst``."""
    cdef double[:, :, :] grads = np.ascontiguousarray(grads_in, dtype=float)
    cdef double[:] areas = np.ascontiguousarray(areas_in, dtype=float)
    cdef cnp.int64_t[:, :] elems = np.ascontiguousarray(elems_in, dtype=np.int64)
    cdef double[:, :] u = np.ascontiguousarray(u_in, dtype=float)
    cdef Py_ssize_t ne = elems.shape[0], nn = u.shape[0]
    F_out = np.empty((ne, 2, 2))
    J_out = np.empty(ne)
    psi_out = np.empty(ne)
    P_out = np.empty((ne, 2, 2))
    resid_out = np.zeros(2 * nn)
    rows_out = np.empty(ne * 36, dtype=np.int64)
    cols_out = np.empty(ne * 36, dtype=np.int64)
    vals_out = np.empty(ne * 36)
    cdef double[:, :, :] Fv = F_out
    cdef double[:] Jv = J_out
    cdef double[:] psiv = psi_out
    cdef double[:, :, :] Pv = P_out
    cdef double[:] rv = resid_out
    cdef cnp.int64_t[:] rows = rows_out
    cdef cnp.int64_t[:] cols = cols_out
    cdef double[:] vals = vals_out
    cdef double F[2][2]
    cdef double G[2][2]
    cdef double P[2][2]
    cdef double A[2][2][2][2]
    cdef double J, lnJ, trC, c, area, s
    cdef Py_ssize_t e, a, b, i, jj, k, L, ii, kk, pos, na, nb
    cdef int dof[6]
    for e in range(ne):
        area = areas[e]
        for i in range(2):
            for jj in range(2):
                s = 1.0 if i == jj else 0.0
                for a in range(3):
                    s += u[elems[e, a], i] * grads[e, a, jj]
                F[i][jj] = s
        J = F[0][0] * F[1][1] - F[0][1] * F[1][0]
        G[0][0] = F[1][1] / J
        G[0][1] = -F[1][0] / J
        G[1][0] = -F[0][1] / J
        G[1][1] = F[0][0] / J
        lnJ = log(J) if J > 0 else float("nan")
        trC = F[0][0] * F[0][0] + F[0][1] * F[0][1] + F[1][0] * F[1][0] + F[1][1] * F[1][1]
        psiv[e] = 0.25 * lam * (J * J - 1 - 2 * lnJ) + 0.5 * mu * (trC - 2 - 2 * lnJ)
        Jv[e] = J
        c = 0.5 * lam * (J * J - 1)
        for i in range(2):
            for jj in range(2):
                P[i][jj] = mu * (F[i][jj] - G[i][jj]) + c * G[i][jj]
                Fv[e, i, jj] = F[i][jj]
                Pv[e, i, jj] = P[i][jj]
        for i in range(2):
            for jj in range(2):
                for k in range(2):
                    for L in range(2):
                        s = mu if (i == k and jj == L) else 0.0
                        s = s + (mu - c) * G[i][L] * G[k][jj]
                        s = s + lam * J * J * G[i][jj] * G[k][L]
                        A[i][jj][k][L] = s
        for a in range(3):
            dof[2 * a] = 2 * elems[e, a]
            dof[2 * a + 1] = 2 * elems[e, a] + 1
            for i in range(2):
                s = 0.0
                for jj in range(2):
                    s += P[i][jj] * grads[e, a, jj]
                rv[dof[2 * a + i]] += area * s
        pos = e * 36
        for a in range(3):
            for i in range(2):
                for b in range(3):
                    for k in range(2):
                        s = 0.0
                        for jj in range(2):
                            for L in range(2):
                                s += A[i][jj][k][L] * grads[e, a, jj] * grads[e, b, L]
                        rows[pos] = dof[2 * a + i]
                        cols[pos] = dof[2 * b + k]
                        vals[pos] = area * s
                        pos += 1
    return F_out, J_out, psi_out, P_out, resid_out, rows_out, cols_out, vals_out
