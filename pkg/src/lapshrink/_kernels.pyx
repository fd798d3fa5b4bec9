# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Same contracts as ``lapshrink._fallback``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, INFINITY

cnp.import_array()

DEF MAXK = 64


def admm_entry_step(double[:, :, ::1] A, double[:, :, ::1] B, double[:, :, ::1] C,
                    double[:, :, ::1] D, double[:, :, ::1] EA, double[:, :, ::1] EB,
                    double[:, :, ::1] EC, double[:, ::1] half, double[:, ::1] half_inv,
                    double[:, ::1] L_eps, double[:, ::1] sys_inv,
                    double thr_l1, double thr_fuse, double varrho, bint fusion):
    cdef Py_ssize_t K = D.shape[0], p = D.shape[1]
    cdef Py_ssize_t i, j, k, l
    cdef double x, nrm, scale, acc, diff
    cdef double d[MAXK]
    cdef double e[MAXK]
    cdef double u[MAXK]
    cdef double c[MAXK]
    cdef double rhs[MAXK]
    cdef double dn[MAXK]
    cdef double ra[MAXK]
    cdef double rb[MAXK]
    cdef double rc[MAXK]
    cdef double ss[MAXK]
    if K > MAXK:
        raise ValueError("too many groups for the compiled kernel")
    for k in range(K):
        ra[k] = 0.0
        rb[k] = 0.0
        rc[k] = 0.0
        ss[k] = 0.0

    # upper triangle incl. diagonal; state is symmetric so mirror the result
    for i in range(p):
        for j in range(i, p):
            for k in range(K):
                d[k] = D[k, i, j]
                e[k] = EC[k, i, j]
                x = d[k] - EB[k, i, j]
                if i == j:
                    B[k, i, j] = x
                elif x > thr_l1:
                    B[k, i, j] = x - thr_l1
                elif x < -thr_l1:
                    B[k, i, j] = x + thr_l1
                else:
                    B[k, i, j] = 0.0
            if fusion:
                nrm = 0.0
                for k in range(K):
                    acc = -e[k]
                    for l in range(K):
                        acc = acc + half[k, l] * d[l]
                    u[k] = acc
                    nrm = nrm + acc * acc
                nrm = sqrt(nrm)
                if i == j:
                    scale = 1.0
                elif nrm > 0:
                    scale = 1.0 - thr_fuse / nrm
                    if scale < 0:
                        scale = 0.0
                else:
                    scale = 0.0
                for k in range(K):
                    acc = d[k]
                    for l in range(K):
                        acc = acc - half_inv[k, l] * e[l]
                    c[k] = scale * acc
                for k in range(K):
                    acc = A[k, i, j] + EA[k, i, j] + B[k, i, j] + EB[k, i, j]
                    for l in range(K):
                        acc = acc + L_eps[k, l] * c[l] + half[l, k] * e[l]
                    rhs[k] = acc
                for k in range(K):
                    acc = 0.0
                    for l in range(K):
                        acc = acc + sys_inv[k, l] * rhs[l]
                    dn[k] = acc
            else:
                for k in range(K):
                    dn[k] = 0.5 * (A[k, i, j] + EA[k, i, j] + B[k, i, j] + EB[k, i, j])
                    c[k] = dn[k]

            for k in range(K):
                D[k, i, j] = dn[k]
                C[k, i, j] = c[k]
                EA[k, i, j] = EA[k, i, j] + A[k, i, j] - dn[k]
                EB[k, i, j] = EB[k, i, j] + B[k, i, j] - dn[k]
            if fusion:
                for k in range(K):
                    acc = e[k]
                    for l in range(K):
                        acc = acc + half[k, l] * (c[l] - dn[l])
                    EC[k, i, j] = acc

            for k in range(K):
                if i != j:
                    D[k, j, i] = dn[k]
                    C[k, j, i] = c[k]
                    B[k, j, i] = B[k, i, j]
                    EA[k, j, i] = EA[k, i, j]
                    EB[k, j, i] = EB[k, i, j]
                    EC[k, j, i] = EC[k, i, j]
                x = 1.0 if i == j else 2.0
                diff = A[k, i, j] - dn[k]
                ra[k] += x * diff * diff
                diff = B[k, i, j] - dn[k]
                rb[k] += x * diff * diff
                diff = c[k] - dn[k]
                rc[k] += x * diff * diff
                diff = dn[k] - d[k]
                ss[k] += x * diff * diff

    cdef double mra = 0.0, mrb = 0.0, mrc = 0.0, mss = 0.0
    for k in range(K):
        if ra[k] > mra: mra = ra[k]
        if rb[k] > mrb: mrb = rb[k]
        if rc[k] > mrc: mrc = rc[k]
        if ss[k] > mss: mss = ss[k]
    return sqrt(mra), sqrt(mrb), sqrt(mrc), varrho * sqrt(mss)


cdef inline double _clip1(double x) nogil:
    if x > 1.0:
        return 1.0
    if x < -1.0:
        return -1.0
    return x


def box_qp_min_norm(b, M, double rho, double tol=1e-10, int max_iter=500):
    cdef double[:, ::1] bv = np.ascontiguousarray(np.atleast_2d(b), dtype=np.float64)
    cdef double[:, ::1] Mv = np.ascontiguousarray(M, dtype=np.float64)
    cdef Py_ssize_t m = bv.shape[0], K = bv.shape[1]
    cdef Py_ssize_t r, k, l, it
    Qa = np.asarray(Mv).T @ np.asarray(Mv)
    cdef double[:, ::1] H = np.ascontiguousarray(rho * rho * Qa)
    cdef double[:, ::1] Q = np.ascontiguousarray(Qa)
    out = np.empty(m)
    cdef double[::1] res = out
    cdef double v[MAXK]
    cdef double g[MAXK]
    cdef double dd[MAXK]
    cdef double lin[MAXK]
    cdef double Hx[MAXK]
    cdef double gg, gHg, alpha, dHd, gd, beta, dn, acc
    if K > MAXK:
        raise ValueError("too many groups for the compiled kernel")
    with nogil:
        for r in range(m):
            for k in range(K):
                acc = 0.0
                for l in range(K):
                    acc = acc + rho * bv[r, l] * Q[l, k]
                lin[k] = acc
                v[k] = _clip1(bv[r, k] / rho)
            for it in range(max_iter):
                for k in range(K):
                    acc = -lin[k]
                    for l in range(K):
                        acc = acc + v[l] * H[l, k]
                    g[k] = acc
                gg = 0.0
                gHg = 0.0
                for k in range(K):
                    acc = 0.0
                    for l in range(K):
                        acc = acc + H[k, l] * g[l]
                    Hx[k] = acc
                for k in range(K):
                    gg = gg + g[k] * g[k]
                    gHg = gHg + g[k] * Hx[k]
                alpha = gg / gHg if gHg > 0 else 1.0
                for k in range(K):
                    dd[k] = _clip1(v[k] - alpha * g[k]) - v[k]
                dHd = 0.0
                gd = 0.0
                dn = 0.0
                for k in range(K):
                    acc = 0.0
                    for l in range(K):
                        acc = acc + H[k, l] * dd[l]
                    dHd = dHd + dd[k] * acc
                    gd = gd + g[k] * dd[k]
                    dn = dn + dd[k] * dd[k]
                beta = -gd / dHd if dHd > 0 else 1.0
                if beta < 0:
                    beta = 0.0
                elif beta > 1:
                    beta = 1.0
                for k in range(K):
                    v[k] = v[k] + beta * dd[k]
                if sqrt(dn) <= tol:
                    break
            acc = 0.0
            for k in range(K):
                gd = 0.0
                for l in range(K):
                    gd = gd + Mv[k, l] * (bv[r, l] - rho * v[l])
                acc = acc + gd * gd
            res[r] = sqrt(acc)
    return out


def agglomerate(dist, int method):
    cdef double[:, ::1] full = np.array(dist, dtype=np.float64, order="C")
    cdef Py_ssize_t n = full.shape[0]
    Z_arr = np.zeros((n - 1, 4))
    cdef double[:, ::1] Z = Z_arr
    ids_arr = np.arange(n, dtype=np.intp)
    cdef Py_ssize_t[::1] ids = ids_arr
    sizes_arr = np.ones(n)
    cdef double[::1] sizes = sizes_arr
    alive_arr = np.ones(n, dtype=np.uint8)
    cdef unsigned char[::1] alive = alive_arr
    cdef Py_ssize_t s, i, j, bi, bj, q
    cdef double best, h, di, dj, nw
    with nogil:
        for s in range(n - 1):
            best = INFINITY
            bi = -1
            bj = -1
            for i in range(n):
                if not alive[i]:
                    continue
                for j in range(i + 1, n):
                    if alive[j] and full[i, j] < best:
                        best = full[i, j]
                        bi = i
                        bj = j
            if bi < 0:
                # all remaining distances infinite: take the first two alive slots
                for i in range(n):
                    if alive[i]:
                        if bi < 0:
                            bi = i
                        elif bj < 0:
                            bj = i
                best = INFINITY
            h = best
            if ids[bi] < ids[bj]:
                Z[s, 0] = ids[bi]
                Z[s, 1] = ids[bj]
            else:
                Z[s, 0] = ids[bj]
                Z[s, 1] = ids[bi]
            Z[s, 2] = h
            Z[s, 3] = sizes[bi] + sizes[bj]
            for q in range(n):
                if not alive[q] or q == bi or q == bj:
                    continue
                di = full[bi, q]
                dj = full[bj, q]
                if method == 0:
                    nw = di if di < dj else dj
                elif method == 1:
                    nw = di if di > dj else dj
                else:
                    nw = (sizes[bi] * di + sizes[bj] * dj) / (sizes[bi] + sizes[bj])
                full[bi, q] = nw
                full[q, bi] = nw
            sizes[bi] = sizes[bi] + sizes[bj]
            ids[bi] = n + s
            alive[bj] = 0
    return Z_arr
