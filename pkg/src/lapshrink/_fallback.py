"""Pure numpy implementations of the hot kernels.

Signatures mirror ``_kernels.pyx`` exactly; ``lapshrink._core`` picks one at import.
"""

import numpy as np

SINGLE, COMPLETE, AVERAGE = 0, 1, 2


def admm_entry_step(A, B, C, D, EA, EB, EC, half, half_inv, L_eps, sys_inv,
                    thr_l1, thr_fuse, varrho, fusion):
    """B, C, D and dual updates of one ADMM sweep, in place.

    All matrix arguments are ``(K, p, p)`` float64 arrays except ``half``,
    ``half_inv``, ``L_eps`` and ``sys_inv`` which are ``(K, K)``. ``A`` must
    already hold the current iterate. Returns the max-over-groups Frobenius
    norms ``(r_A, r_B, r_C, s)``.
    """
    K, p, _ = D.shape
    D_prev = D.copy()
    diag = np.arange(p)

    # B: soft-threshold off-diagonals
    X = D_prev - EB
    Bn = np.sign(X) * np.maximum(np.abs(X) - thr_l1, 0.0)
    Bn[:, diag, diag] = X[:, diag, diag]
    B[...] = Bn

    if fusion:
        U = np.tensordot(half, D_prev, axes=(1, 0)) - EC
        V = D_prev - np.tensordot(half_inv, EC, axes=(1, 0))
        nrm = np.sqrt(np.sum(U * U, axis=0))
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(nrm > 0, 1.0 - thr_fuse / nrm, 0.0)
        scale = np.maximum(scale, 0.0)
        scale[diag, diag] = 1.0
        C[...] = scale[None] * V
        rhs = (A + EA + B + EB + np.tensordot(L_eps, C, axes=(1, 0))
               + np.tensordot(half.T, EC, axes=(1, 0)))
        Dn = np.tensordot(sys_inv, rhs, axes=(1, 0))
    else:
        Dn = 0.5 * (A + EA + B + EB)

    Dn = 0.5 * (Dn + np.swapaxes(Dn, 1, 2))
    D[...] = Dn
    if not fusion:
        C[...] = Dn

    EA += A - D
    EB += B - D
    if fusion:
        EC += np.tensordot(half, C - D, axes=(1, 0))

    def fro(M):
        return float(np.sqrt(np.max(np.sum(M * M, axis=(1, 2)))))

    return fro(A - D), fro(B - D), fro(C - D), varrho * fro(D - D_prev)


def box_qp_min_norm(b, M, rho, tol=1e-10, max_iter=500):
    """Minimize ``||M (b_m - rho v)||`` over ``v`` in ``[-1, 1]^K`` for every row ``b_m``.

    Projected gradient from ``clip(b/rho)``; each step uses a Cauchy-length
    trial, projects, then an exact line search on the feasible segment.
    Returns the minimal norms, shape ``(m,)``.
    """
    b = np.atleast_2d(np.asarray(b, dtype=float))
    m, K = b.shape
    Q = M.T @ M
    H = rho * rho * Q
    lin = rho * b @ Q  # gradient = v @ H - lin
    v = np.clip(b / rho, -1.0, 1.0)
    active = np.ones(m, dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        va = v[active]
        g = va @ H - lin[active]
        gHg = np.einsum("ij,jk,ik->i", g, H, g)
        gg = np.sum(g * g, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            alpha = np.where(gHg > 0, gg / gHg, 1.0)
        d = np.clip(va - alpha[:, None] * g, -1.0, 1.0) - va
        dHd = np.einsum("ij,jk,ik->i", d, H, d)
        gd = np.sum(g * d, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            beta = np.where(dHd > 0, -gd / dHd, 1.0)
        beta = np.clip(beta, 0.0, 1.0)
        step = beta[:, None] * d
        v[active] = va + step
        done = np.sqrt(np.sum(d * d, axis=1)) <= tol
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    r = (b - rho * v) @ M.T
    return np.sqrt(np.sum(r * r, axis=1))


def agglomerate(dist, method):
    """Agglomerative clustering on a full distance matrix.

    Returns an ``(n-1, 4)`` merge table ``[id_a, id_b, height, size]`` with
    leaves ``0..n-1`` and the cluster formed at step ``s`` numbered ``n+s``.
    Ties go to the lexicographically smallest pair of active slots.
    """
    Dm = np.array(dist, dtype=float)
    n = Dm.shape[0]
    big = np.inf
    work = Dm.copy()
    work[np.tril_indices(n)] = big
    ids = np.arange(n)
    sizes = np.ones(n)
    alive = np.ones(n, dtype=bool)
    Z = np.zeros((n - 1, 4))
    full = Dm.copy()
    for s in range(n - 1):
        flat = int(np.argmin(work))
        i, j = divmod(flat, n)
        h = work[i, j]
        a, b = ids[i], ids[j]
        Z[s] = (min(a, b), max(a, b), h, sizes[i] + sizes[j])
        di, dj = full[i], full[j]
        if method == SINGLE:
            new = np.minimum(di, dj)
        elif method == COMPLETE:
            new = np.maximum(di, dj)
        else:
            new = (sizes[i] * di + sizes[j] * dj) / (sizes[i] + sizes[j])
        full[i, :] = new
        full[:, i] = new
        sizes[i] += sizes[j]
        ids[i] = n + s
        alive[j] = False
        work[j, :] = big
        work[:, j] = big
        row = np.where(alive[i + 1:], new[i + 1:], big)
        work[i, i + 1:] = row
        col = np.where(alive[:i], new[:i], big)
        work[:i, i] = col
    return Z
