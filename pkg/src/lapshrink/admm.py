"""ADMM for the l1 + Laplacian-shrinkage penalized correlation likelihood.

The solver splits the problem into a likelihood block ``A``, a sparsity block
``B``, a Laplacian block ``C`` and a consensus block ``D`` with scaled duals
``E_A, E_B, E_C``. Entry vectors such as ``d_ij`` run across the group axis.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import lsq_linear

from . import _core
from .graph import DEFAULT_EPSILON, LaplacianBundle, SubpopulationNetwork, laplacian
from .model import (
    GroupMoments,
    NotPositiveDefiniteError,
    PrecisionEstimate,
    is_positive_definite,
    negative_correlation_loglik,
    scale_to_precision,
)

logger = logging.getLogger(__name__)


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SolverConfig:
    rho_n: float
    rho_2: float = 0.0
    epsilon: float = DEFAULT_EPSILON
    varrho: float = 1.0
    tol: float = 1e-6
    max_iter: int = 2000

    def __post_init__(self):
        if not self.rho_n >= 0:
            raise ValueError("rho_n must be nonnegative")
        if not self.rho_2 >= 0:
            raise ValueError("rho_2 must be nonnegative")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.varrho > 0:
            raise ValueError("varrho must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")

    def replace(self, **changes) -> "SolverConfig":
        return SolverConfig(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SolverState:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    EA: np.ndarray
    EB: np.ndarray
    EC: np.ndarray
    iteration: int = 0
    residuals: tuple = (np.inf, np.inf, np.inf, np.inf)

    @classmethod
    def initial(cls, K: int, p: int) -> "SolverState":
        eye = np.broadcast_to(np.eye(p), (K, p, p))
        return cls(
            A=eye.copy(), B=eye.copy(), C=eye.copy(), D=eye.copy(),
            EA=np.zeros((K, p, p)), EB=np.zeros((K, p, p)), EC=np.zeros((K, p, p)),
        )


def _bundle(network_or_bundle, epsilon) -> LaplacianBundle:
    if isinstance(network_or_bundle, LaplacianBundle):
        return network_or_bundle
    return laplacian(network_or_bundle, epsilon)


# --- individual updates -------------------------------------------------------

def update_concentration(moments: GroupMoments, D, EA, config: SolverConfig) -> np.ndarray:
    """Likelihood block: closed-form proximal step per group via eigendecomposition."""
    rho = config.varrho
    w = moments.weights
    A = np.empty_like(D)
    for k in range(moments.K):
        M = D[k] - EA[k]
        m, Q = np.linalg.eigh(rho * M - w[k] * moments.correlations[k])
        a = (m + np.sqrt(m * m + 4.0 * rho * w[k])) / (2.0 * rho)
        A[k] = (Q * a) @ Q.T
    return 0.5 * (A + np.swapaxes(A, 1, 2))


def soft_threshold(x, y):
    """``S_y(x)``: shrink toward zero by ``y``, zero inside ``[-y, y]``."""
    if np.any(np.asarray(y) < 0):
        raise ValueError("threshold must be nonnegative")
    return np.sign(x) * np.maximum(np.abs(x) - y, 0.0)


def update_sparsity(D, EB, config: SolverConfig) -> np.ndarray:
    X = np.asarray(D) - np.asarray(EB)
    B = soft_threshold(X, config.rho_n / config.varrho)
    p = X.shape[-1]
    idx = np.arange(p)
    B[..., idx, idx] = X[..., idx, idx]
    return B


def group_shrink(v, norm, threshold):
    """``(1 - threshold/norm)_+ * v``; zero when ``norm`` is zero."""
    norm = np.asarray(norm, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norm > 0, 1.0 - threshold / norm, 0.0)
    return np.maximum(scale, 0.0) * v


def update_fusion(D, EC, bundle: LaplacianBundle, config: SolverConfig) -> np.ndarray:
    """Laplacian block: group shrinkage of every off-diagonal entry vector."""
    D = np.asarray(D, dtype=float)
    EC = np.asarray(EC, dtype=float)
    p = D.shape[-1]
    U = np.tensordot(bundle.half, D, axes=(1, 0)) - EC
    V = D - np.tensordot(bundle.half_inv, EC, axes=(1, 0))
    nrm = np.sqrt(np.sum(U * U, axis=0))
    thr = config.rho_n * config.rho_2 / config.varrho
    C = group_shrink(V, nrm[None], thr)
    idx = np.arange(p)
    C[:, idx, idx] = V[:, idx, idx]
    return C


def consensus_system(bundle: LaplacianBundle) -> np.ndarray:
    """Inverse of ``2I + L_eps``; factored once per solve."""
    K = bundle.K
    return np.linalg.inv(2.0 * np.eye(K) + bundle.L_eps)


def update_consensus(A, B, C, EA, EB, EC, bundle: LaplacianBundle | None) -> np.ndarray:
    """Consensus block. ``bundle=None`` drops the Laplacian block (plain averaging)."""
    if bundle is None:
        D = 0.5 * (A + EA + B + EB)
    else:
        rhs = (A + EA + B + EB + np.tensordot(bundle.L_eps, C, axes=(1, 0))
               + np.tensordot(bundle.half.T, EC, axes=(1, 0)))
        D = np.tensordot(consensus_system(bundle), rhs, axes=(1, 0))
    return 0.5 * (D + np.swapaxes(D, 1, 2))


def update_duals(state: SolverState, bundle: LaplacianBundle | None) -> SolverState:
    state.EA = state.EA + state.A - state.D
    state.EB = state.EB + state.B - state.D
    if bundle is not None:
        state.EC = state.EC + np.tensordot(bundle.half, state.C - state.D, axes=(1, 0))
    return state


def reference_step(state: SolverState, moments, bundle, config) -> SolverState:
    """One ADMM sweep assembled from the individual updates (slow, for checking kernels)."""
    fusion = config.rho_2 > 0
    D_prev = state.D
    A = update_concentration(moments, state.D, state.EA, config)
    B = update_sparsity(state.D, state.EB, config)
    C = update_fusion(state.D, state.EC, bundle, config) if fusion else None
    D = update_consensus(A, B, C, state.EA, state.EB, state.EC, bundle if fusion else None)
    if not fusion:
        C = D.copy()
    new = SolverState(A=A, B=B, C=C, D=D, EA=state.EA, EB=state.EB, EC=state.EC,
                      iteration=state.iteration + 1)
    update_duals(new, bundle if fusion else None)

    def fro(M):
        return float(np.sqrt(np.max(np.sum(M * M, axis=(1, 2)))))

    new.residuals = (fro(A - D), fro(B - D), fro(C - D), config.varrho * fro(D - D_prev))
    return new


# --- solver -------------------------------------------------------------------

def objective(theta, moments: GroupMoments, bundle: LaplacianBundle, config: SolverConfig) -> float:
    """Penalized objective with ``L_eps`` in the Laplacian term."""
    theta = np.asarray(theta, dtype=float)
    p = theta.shape[-1]
    off = ~np.eye(p, dtype=bool)
    val = negative_correlation_loglik(theta, moments)
    val += config.rho_n * float(np.abs(theta[:, off]).sum())
    if config.rho_2 > 0:
        T = theta[:, off]  # (K, m)
        q = np.einsum("km,kl,lm->m", T, bundle.L_eps, T)
        val += config.rho_n * config.rho_2 * float(np.sqrt(np.maximum(q, 0)).sum())
    return val


def _estimate_from_state(state: SolverState, moments: GroupMoments, converged: bool,
                         extra: dict | None = None, fusion: bool = False) -> PrecisionEstimate:
    p = state.D.shape[-1]
    idx = np.arange(p)
    keep = state.B != 0
    if fusion:
        # a fused-to-zero entry vector is an exact zero even if B still carries residue
        keep &= state.C != 0
    theta = np.where(keep, state.D, 0.0)
    theta[:, idx, idx] = state.D[:, idx, idx]
    theta = 0.5 * (theta + np.swapaxes(theta, 1, 2))
    omega = scale_to_precision(theta, moments.variances)
    return PrecisionEstimate(
        theta=theta,
        omega=omega,
        iterations=state.iteration,
        converged=converged,
        final_residual=float(max(state.residuals)),
        info=dict(extra or {}),
    )


def solve(moments: GroupMoments, network, config: SolverConfig,
          state: SolverState | None = None, return_state: bool = False):
    """Run ADMM to tolerance.

    Parameters
    ----------
    moments : GroupMoments
    network : SubpopulationNetwork or LaplacianBundle
    config : SolverConfig
    state : SolverState, optional
        Starting iterate; defaults to identities with zero duals.

    Returns
    -------
    PrecisionEstimate
        ``theta`` holds the consensus values on the support of the sparsity
        block. ``converged`` is False if ``max_iter`` was hit.
    """
    bundle = _bundle(network, config.epsilon)
    K, p = moments.K, moments.p
    if bundle.K != K:
        raise ValueError(f"network has {bundle.K} nodes but data has {K} groups")
    fusion = config.rho_2 > 0
    if state is None:
        state = SolverState.initial(K, p)
    thr_l1 = config.rho_n / config.varrho
    thr_fuse = config.rho_n * config.rho_2 / config.varrho
    half = np.ascontiguousarray(bundle.half)
    half_inv = np.ascontiguousarray(bundle.half_inv)
    L_eps = np.ascontiguousarray(bundle.L_eps)
    sys_inv = np.ascontiguousarray(consensus_system(bundle))
    arrays = [np.ascontiguousarray(getattr(state, n), dtype=float)
              for n in ("B", "C", "D", "EA", "EB", "EC")]
    B, C, D, EA, EB, EC = arrays
    A = state.A
    converged = False
    it = state.iteration
    res = state.residuals
    for _ in range(int(config.max_iter)):
        it += 1
        A = np.ascontiguousarray(update_concentration(moments, D, EA, config))
        res = _core.admm_entry_step(A, B, C, D, EA, EB, EC, half, half_inv, L_eps, sys_inv,
                                    thr_l1, thr_fuse, config.varrho, fusion)
        if max(res) < config.tol:
            converged = True
            break
    state = SolverState(A=A, B=B, C=C, D=D, EA=EA, EB=EB, EC=EC, iteration=it,
                        residuals=tuple(float(r) for r in res))
    if not converged:
        warnings.warn(f"ADMM did not converge in {config.max_iter} iterations "
                      f"(residual {max(res):.3e})", ConvergenceWarning, stacklevel=2)
    logger.debug("admm finished: iterations=%d residual=%.3e", it, max(res))
    est = _estimate_from_state(state, moments, converged, fusion=fusion)
    if return_state:
        return est, state
    return est


def fit(moments: GroupMoments, network: SubpopulationNetwork, config: SolverConfig,
        screen: bool = True) -> PrecisionEstimate:
    if screen:
        from .screening import solve_with_screening
        return solve_with_screening(moments, network, config)
    return solve(moments, network, config)


# --- optimality oracle --------------------------------------------------------

def _distance_to_subgradient_set(g, rho, rho2, half, max_iter=5000):
    """Distance from ``-g`` to ``rho*[-1,1]^K + rho*rho2*half*ball`` by accelerated projected gradient."""
    K = g.size
    Mfull = np.hstack([rho * np.eye(K), rho * rho2 * half])
    Lip = np.linalg.norm(Mfull, 2) ** 2
    x = np.concatenate([np.clip(-g / max(rho, 1e-300), -1, 1), np.zeros(K)])
    y = x.copy()
    t = 1.0
    best = np.linalg.norm(g + Mfull @ x)

    def proj(u):
        out = u.copy()
        out[:K] = np.clip(out[:K], -1.0, 1.0)
        nz = np.linalg.norm(out[K:])
        if nz > 1:
            out[K:] /= nz
        return out

    for _ in range(max_iter):
        grad = Mfull.T @ (g + Mfull @ y)
        xn = proj(y - grad / Lip)
        tn = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        y = xn + ((t - 1) / tn) * (xn - x)
        x, t = xn, tn
        best = min(best, np.linalg.norm(g + Mfull @ x))
    return best


def kkt_violation(estimate, moments: GroupMoments, bundle, config: SolverConfig,
                  return_detail: bool = False):
    """Largest violation of the stationarity conditions at ``estimate``.

    For every off-diagonal entry vector the violation is the Euclidean distance
    from minus the likelihood gradient to the set of admissible penalty
    subgradients; diagonal entries must have zero gradient.
    """
    theta = estimate.theta if isinstance(estimate, PrecisionEstimate) else np.asarray(estimate)
    theta = np.asarray(theta, dtype=float)
    bundle = _bundle(bundle, config.epsilon)
    K, p, _ = theta.shape
    w = moments.weights
    G = np.empty_like(theta)
    for k in range(K):
        if not is_positive_definite(theta[k]):
            raise NotPositiveDefiniteError(f"estimate for group {k + 1} is not positive definite")
        G[k] = w[k] * (moments.correlations[k] - np.linalg.inv(theta[k]))
    rho, rho2 = config.rho_n, config.rho_2
    fusion = rho2 > 0
    L = bundle.L_eps
    half, half_inv = bundle.half, bundle.half_inv

    diag_viol = float(np.max(np.abs(G[:, np.arange(p), np.arange(p)])))
    worst = diag_viol
    where = ("diag", None)
    for i in range(p):
        for j in range(i + 1, p):
            t = theta[:, i, j]
            g = G[:, i, j]
            nz = t != 0
            if fusion and nz.any():
                Lt = L @ t
                u2 = Lt / np.sqrt(t @ Lt)
                r = g + rho * rho2 * u2
                per = np.where(nz, np.abs(r + rho * np.sign(t)), np.maximum(np.abs(r) - rho, 0.0))
                v = float(np.linalg.norm(per))
            elif not fusion:
                per = np.where(nz, np.abs(g + rho * np.sign(t)), np.maximum(np.abs(g) - rho, 0.0))
                v = float(np.linalg.norm(per))
            else:
                # all-zero vector: feasible iff some box point lands in the scaled ellipsoid
                sol = lsq_linear(rho * half_inv, -half_inv @ g, bounds=(-1.0, 1.0),
                                 method="bvls", tol=1e-14)
                if np.linalg.norm(sol.fun) <= rho * rho2 * (1 + 1e-9):
                    v = 0.0
                else:
                    v = _distance_to_subgradient_set(g, rho, rho2, half)
            if v > worst:
                worst, where = v, (i, j)
    if return_detail:
        return worst, {"diagonal": diag_viol, "argmax": where}
    return worst
