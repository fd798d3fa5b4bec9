"""Block-diagonal screening from sample correlations.

A coordinate pair whose weighted correlation vector can be absorbed by the
penalty subgradients is zero in every group's solution. Connected components
of the remaining pairs give a block structure shared by all groups, and each
block is solved on its own.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _core
from .admm import SolverConfig, _bundle, solve
from .graph import LaplacianBundle
from .model import GroupMoments, PrecisionEstimate, scale_to_precision

QP_TOL = 1e-10
QP_MAX_ITER = 500


class DisjointSets:
    """Union-find with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True

    def groups(self) -> list[list[int]]:
        out: dict[int, list[int]] = {}
        for x in range(len(self.parent)):
            out.setdefault(self.find(x), []).append(x)
        return sorted(out.values(), key=lambda g: g[0])


@dataclass(frozen=True)
class BlockPartition:
    blocks: list  # list of sorted 0-based index lists, ordered by smallest member
    rho_n: float
    rho_2: float
    p: int = field(default=0)

    def __post_init__(self):
        seen = sorted(i for b in self.blocks for i in b)
        if any(len(b) == 0 for b in self.blocks):
            raise ValueError("blocks must be nonempty")
        p = self.p or len(seen)
        if seen != list(range(p)):
            raise ValueError("blocks must partition 0..p-1")
        object.__setattr__(self, "p", p)

    def __len__(self) -> int:
        return len(self.blocks)

    def to_json(self) -> dict:
        """1-based indices."""
        return {
            "blocks": [[i + 1 for i in b] for b in self.blocks],
            "rho_n": self.rho_n,
            "rho_2": self.rho_2,
        }


def _metric(bundle: LaplacianBundle) -> np.ndarray:
    # rows: eigen-directions scaled by (lambda_k + eps)^(-1/2)
    return (bundle.eigenvectors / np.sqrt(bundle.eps_eigenvalues)).T


def screening_norms(psi_vectors, weights, bundle: LaplacianBundle, rho_n: float) -> np.ndarray:
    """Minimized norms for a batch of correlation vectors, shape ``(m, K)`` -> ``(m,)``."""
    psi = np.atleast_2d(np.asarray(psi_vectors, dtype=float))
    b = psi * np.asarray(weights, dtype=float)[None, :]
    if rho_n == 0:
        M = _metric(bundle)
        r = b @ M.T
        return np.sqrt(np.sum(r * r, axis=1))
    return _core.box_qp_min_norm(np.ascontiguousarray(b), np.ascontiguousarray(_metric(bundle)),
                                 float(rho_n), QP_TOL, QP_MAX_ITER)


def _screened_mask(b, bundle, config) -> np.ndarray:
    rho = config.rho_n
    inside = np.all(np.abs(b) <= rho, axis=1)
    if config.rho_2 == 0:
        # no Laplacian block: condition is exactly the box test
        return inside
    out = inside.copy()
    rest = np.flatnonzero(~inside)
    if rest.size:
        norms = screening_norms(b[rest], np.ones(b.shape[1]), bundle, rho)
        out[rest] = norms <= rho * config.rho_2
    return out


def pair_is_screened(psi_ij, weights, bundle, config: SolverConfig) -> bool:
    """True if pair ``(i, j)`` is certified zero in every group."""
    bundle = _bundle(bundle, config.epsilon)
    b = np.asarray(psi_ij, dtype=float) * np.asarray(weights, dtype=float)
    return bool(_screened_mask(b[None, :], bundle, config)[0])


def block_partition(moments: GroupMoments, network, config: SolverConfig) -> BlockPartition:
    bundle = _bundle(network, config.epsilon)
    p = moments.p
    iu, ju = np.triu_indices(p, 1)
    b = moments.correlations[:, iu, ju].T * moments.weights[None, :]
    screened = _screened_mask(b, bundle, config) if b.size else np.ones(0, dtype=bool)
    ds = DisjointSets(p)
    for i, j in zip(iu[~screened].tolist(), ju[~screened].tolist()):
        ds.union(i, j)
    return BlockPartition(ds.groups(), config.rho_n, config.rho_2, p)


def solve_with_screening(moments: GroupMoments, network, config: SolverConfig,
                         partition: BlockPartition | None = None) -> PrecisionEstimate:
    """Solve block by block; singletons are solved in closed form."""
    bundle = _bundle(network, config.epsilon)
    if partition is None:
        partition = block_partition(moments, bundle, config)
    K, p = moments.K, moments.p
    theta = np.zeros((K, p, p))
    iterations, converged, residual = 0, True, 0.0
    for block in partition.blocks:
        idx = np.asarray(block)
        if idx.size == 1:
            # unpenalized diagonal: w(psi_ii - 1/theta_ii) = 0 with psi_ii = 1
            i = idx[0]
            theta[:, i, i] = 1.0 / moments.correlations[:, i, i]
            continue
        est = solve(moments.restrict(idx), bundle, config)
        theta[np.ix_(np.arange(K), idx, idx)] = est.theta
        iterations = max(iterations, est.iterations)
        converged &= est.converged
        residual = max(residual, est.final_residual)
    omega = scale_to_precision(theta, moments.variances)
    return PrecisionEstimate(
        theta=theta,
        omega=omega,
        iterations=iterations,
        converged=converged,
        final_residual=residual,
        blocks=[list(b) for b in partition.blocks],
    )
