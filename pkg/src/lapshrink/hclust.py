"""Agglomerative clustering, dendrogram-derived subpopulation networks and the
clustering-driven joint estimator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from . import _core
from .graph import SubpopulationNetwork
from .model import GroupedSample, group_moments

LINKAGES = {"single": 0, "complete": 1, "average": 2}


class DegenerateClusterError(ValueError):
    """A cut produced a cluster too small to estimate a covariance."""


@dataclass(frozen=True)
class Dendrogram:
    """Merge tree in linkage-matrix form.

    ``merges[s] = (a, b, height, size)``: leaves are ``0..n-1`` and the
    cluster created at step ``s`` is ``n + s``.
    """

    merges: np.ndarray
    n: int
    linkage: str

    @property
    def heights(self) -> np.ndarray:
        return self.merges[:, 2]

    def leaf_sets(self) -> list[frozenset]:
        """Leaf membership of every node id ``0..2n-2``."""
        sets = [frozenset([i]) for i in range(self.n)]
        for a, b, _, _ in self.merges:
            sets.append(sets[int(a)] | sets[int(b)])
        return sets


def hierarchical_cluster(data, linkage: str = "complete") -> Dendrogram:
    """Euclidean agglomerative clustering with deterministic tie-breaking."""
    X = np.asarray(data, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 2:
        raise ValueError("need at least two observations to cluster")
    if linkage not in LINKAGES:
        raise ValueError(f"linkage must be one of {sorted(LINKAGES)}")
    dist = squareform(pdist(X))
    Z = _core.agglomerate(np.ascontiguousarray(dist), LINKAGES[linkage])
    return Dendrogram(np.asarray(Z), X.shape[0], linkage)


def _cut_components(dendrogram: Dendrogram, K: int) -> list[list[int]]:
    n = dendrogram.n
    ds = list(range(2 * n - 1))

    def find(x):
        while ds[x] != x:
            ds[x] = ds[ds[x]]
            x = ds[x]
        return x

    # keep the n-K lowest merges
    for s in range(n - K):
        a, b = int(dendrogram.merges[s, 0]), int(dendrogram.merges[s, 1])
        ds[find(a)] = n + s
        ds[find(b)] = n + s
    comps: dict[int, list[int]] = {}
    for i in range(n):
        comps.setdefault(find(i), []).append(i)
    return sorted(comps.values(), key=lambda c: c[0])


def cut(dendrogram: Dendrogram, K: int) -> np.ndarray:
    """Membership in ``1..K`` after removing the ``K-1`` highest merges.

    Labels follow the order of each cluster's smallest member.
    """
    n = dendrogram.n
    if not 1 <= K <= n:
        raise ValueError(f"K must lie in 1..{n}")
    labels = np.zeros(n, dtype=int)
    for k, comp in enumerate(_cut_components(dendrogram, K)):
        labels[comp] = k + 1
    return labels


def cluster_dissimilarity(dendrogram: Dendrogram, membership) -> np.ndarray:
    """Cophenetic height of the first merge joining each pair of clusters."""
    membership = np.asarray(membership)
    K = int(membership.max())
    n = dendrogram.n
    owner = [frozenset([int(membership[i])]) for i in range(n)]
    Dk = np.full((K, K), np.nan)
    np.fill_diagonal(Dk, 0.0)
    for a, b, h, _ in dendrogram.merges:
        la, lb = owner[int(a)], owner[int(b)]
        for x in la:
            for y in lb:
                if x != y and np.isnan(Dk[x - 1, y - 1]):
                    Dk[x - 1, y - 1] = Dk[y - 1, x - 1] = h
        owner.append(la | lb)
    return Dk


def subpopulation_network_from_dendrogram(dendrogram: Dendrogram, membership, K: int | None = None,
                                          mode: str = "normalized") -> SubpopulationNetwork:
    """Weights are reciprocal cophenetic heights between clusters."""
    membership = np.asarray(membership)
    K = int(K or membership.max())
    if membership.max() != K:
        raise ValueError("membership does not use K labels")
    Dk = cluster_dissimilarity(dendrogram, membership)
    W = np.zeros((K, K))
    off = ~np.eye(K, dtype=bool)
    if np.any(Dk[off] <= 0):
        raise ValueError("zero dissimilarity between clusters; weights undefined")
    W[off] = 1.0 / Dk[off]
    return SubpopulationNetwork(W, mode)


def rand_index(a, b) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("partitions must have equal length")
    n = a.size
    if n < 2:
        return 1.0
    same_a = a[:, None] == a[None, :]
    same_b = b[:, None] == b[None, :]
    iu = np.triu_indices(n, 1)
    return float(np.mean(same_a[iu] == same_b[iu]))


def hc_lasich(data, K: int, config, linkage: str = "complete", mode: str = "normalized",
              screen: bool = True):
    """Cluster, build the dendrogram network, then jointly estimate.

    Returns
    -------
    (PrecisionEstimate, membership, SubpopulationNetwork)
    """
    from .admm import solve
    from .screening import solve_with_screening

    X = np.asarray(data, dtype=float)
    dend = hierarchical_cluster(X, linkage)
    membership = cut(dend, K)
    sizes = np.bincount(membership, minlength=K + 1)[1:]
    if np.any(sizes < 2):
        raise DegenerateClusterError(f"cluster sizes {sizes.tolist()}: every cluster needs >= 2 members")
    if K == 1:
        network = SubpopulationNetwork(np.zeros((1, 1)), mode)
    else:
        network = subpopulation_network_from_dendrogram(dend, membership, K, mode)
    moments = group_moments(GroupedSample(X, membership, K))
    est = solve_with_screening(moments, network, config) if screen else solve(moments, network, config)
    return est, membership, network
