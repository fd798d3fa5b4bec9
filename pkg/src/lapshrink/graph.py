"""Subpopulation networks and their (perturbed) graph Laplacians."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

MODES = ("normalized", "unnormalized", "identity")
DEFAULT_EPSILON = 1e-3


@dataclass(frozen=True)
class SubpopulationNetwork:
    """Weighted similarity graph on ``K`` subpopulations.

    Parameters
    ----------
    weights : ndarray, shape (K, K)
        Symmetric, nonnegative, zero diagonal.
    mode : {"normalized", "unnormalized", "identity"}
        Which Laplacian the penalty uses. ``"identity"`` gives the plain
        Euclidean group penalty regardless of the weights.
    """

    weights: np.ndarray
    mode: str = "normalized"

    def __post_init__(self):
        W = np.array(self.weights, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError("weights must be a square matrix")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if np.any(W < 0):
            raise ValueError("network weights must be nonnegative")
        if not np.allclose(W, W.T, rtol=0, atol=1e-12):
            raise ValueError("network weights must be symmetric")
        if np.any(np.diag(W) != 0):
            raise ValueError("network weights must have a zero diagonal")
        W = 0.5 * (W + W.T)
        W.setflags(write=False)
        object.__setattr__(self, "weights", W)

    @property
    def K(self) -> int:
        return self.weights.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    def edges(self) -> list[tuple[int, int, float]]:
        i, j = np.nonzero(np.triu(self.weights, 1))
        return [(int(a), int(b), float(self.weights[a, b])) for a, b in zip(i, j)]

    def with_mode(self, mode: str) -> "SubpopulationNetwork":
        return SubpopulationNetwork(self.weights, mode)

    def to_json(self) -> dict:
        """JSON form with 1-based node indices."""
        return {
            "K": self.K,
            "mode": self.mode,
            "edges": [[a + 1, b + 1, w] for a, b, w in self.edges()],
        }

    @classmethod
    def from_json(cls, obj) -> "SubpopulationNetwork":
        if isinstance(obj, str):
            obj = json.loads(obj)
        K = int(obj["K"])
        if K < 1:
            raise ValueError("K must be positive")
        W = np.zeros((K, K))
        for edge in obj.get("edges", []):
            a, b, w = int(edge[0]) - 1, int(edge[1]) - 1, float(edge[2])
            if not (0 <= a < K and 0 <= b < K) or a == b:
                raise ValueError(f"invalid edge {edge!r} for K={K}")
            W[a, b] = W[b, a] = w
        return cls(W, obj.get("mode", "normalized"))


def build_complete_graph(K: int, mode: str = "normalized") -> SubpopulationNetwork:
    if K < 1:
        raise ValueError("K must be at least 1")
    return SubpopulationNetwork(np.ones((K, K)) - np.eye(K), mode)


def build_line_graph(K: int, mode: str = "normalized") -> SubpopulationNetwork:
    if K < 1:
        raise ValueError("K must be at least 1")
    W = np.zeros((K, K))
    idx = np.arange(K - 1)
    W[idx, idx + 1] = W[idx + 1, idx] = 1.0
    return SubpopulationNetwork(W, mode)


def build_empty_graph(K: int, mode: str = "unnormalized") -> SubpopulationNetwork:
    if K < 1:
        raise ValueError("K must be at least 1")
    return SubpopulationNetwork(np.zeros((K, K)), mode)


def build_star_graph(K: int, center: int = 0, mode: str = "normalized") -> SubpopulationNetwork:
    """Star around ``center`` (0-based); for K=3, center 0 links group 1 to groups 2 and 3."""
    if K < 1:
        raise ValueError("K must be at least 1")
    W = np.zeros((K, K))
    others = [k for k in range(K) if k != center]
    W[center, others] = W[others, center] = 1.0
    return SubpopulationNetwork(W, mode)


def laplacian_matrix(network: SubpopulationNetwork) -> np.ndarray:
    W = network.weights
    K = network.K
    if network.mode == "identity":
        return np.eye(K)
    d = W.sum(axis=1)
    if network.mode == "unnormalized":
        return np.diag(d) - W
    # isolated nodes get a zero row and column
    connected = d > 0
    s = np.zeros(K)
    s[connected] = 1.0 / np.sqrt(d[connected])
    L = np.diag(connected.astype(float)) - s[:, None] * W * s[None, :]
    return 0.5 * (L + L.T)


@dataclass(frozen=True, eq=False)
class LaplacianBundle:
    """Laplacian ``L`` with its spectrum and the perturbed factor of ``L + eps*I``."""

    L: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    epsilon: float
    mode: str

    @property
    def K(self) -> int:
        return self.L.shape[0]

    @property
    def spectral_norm(self) -> float:
        return float(max(self.eigenvalues[-1], 0.0))

    @cached_property
    def eps_eigenvalues(self) -> np.ndarray:
        return np.maximum(self.eigenvalues, 0.0) + self.epsilon

    @cached_property
    def L_eps(self) -> np.ndarray:
        return self.L + self.epsilon * np.eye(self.K)

    @cached_property
    def half(self) -> np.ndarray:
        U = self.eigenvectors
        return (U * np.sqrt(self.eps_eigenvalues)) @ U.T

    @cached_property
    def half_inv(self) -> np.ndarray:
        U = self.eigenvectors
        return (U / np.sqrt(self.eps_eigenvalues)) @ U.T

    @cached_property
    def inv(self) -> np.ndarray:
        U = self.eigenvectors
        return (U / self.eps_eigenvalues) @ U.T


def laplacian(network: SubpopulationNetwork, epsilon: float = DEFAULT_EPSILON) -> LaplacianBundle:
    """Laplacian bundle with ascending eigenvalues and ``L_eps^{1/2}`` from the eigenbasis."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    L = laplacian_matrix(network)
    ev, U = np.linalg.eigh(L)
    for a in (L, ev, U):
        a.setflags(write=False)
    return LaplacianBundle(L=L, eigenvalues=ev, eigenvectors=U, epsilon=float(epsilon), mode=network.mode)


def laplacian_penalty(theta_ij, bundle_or_L) -> float:
    """``sqrt(theta' L theta)`` using the unperturbed Laplacian."""
    L = bundle_or_L.L if isinstance(bundle_or_L, LaplacianBundle) else np.asarray(bundle_or_L)
    t = np.asarray(theta_ij, dtype=float)
    q = float(t @ L @ t)
    return float(np.sqrt(max(q, 0.0)))
