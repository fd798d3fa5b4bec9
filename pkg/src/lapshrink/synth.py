"""Synthetic block-diagonal precision families and Gaussian samples."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .model import NotPositiveDefiniteError, is_positive_definite

GRAPH_KINDS = ("erdos_renyi", "scale_free")


@dataclass(frozen=True)
class PrecisionFamilySpec:
    p: int = 100
    n_components: int = 4
    graph_kind: str = "erdos_renyi"
    total_edges: int = 95
    value_range: tuple = (0.5, 0.7)
    diag_boost: float = 0.1
    perturbation_range: tuple = (-0.2, 0.2)
    seed: int = 0

    def __post_init__(self):
        if self.p < 1 or self.n_components < 1 or self.p % self.n_components:
            raise ValueError("p must be a positive multiple of n_components")
        if self.graph_kind not in GRAPH_KINDS:
            raise ValueError(f"graph_kind must be one of {GRAPH_KINDS}")
        lo, hi = self.value_range
        if not (0 <= lo <= hi < 1):
            raise ValueError("value_range must lie inside [0, 1)")
        if not self.diag_boost > 0:
            raise ValueError("diag_boost must be positive")
        size = self.p // self.n_components
        if not 0 <= self.total_edges <= self.n_components * size * (size - 1) // 2:
            raise ValueError("total_edges exceeds the capacity of the component graphs")

    @property
    def component_size(self) -> int:
        return self.p // self.n_components

    def components(self) -> list[np.ndarray]:
        s = self.component_size
        return [np.arange(c * s, (c + 1) * s) for c in range(self.n_components)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["value_range"] = list(self.value_range)
        d["perturbation_range"] = list(self.perturbation_range)
        return d


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_graph(kind: str, nodes: int, edges: int, seed=None) -> np.ndarray:
    """Symmetric boolean adjacency with exactly ``edges`` edges."""
    cap = nodes * (nodes - 1) // 2
    if not 0 <= edges <= cap:
        raise ValueError(f"cannot place {edges} edges on {nodes} nodes")
    rng = _rng(seed)
    adj = np.zeros((nodes, nodes), dtype=bool)
    if edges == 0:
        return adj
    iu, ju = np.triu_indices(nodes, 1)
    if kind == "erdos_renyi":
        pick = rng.choice(cap, size=edges, replace=False)
        adj[iu[pick], ju[pick]] = True
    elif kind == "scale_free":
        adj = _preferential_attachment(nodes, edges, rng)
        current = int(np.triu(adj, 1).sum())
        if current > edges:
            i, j = np.nonzero(np.triu(adj, 1))
            drop = rng.choice(current, size=current - edges, replace=False)
            adj[i[drop], j[drop]] = False
        elif current < edges:
            i, j = np.nonzero(np.triu(~adj, 1))
            add = rng.choice(i.size, size=edges - current, replace=False)
            adj[i[add], j[add]] = True
        adj = np.triu(adj, 1)
    else:
        raise ValueError(f"unknown graph kind {kind!r}")
    return adj | adj.T


def _preferential_attachment(nodes: int, edges: int, rng) -> np.ndarray:
    m = max(1, min(nodes - 1, round(edges / max(nodes - 1, 1))))
    adj = np.zeros((nodes, nodes), dtype=bool)
    # seed with a clique on m+1 nodes, then attach each node to m targets by degree
    m0 = min(m + 1, nodes)
    for a in range(m0):
        for b in range(a + 1, m0):
            adj[a, b] = adj[b, a] = True
    for v in range(m0, nodes):
        deg = adj[:v, :v].sum(axis=1).astype(float) + 1e-12
        targets = rng.choice(v, size=min(m, v), replace=False, p=deg / deg.sum())
        adj[v, targets] = adj[targets, v] = True
    return adj


def _split_edges(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if c < extra else 0) for c in range(parts)]


def _signed_uniform(rng, size, lo, hi):
    return rng.uniform(lo, hi, size) * rng.choice([-1.0, 1.0], size)


def _boost(A: np.ndarray, diag_boost: float) -> tuple[np.ndarray, bool]:
    """Shift the diagonal to make ``A`` positive definite.

    Returns the matrix and whether the literal ``+diag_boost`` had to be enlarged.
    """
    lam = float(np.linalg.eigvalsh(A)[0])
    repaired = lam <= 0
    shift = (abs(lam) + diag_boost) if repaired else diag_boost
    out = A + shift * np.eye(A.shape[0])
    return 0.5 * (out + out.T), repaired


def build_precision_family(spec: PrecisionFamilySpec, n_groups: int = 3):
    """Three related block-diagonal precision matrices.

    Group 1 uses every component; group ``g >= 2`` has component ``g`` removed
    and the remaining nonzeros perturbed.

    Returns
    -------
    omegas : ndarray, shape (n_groups, p, p)
    supports : ndarray of bool, shape (n_groups, p, p)
        Off-diagonal supports.
    meta : dict
    """
    rng = np.random.default_rng(spec.seed)
    p = spec.p
    comps = spec.components()
    adj = np.zeros((p, p), dtype=bool)
    for comp, e in zip(comps, _split_edges(spec.total_edges, spec.n_components)):
        sub = random_graph(spec.graph_kind, comp.size, e, rng)
        adj[np.ix_(comp, comp)] = sub
    iu, ju = np.nonzero(np.triu(adj, 1))
    base = np.zeros((p, p))
    vals = _signed_uniform(rng, iu.size, *spec.value_range)
    base[iu, ju] = vals
    base = base + base.T

    mats, repaired = [], []
    for g in range(n_groups):
        A = base.copy()
        if g >= 1:
            comp = comps[g % spec.n_components]
            A[np.ix_(comp, comp)] = 0.0
            nz = np.triu(A != 0, 1)
            i, j = np.nonzero(nz)
            A[i, j] += rng.uniform(*spec.perturbation_range, i.size)
            A[j, i] = A[i, j]
        Om, rep = _boost(A, spec.diag_boost)
        if not is_positive_definite(Om):
            raise NotPositiveDefiniteError(f"group {g + 1}: diagonal repair failed to give PD")
        mats.append(Om)
        repaired.append(rep)
    omegas = np.stack(mats)
    supports = omegas != 0
    idx = np.arange(p)
    supports[:, idx, idx] = False
    pc = partial_correlation_range(omegas)
    meta = {
        "diag_repaired": repaired,
        "partial_correlation_range": list(pc),
        "removed_component": [None] + [g % spec.n_components + 1 for g in range(1, n_groups)],
    }
    return omegas, supports, meta


def partial_correlation_range(omegas) -> tuple[float, float]:
    vals = []
    omegas = np.asarray(omegas, dtype=float)
    for Om in (omegas if omegas.ndim == 3 else omegas[None]):
        s = 1.0 / np.sqrt(np.diag(Om))
        P = -Om * s[:, None] * s[None, :]
        off = np.triu(Om != 0, 1)
        vals.append(np.abs(P[off]))
    v = np.concatenate(vals)
    if v.size == 0:
        return (0.0, 0.0)
    return (float(v.min()), float(v.max()))


def sample_mvn(n: int, mean, precision, seed=None) -> np.ndarray:
    """Draw ``n`` rows from ``N(mean, precision^{-1})`` via a Cholesky solve."""
    P = np.asarray(precision, dtype=float)
    mean = np.asarray(mean, dtype=float)
    try:
        Lc = np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("precision matrix is not positive definite") from None
    rng = _rng(seed)
    Z = rng.standard_normal((P.shape[0], n))
    # x = L^{-T} z has covariance (L L^T)^{-1}
    X = solve_triangular(Lc.T, Z, lower=False).T
    return X + mean[None, :]


def mean_family(spec: PrecisionFamilySpec, sigma: float, seed=None, n_groups: int = 3) -> np.ndarray:
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    rng = _rng(seed)
    mu1 = sigma * rng.standard_normal(spec.p)
    comps = spec.components()
    out = [mu1]
    for g in range(1, n_groups):
        mu = mu1.copy()
        mu[comps[g % spec.n_components]] = 0.0
        out.append(mu)
    return np.stack(out)


def simulate_dataset(spec: PrecisionFamilySpec, sizes, sigma: float = 0.0, seed=None,
                     family=None):
    """Grouped data from the family; returns ``(data, labels, omegas, supports, means)``.

    ``family`` may be a precomputed ``(omegas, supports, meta)`` so replicates can
    share one truth.
    """
    sizes = list(sizes)
    if family is None:
        family = build_precision_family(spec, len(sizes))
    omegas, supports = family[0], family[1]
    ss = np.random.SeedSequence(spec.seed if seed is None else seed)
    mean_seed, *group_seeds = ss.spawn(len(sizes) + 1)
    means = mean_family(spec, sigma, np.random.default_rng(mean_seed), len(sizes))
    blocks = [sample_mvn(nk, means[g], omegas[g], np.random.default_rng(group_seeds[g]))
              for g, nk in enumerate(sizes)]
    data = np.vstack(blocks)
    labels = np.repeat(np.arange(1, len(sizes) + 1), sizes)
    return data, labels, omegas, supports, means
