"""Edge-recovery metrics, BIC, and tuning-path tables."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .admm import SolverConfig
from .model import GroupMoments, NotPositiveDefiniteError, PrecisionEstimate, _logdet_pd
from .screening import solve_with_screening

ZERO_TOL = 1e-12


@dataclass(frozen=True)
class EdgeMetrics:
    detected: list  # per group
    true_positive: list
    false_positive: list
    true_edges: list
    frobenius: float
    spectral: float

    @property
    def total_detected(self) -> int:
        return int(sum(self.detected))

    @property
    def total_true_positive(self) -> int:
        return int(sum(self.true_positive))

    @property
    def total_false_positive(self) -> int:
        return int(sum(self.false_positive))

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(total_detected=self.total_detected, total_true_positive=self.total_true_positive,
                 total_false_positive=self.total_false_positive)
        return d


def _upper_support(M, tol=0.0):
    M = np.asarray(M)
    S = np.abs(M) > tol if M.dtype != bool else M.copy()
    p = S.shape[-1]
    return S & np.triu(np.ones((p, p), dtype=bool), 1)


def edge_metrics(estimate, truth_omegas, truth_supports=None) -> EdgeMetrics:
    """Compare estimated and true supports group by group.

    ``estimate`` is a PrecisionEstimate (support from its exact zeros) or a
    ``(K, p, p)`` array.
    """
    if isinstance(estimate, PrecisionEstimate):
        est_omega = estimate.omega
        est_sup = _upper_support(estimate.theta)
    else:
        est_omega = np.asarray(estimate, dtype=float)
        est_sup = _upper_support(est_omega, ZERO_TOL)
    truth = np.asarray(truth_omegas, dtype=float)
    if est_omega.shape != truth.shape:
        raise ValueError(f"estimate shape {est_omega.shape} != truth shape {truth.shape}")
    true_sup = _upper_support(truth if truth_supports is None else np.asarray(truth_supports, bool))
    detected = est_sup.sum(axis=(1, 2))
    tp = (est_sup & true_sup).sum(axis=(1, 2))
    diff = est_omega - truth
    fro = float(sum(np.linalg.norm(d, "fro") for d in diff))
    spec = float(sum(np.linalg.norm(d, 2) for d in diff))
    return EdgeMetrics(
        detected=detected.astype(int).tolist(),
        true_positive=tp.astype(int).tolist(),
        false_positive=(detected - tp).astype(int).tolist(),
        true_edges=true_sup.sum(axis=(1, 2)).astype(int).tolist(),
        frobenius=fro,
        spectral=spec,
    )


def align_labels(estimated, truth) -> np.ndarray:
    """Relabel ``estimated`` (values ``1..K``) to best match ``truth``.

    Uses the one-to-one label map that maximizes the number of agreeing
    observations, so per-group comparisons against the truth are label-invariant.
    """
    est = np.asarray(estimated, dtype=int)
    tru = np.asarray(truth, dtype=int)
    if est.shape != tru.shape:
        raise ValueError("label vectors must have equal length")
    K = int(max(est.max(), tru.max()))
    confusion = np.zeros((K, K), dtype=int)
    np.add.at(confusion, (est - 1, tru - 1), 1)
    rows, cols = linear_sum_assignment(-confusion)
    mapping = np.empty(K, dtype=int)
    mapping[rows] = cols + 1
    return mapping[est - 1]


def bic(estimate, moments: GroupMoments) -> float:
    """``sum_k n_k (tr(Psi_k Theta_k) - logdet Theta_k) + log(n) * df``.

    ``df`` counts nonzero upper off-diagonal entries in every group separately.
    """
    theta = estimate.theta if isinstance(estimate, PrecisionEstimate) else np.asarray(estimate)
    total = 0.0
    for k in range(moments.K):
        try:
            ld = _logdet_pd(theta[k])
        except NotPositiveDefiniteError:
            raise NotPositiveDefiniteError(f"estimate for group {k + 1} is singular") from None
        total += moments.counts[k] * (float(np.sum(moments.correlations[k] * theta[k])) - ld)
    df = int(_upper_support(theta).sum())
    return float(total + math.log(moments.n) * df)


def tuning_path(moments: GroupMoments, network, rho_grid, rho2_grid, config: SolverConfig,
                truth=None) -> list[dict]:
    """Solve over the grid and collect curve rows.

    Each row has ``rho_n, rho_2, detected, tp, fp, frobenius, bic``; ``tp``,
    ``fp`` and ``frobenius`` are None without ``truth`` (the true omegas).
    """
    rho_grid, rho2_grid = list(rho_grid), list(rho2_grid)
    if not rho_grid or not rho2_grid:
        raise ValueError("grids must be nonempty")
    rows = []
    for r2 in rho2_grid:
        for r in rho_grid:
            cfg = config.replace(rho_n=float(r), rho_2=float(r2))
            est = solve_with_screening(moments, network, cfg)
            row = {"rho_n": float(r), "rho_2": float(r2), "detected": est.edge_count(),
                   "tp": None, "fp": None, "frobenius": None, "bic": bic(est, moments),
                   "converged": est.converged}
            if truth is not None:
                m = edge_metrics(est, truth)
                row.update(tp=m.total_true_positive, fp=m.total_false_positive, frobenius=m.frobenius)
            rows.append(row)
    return rows


def match_edge_count(fit_fn, target: int, lo: float, hi: float, tol: int = 10, max_steps: int = 25):
    """Bisect ``rho_n`` in ``[lo, hi]`` until ``fit_fn(rho)`` detects ``target +- tol`` edges.

    ``fit_fn`` returns a PrecisionEstimate. Returns ``(rho, estimate)`` for the
    closest count seen.
    """
    best = None
    a, b = lo, hi
    for _ in range(max_steps):
        mid = math.sqrt(a * b) if a > 0 else 0.5 * (a + b)
        est = fit_fn(mid)
        c = est.edge_count()
        if best is None or abs(c - target) < abs(best[1].edge_count() - target):
            best = (mid, est)
        if abs(c - target) <= tol:
            break
        if c > target:
            a = mid
        else:
            b = mid
    return best
