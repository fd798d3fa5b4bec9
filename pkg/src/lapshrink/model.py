"""Grouped samples, per-group moments and the correlation-scale likelihood."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DegenerateGroupError(ValueError):
    """A group has fewer than two observations."""


class ZeroVarianceError(ValueError):
    """A coordinate has zero sample variance inside a group."""


class NotPositiveDefiniteError(ValueError):
    """A matrix expected to be positive definite is not."""


# smallest eigenvalue must exceed this fraction of the largest
PD_RTOL = 1e-10


def is_positive_definite(M: np.ndarray) -> bool:
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        return False
    ev = np.linalg.eigvalsh(0.5 * (M + M.T))
    return bool(ev[0] > PD_RTOL * max(ev[-1], 0.0) and ev[0] > 0)


@dataclass(frozen=True)
class GroupedSample:
    """Observations with group labels in ``1..K``.

    Parameters
    ----------
    data : ndarray, shape (n, p)
    membership : ndarray of int, shape (n,)
        Labels in ``1..K``.
    K : int
    """

    data: np.ndarray
    membership: np.ndarray
    K: int

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        membership = np.asarray(self.membership).astype(int)
        if data.ndim != 2:
            raise ValueError("data must be a 2-d array")
        if membership.shape != (data.shape[0],):
            raise ValueError("membership length must equal number of rows")
        if self.K < 1:
            raise ValueError("K must be positive")
        if membership.size and (membership.min() < 1 or membership.max() > self.K):
            raise ValueError(f"labels must lie in 1..{self.K}")
        if not np.all(np.isfinite(data)):
            raise ValueError("data contains missing or non-finite values")
        data.setflags(write=False)
        membership.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "membership", membership)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def p(self) -> int:
        return self.data.shape[1]

    def group(self, k: int) -> np.ndarray:
        return self.data[self.membership == k]


@dataclass(frozen=True)
class GroupMoments:
    """Per-group counts, means, ML covariances and correlations.

    Arrays are stacked along the first axis, one slice per group.
    """

    counts: np.ndarray  # (K,)
    means: np.ndarray  # (K, p)
    covariances: np.ndarray  # (K, p, p)
    correlations: np.ndarray  # (K, p, p)

    @property
    def K(self) -> int:
        return self.counts.shape[0]

    @property
    def p(self) -> int:
        return self.means.shape[1]

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def weights(self) -> np.ndarray:
        return self.counts / self.counts.sum()

    @property
    def variances(self) -> np.ndarray:
        return np.diagonal(self.covariances, axis1=1, axis2=2).copy()

    def restrict(self, index) -> "GroupMoments":
        """Moments of the coordinate subset ``index``."""
        idx = np.asarray(index, dtype=int)
        return GroupMoments(
            counts=self.counts,
            means=self.means[:, idx],
            covariances=self.covariances[:, idx][:, :, idx],
            correlations=self.correlations[:, idx][:, :, idx],
        )

    @classmethod
    def from_correlations(cls, correlations, counts, variances=None) -> "GroupMoments":
        """Build moments directly from correlation matrices (unit variances by default)."""
        R = np.asarray(correlations, dtype=float)
        if R.ndim == 2:
            R = R[None]
        counts = np.asarray(counts, dtype=float).reshape(-1)
        K, p, _ = R.shape
        if variances is None:
            cov = R.copy()
        else:
            sd = np.sqrt(np.asarray(variances, dtype=float))
            cov = R * sd[:, :, None] * sd[:, None, :]
        return cls(counts=counts, means=np.zeros((K, p)), covariances=cov, correlations=R)


def correlation_from_covariance(cov: np.ndarray) -> np.ndarray:
    """Rescale a covariance matrix to unit diagonal.

    Raises
    ------
    ZeroVarianceError
        If any diagonal entry is not strictly positive.
    """
    cov = np.asarray(cov, dtype=float)
    d = np.diag(cov)
    if np.any(d <= 0):
        raise ZeroVarianceError("covariance has a nonpositive diagonal entry")
    s = 1.0 / np.sqrt(d)
    R = cov * s[:, None] * s[None, :]
    R = 0.5 * (R + R.T)
    np.fill_diagonal(R, 1.0)
    return np.clip(R, -1.0, 1.0)


def group_moments(sample: GroupedSample) -> GroupMoments:
    """Per-group moments with divisor ``n_k``."""
    K, p = sample.K, sample.p
    counts = np.zeros(K)
    means = np.zeros((K, p))
    covs = np.zeros((K, p, p))
    cors = np.zeros((K, p, p))
    for k in range(K):
        X = sample.group(k + 1)
        nk = X.shape[0]
        if nk < 2:
            raise DegenerateGroupError(f"group {k + 1} has {nk} observation(s); need at least 2")
        mu = X.mean(axis=0)
        Xc = X - mu
        S = Xc.T @ Xc / nk
        S = 0.5 * (S + S.T)
        zero = np.flatnonzero(np.diag(S) <= 0)
        if zero.size:
            raise ZeroVarianceError(
                f"group {k + 1}: zero sample variance in column(s) {(zero + 1).tolist()}"
            )
        counts[k] = nk
        means[k] = mu
        covs[k] = S
        cors[k] = correlation_from_covariance(S)
    return GroupMoments(counts=counts, means=means, covariances=covs, correlations=cors)


def scale_to_precision(theta, sample_variances) -> np.ndarray:
    """Map inverse-correlation estimates to the precision scale.

    ``omega[k] = diag(1/sd) @ theta[k] @ diag(1/sd)``; zeros stay exactly zero.
    """
    theta = np.asarray(theta, dtype=float)
    var = np.asarray(sample_variances, dtype=float)
    squeeze = theta.ndim == 2
    if squeeze:
        theta, var = theta[None], var[None]
    if np.any(var <= 0):
        raise ZeroVarianceError("variances must be strictly positive")
    s = 1.0 / np.sqrt(var)
    omega = theta * s[:, :, None] * s[:, None, :]
    return omega[0] if squeeze else omega


def _logdet_pd(M: np.ndarray) -> float:
    try:
        c = np.linalg.cholesky(0.5 * (M + M.T))
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("matrix is not positive definite") from None
    return 2.0 * float(np.sum(np.log(np.diag(c))))


def negative_correlation_loglik(theta, moments: GroupMoments) -> float:
    r"""Weighted negative log-likelihood on the correlation scale.

    .. math:: \sum_k w_k \{ \mathrm{tr}(\Psi_k \Theta_k) - \log\det\Theta_k \}
    """
    theta = np.asarray(theta, dtype=float)
    w = moments.weights
    total = 0.0
    for k in range(moments.K):
        tr = float(np.sum(moments.correlations[k] * theta[k]))
        total += w[k] * (tr - _logdet_pd(theta[k]))
    return total


def negative_loglik_gradient(theta, moments: GroupMoments) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    w = moments.weights
    return np.stack(
        [w[k] * (moments.correlations[k] - np.linalg.inv(theta[k])) for k in range(moments.K)]
    )


@dataclass(frozen=True)
class PrecisionEstimate:
    """Joint estimate on both scales plus solver metadata.

    ``theta`` is the inverse-correlation estimate and ``omega`` its precision-scale
    counterpart; both have shape ``(K, p, p)`` and identical supports.
    """

    theta: np.ndarray
    omega: np.ndarray
    iterations: int = 0
    converged: bool = True
    final_residual: float = 0.0
    blocks: list | None = None
    info: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return self.theta.shape[0]

    @property
    def p(self) -> int:
        return self.theta.shape[1]

    def support(self) -> np.ndarray:
        """Boolean ``(K, p, p)`` off-diagonal support."""
        S = self.theta != 0
        idx = np.arange(self.p)
        S[:, idx, idx] = False
        return S

    def edges(self, k: int) -> list[tuple[int, int]]:
        """0-based upper-triangular edges of group ``k`` (0-based)."""
        i, j = np.nonzero(np.triu(self.support()[k], 1))
        return list(zip(i.tolist(), j.tolist()))

    def edge_count(self) -> int:
        return int(np.triu(self.support(), 1).sum())
