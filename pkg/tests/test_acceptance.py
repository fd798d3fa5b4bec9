"""Acceptance criteria at desk scale. Each test prints one PASS/FAIL line."""

import time
import warnings

import numpy as np
import pytest
from conftest import random_moments, random_spd, report

from lapshrink.admm import (
    SolverConfig,
    kkt_violation,
    solve,
    soft_threshold,
    update_concentration,
    update_fusion,
)
from lapshrink.evaluation import align_labels, edge_metrics, match_edge_count
from lapshrink.graph import (
    SubpopulationNetwork,
    build_complete_graph,
    build_empty_graph,
    build_line_graph,
    build_star_graph,
    laplacian,
    laplacian_penalty,
)
from lapshrink.hclust import cut, hierarchical_cluster, rand_index, subpopulation_network_from_dendrogram
from lapshrink.model import (
    GroupedSample,
    GroupMoments,
    group_moments,
    negative_correlation_loglik,
    negative_loglik_gradient,
)
from lapshrink.screening import block_partition, solve_with_screening
from lapshrink.synth import PrecisionFamilySpec, build_precision_family, simulate_dataset

pytestmark = pytest.mark.acceptance

# tuning shared by the simulation criteria
FIG_RHO2_GRID = (0.25, 0.5)
FIG_MODE = "unnormalized"
MATCH_TARGET, MATCH_TOL = 150, 3
SIGMA_RAND_09 = 3.0


def _quiet(fn):
    def wrapped(*a, **k):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return fn(*a, **k)
    return wrapped


# 1 ---------------------------------------------------------------------------

def test_criterion_1_kkt_oracle():
    t0 = time.perf_counter()
    worst = 0.0
    net = build_line_graph(3)
    bundle = laplacian(net)
    inst = 0
    for rho in (0.05, 0.2):
        for rho2 in (0.0, 0.5):
            for seed in range(5):
                mom = random_moments(1000 + inst, p=10)
                cfg = SolverConfig(rho, rho2, tol=1e-8, max_iter=20_000)
                est = solve(mom, net, cfg)
                worst = max(worst, kkt_violation(est, mom, bundle, cfg))
                inst += 1
    elapsed = time.perf_counter() - t0
    ok = inst == 20 and worst < 1e-4 and elapsed < 60
    report(1, "KKT oracle", ok, f"max violation {worst:.2e} over {inst} instances in {elapsed:.1f}s")
    assert ok


# 2 ---------------------------------------------------------------------------

def _lasso_kkt(theta, psi, lam):
    G = psi - np.linalg.inv(theta)
    p = theta.shape[0]
    off = ~np.eye(p, dtype=bool)
    nz = off & (theta != 0)
    z = off & (theta == 0)
    v = np.abs(np.diag(G)).max()
    if nz.any():
        v = max(v, np.abs(G[nz] + lam * np.sign(theta[nz])).max())
    if z.any():
        v = max(v, np.maximum(np.abs(G[z]) - lam, 0).max())
    return float(v)


def test_criterion_2_graphical_lasso_reduction():
    worst = 0.0
    for seed in range(10):
        mom = random_moments(2000 + seed, p=10, sizes=(30, 50))
        cfg = SolverConfig(0.1, 0.0, tol=1e-8, max_iter=20_000)
        est = solve(mom, build_line_graph(2), cfg)
        for k in range(2):
            worst = max(worst, _lasso_kkt(est.theta[k], mom.correlations[k], cfg.rho_n / mom.weights[k]))
    ok = worst < 1e-4
    report(2, "graphical-lasso reduction", ok, f"max per-group lasso KKT violation {worst:.2e}")
    assert ok


# 3 ---------------------------------------------------------------------------

def planted_two_blocks(rng, p=40, K=3, n=60):
    half = p // 2
    mats = []
    for _ in range(K):
        R = np.zeros((p, p))
        for blk in (slice(0, half), slice(half, p)):
            X = rng.standard_normal((n, half))
            X[:, 1:] += X[:, :1]
            R[blk, blk] = np.corrcoef(X, rowvar=False)
        mats.append(R)
    return GroupMoments.from_correlations(np.stack(mats), [n] * K)


def test_criterion_3_screening_equivalence():
    t0 = time.perf_counter()
    net = build_line_graph(3)
    cfg = SolverConfig(0.05, 0.5, tol=1e-8, max_iter=20_000)
    worst, blocks_ok = 0.0, True
    expected = [list(range(20)), list(range(20, 40))]
    for seed in range(10):
        mom = planted_two_blocks(np.random.default_rng(3000 + seed))
        part = block_partition(mom, net, cfg)
        blocks_ok &= part.blocks == expected
        a = solve_with_screening(mom, net, cfg, part)
        b = solve(mom, net, cfg)
        worst = max(worst, float(np.abs(a.theta - b.theta).max()))
    elapsed = time.perf_counter() - t0
    ok = blocks_ok and worst < 1e-5 and elapsed < 300
    report(3, "screening equivalence", ok,
           f"2 blocks every time: {blocks_ok}; max |screened - full| {worst:.2e}; {elapsed:.0f}s")
    assert ok


# 4 ---------------------------------------------------------------------------

def _matched_tp(moments, network, rho2, truth):
    fit = _quiet(lambda r: solve_with_screening(moments, network,
                                                SolverConfig(r, rho2, tol=1e-5, max_iter=3000)))
    _, est = match_edge_count(fit, MATCH_TARGET, 0.005, 0.5, tol=MATCH_TOL)
    return est.edge_count(), edge_metrics(est, truth).total_true_positive


@pytest.mark.slow
def test_criterion_4_joint_beats_separate():
    t0 = time.perf_counter()
    spec = PrecisionFamilySpec(p=60, seed=1)
    family = build_precision_family(spec)
    rho2 = max(FIG_RHO2_GRID)
    tp_glasso, tp_lasich, counts = [], [], []
    for rep in range(10):
        X, lab, om, _, _ = simulate_dataset(spec, (50, 100, 50), seed=1000 + rep, family=family)
        mom = group_moments(GroupedSample(X, lab, 3))
        d0, t_g = _matched_tp(mom, build_empty_graph(3), 0.0, om)
        d1, t_l = _matched_tp(mom, build_star_graph(3, mode=FIG_MODE), rho2, om)
        tp_glasso.append(t_g)
        tp_lasich.append(t_l)
        counts += [d0, d1]
    elapsed = time.perf_counter() - t0
    gain = np.mean(tp_lasich) - np.mean(tp_glasso)
    matched = all(abs(c - MATCH_TARGET) <= 10 for c in counts)
    ok = matched and gain >= 5 and elapsed < 1200
    report(4, "joint vs separate trend", ok,
           f"mean TP lasich(rho2={rho2}) {np.mean(tp_lasich):.1f} vs glasso {np.mean(tp_glasso):.1f} "
           f"(gain {gain:+.1f}); detected in [{min(counts)}, {max(counts)}]; {elapsed:.0f}s")
    assert ok


# 5 ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_5_consistency_trend():
    spec = PrecisionFamilySpec(p=40, seed=2)
    family = build_precision_family(spec)
    net = build_star_graph(3)
    err = {}
    for n in (200, 800):
        rho = 0.5 * np.sqrt(np.log(spec.p) / n)
        vals = []
        for rep in range(10):
            X, lab, om, _, _ = simulate_dataset(spec, (n // 4, n // 2, n // 4), seed=4000 + rep, family=family)
            est = _quiet(solve_with_screening)(group_moments(GroupedSample(X, lab, 3)), net,
                                               SolverConfig(rho, 0.5, tol=1e-6, max_iter=5000))
            vals.append(edge_metrics(est, om).frobenius)
        err[n] = float(np.mean(vals))
    ratio = err[800] / err[200]
    ok = err[800] < err[200] and ratio < 0.85
    report(5, "consistency trend", ok,
           f"mean Frobenius error {err[200]:.2f} (n=200) -> {err[800]:.2f} (n=800), ratio {ratio:.3f}")
    assert ok


# 6 ---------------------------------------------------------------------------

def test_criterion_6_clustering_recovery():
    p, n = 100, 80
    hits = 0
    for rep in range(10):
        rng = np.random.default_rng(6000 + rep)
        X = rng.standard_normal((n, p))
        X[n // 2:] += 2.0  # ||mu1 - mu2||^2 / p = 4
        truth = np.repeat([1, 2], n // 2)
        hits += rand_index(cut(hierarchical_cluster(X, "complete"), 2), truth) == 1.0
    ok = hits >= 9
    report(6, "clustering recovery", ok, f"perfect recovery on {hits}/10 replicates")
    assert ok


# 7 ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_7_hc_lasich_pipeline():
    spec = PrecisionFamilySpec(p=60, seed=1)
    family = build_precision_family(spec)
    rho2 = max(FIG_RHO2_GRID)
    tp_known, tp_hc, rands = [], [], []
    for rep in range(10):
        X, lab, om, _, _ = simulate_dataset(spec, (50, 100, 50), sigma=SIGMA_RAND_09,
                                            seed=2000 + rep, family=family)
        mom = group_moments(GroupedSample(X, lab, 3))
        tp_known.append(_matched_tp(mom, build_star_graph(3, mode=FIG_MODE), rho2, om)[1])
        dend = hierarchical_cluster(X, "complete")
        labels = align_labels(cut(dend, 3), lab)
        rands.append(rand_index(labels, lab))
        net = subpopulation_network_from_dendrogram(dend, labels, 3, FIG_MODE)
        tp_hc.append(_matched_tp(group_moments(GroupedSample(X, labels, 3)), net, rho2, om)[1])
    a, b = np.mean(tp_known), np.mean(tp_hc)
    rel = abs(b - a) / a
    ok = rel <= 0.10
    report(7, "HC-LASICH pipeline", ok,
           f"mean Rand {np.mean(rands):.3f}; mean TP hc {b:.1f} vs known {a:.1f} "
           f"(relative gap {rel:.1%}, limit 10%)")
    assert ok


# 8 ---------------------------------------------------------------------------

def test_criterion_8_laplacian_spectra():
    worst_line, worst_complete = 0.0, 0.0
    for K in range(3, 7):
        worst_line = max(worst_line, abs(laplacian(build_line_graph(K)).spectral_norm - 2.0))
    for K in range(2, 7):
        # fully connected: K/(K-1), not the 1/(K-1) sometimes quoted for this graph
        worst_complete = max(worst_complete,
                             abs(laplacian(build_complete_graph(K)).spectral_norm - K / (K - 1)))
    ok = worst_line < 1e-10 and worst_complete < 1e-10
    report(8, "Laplacian spectra", ok,
           f"line |norm - 2| <= {worst_line:.1e}; complete |norm - K/(K-1)| <= {worst_complete:.1e}")
    assert ok


# 9 ---------------------------------------------------------------------------

def test_criterion_9_unit_properties():
    rng = np.random.default_rng(9)
    checks = {}

    checks["soft_threshold"] = (soft_threshold(1.2, 0.5) == pytest.approx(0.7)
                                and soft_threshold(0.3, 0.5) == 0
                                and soft_threshold(-1.0, 0.5) == pytest.approx(-0.5))
    b2 = laplacian(build_line_graph(2, "unnormalized"))
    D = np.stack([np.eye(2)] * 2)
    D[:, 0, 1] = D[:, 1, 0] = [0.05, -0.05]
    C = update_fusion(D, np.zeros_like(D), b2, SolverConfig(1.0, 0.5))
    checks["fusion shrink-to-zero"] = bool(np.all(C[:, 0, 1] == 0))

    stat = 0.0
    for t in range(50):
        mom = random_moments(9000 + t, p=6, sizes=(15, 30))
        M = rng.standard_normal((2, 6, 6))
        M = M + np.swapaxes(M, 1, 2)
        cfg = SolverConfig(0.1, varrho=float(rng.uniform(0.2, 5)))
        A = update_concentration(mom, M, np.zeros_like(M), cfg)
        for k in range(2):
            w = mom.weights[k]
            g = w * mom.correlations[k] - w * np.linalg.inv(A[k]) + cfg.varrho * (A[k] - M[k])
            stat = max(stat, float(np.abs(g).max()))
    checks[f"A-update stationarity {stat:.1e}"] = stat < 1e-8

    semi_ok = True
    for t in range(1000):
        K = int(rng.integers(2, 7))
        W = np.triu(rng.uniform(0, 1, (K, K)), 1)
        b = laplacian(SubpopulationNetwork(W + W.T, ("normalized", "unnormalized")[t % 2]))
        x, y, c = rng.standard_normal(K), rng.standard_normal(K), rng.normal(scale=2)
        px = laplacian_penalty(x, b)
        semi_ok &= laplacian_penalty(x + y, b) <= px + laplacian_penalty(y, b) + 1e-10
        semi_ok &= abs(laplacian_penalty(c * x, b) - abs(c) * px) <= 1e-10 * max(1.0, abs(c) * px)
    checks["seminorm 1000 trials"] = bool(semi_ok)

    mom = random_moments(99, p=5, sizes=(20, 30))
    theta = np.stack([random_spd(rng, 5, 4.0) for _ in range(2)])
    G = negative_loglik_gradient(theta, mom)
    h = 1e-5
    num, ana = [], []
    for k in range(2):
        for i in range(5):
            for j in range(i, 5):
                E = np.zeros_like(theta)
                E[k, i, j] = E[k, j, i] = 1.0
                fd = (negative_correlation_loglik(theta + h * E, mom)
                      - negative_correlation_loglik(theta - h * E, mom)) / (2 * h)
                num.append(fd)
                ana.append(G[k, i, j] * (1 if i == j else 2))
    rel = float(np.linalg.norm(np.subtract(num, ana)) / np.linalg.norm(ana))
    checks[f"gradient FD rel err {rel:.1e}"] = rel < 1e-4

    mom = random_moments(77, p=8)
    perm = rng.permutation(8)
    mom_p = GroupMoments.from_correlations(mom.correlations[:, perm][:, :, perm], mom.counts)
    cfg = SolverConfig(0.1, 0.5, tol=1e-8, max_iter=5000)
    a = solve(mom, build_line_graph(3), cfg)
    bp = solve(mom_p, build_line_graph(3), cfg)
    diff = float(np.abs(bp.theta - a.theta[:, perm][:, :, perm]).max())
    same_support = np.array_equal(bp.support(), a.support()[:, perm][:, :, perm])
    # identical support and iteration count; values agree to rounding in the eigensolver
    checks[f"permutation equivariance {diff:.1e}"] = same_support and a.iterations == bp.iterations \
        and diff < 1e-10

    ok = all(checks.values())
    report(9, "unit/property suites", ok, "; ".join(f"{k}: {'ok' if v else 'FAILED'}" for k, v in checks.items()))
    assert ok
