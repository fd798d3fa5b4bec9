"""Compare the compiled and numpy kernel backends.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np
from scipy.spatial.distance import pdist, squareform

from lapshrink import _core
from lapshrink.admm import SolverConfig, SolverState, consensus_system, solve, update_concentration
from lapshrink.graph import build_star_graph, laplacian
from lapshrink.model import GroupedSample, group_moments


def _moments(p, sizes, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((sum(sizes), p))
    return group_moments(GroupedSample(X, np.repeat(np.arange(1, len(sizes) + 1), sizes), len(sizes)))


def entry_step_case(p=100):
    mom = _moments(p, (50, 100, 50))
    b = laplacian(build_star_graph(3))
    cfg = SolverConfig(0.1, 0.5)
    st = SolverState.initial(3, p)
    A = update_concentration(mom, st.D, st.EA, cfg)
    args = (b.half, b.half_inv, b.L_eps, consensus_system(b), 0.1, 0.05, 1.0, True)

    def run(mod):
        arrs = [np.array(getattr(st, n), order="C") for n in ("B", "C", "D", "EA", "EB", "EC")]
        mod.admm_entry_step(A, *arrs, *args)
    return run


def box_qp_case(m=5000, K=3):
    rng = np.random.default_rng(1)
    b = np.ascontiguousarray(rng.normal(scale=0.3, size=(m, K)))
    M = rng.standard_normal((K, K))
    M = np.ascontiguousarray(M @ M.T + np.eye(K))
    return lambda mod: mod.box_qp_min_norm(b, M, 0.1, 1e-10, 500)


def agglomerate_case(n=200):
    X = np.random.default_rng(2).standard_normal((n, 20))
    D = np.ascontiguousarray(squareform(pdist(X)))
    return lambda mod: mod.agglomerate(D, 1)


def solve_case(p=60):
    mom = _moments(p, (50, 100, 50))
    net = build_star_graph(3)
    cfg = SolverConfig(0.1, 0.5, tol=1e-6, max_iter=3000)

    def run(mod):
        saved = _core.admm_entry_step
        _core.admm_entry_step = mod.admm_entry_step
        try:
            solve(mom, net, cfg)
        finally:
            _core.admm_entry_step = saved
    return run


CASES = {
    "admm_entry_step p=100 K=3": entry_step_case,
    "box_qp_min_norm m=5000 K=3": box_qp_case,
    "agglomerate n=200": agglomerate_case,
    "solve p=60 K=3 (end to end)": solve_case,
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    mods = _core.backends()
    names = sorted(mods)
    print(f"{'case':32s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, make in CASES.items():
        run = make()
        times = {}
        for n in names:
            run(mods[n])  # warm up
            number = 1 if "solve" in label else 5
            times[n] = min(timeit.repeat(lambda: run(mods[n]), number=number, repeat=args.repeat)) / number
        row = f"{label:32s}" + "".join(f"{times[n] * 1e3:10.2f}ms" for n in names)
        if "cython" in times:
            row += f"{times['python'] / times['cython']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
