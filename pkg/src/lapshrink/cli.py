"""Command-line entry point: fit, hcfit, simulate, screen, evaluate, path."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .admm import ConvergenceWarning, SolverConfig, solve
from .evaluation import bic, edge_metrics, tuning_path
from .graph import (
    SubpopulationNetwork,
    build_complete_graph,
    build_empty_graph,
    build_line_graph,
    build_star_graph,
)
from .hclust import DegenerateClusterError, LINKAGES, hc_lasich
from .io import (
    InconsistentGroupsError,
    InputFormatError,
    dump_json,
    estimate_from_json,
    estimate_to_json,
    grouped_sample_from_csv,
    load_json,
    read_csv,
    truth_from_json,
    truth_to_json,
    write_csv,
    write_membership,
)
from .model import DegenerateGroupError, NotPositiveDefiniteError, ZeroVarianceError, group_moments
from .screening import block_partition, solve_with_screening
from .synth import PrecisionFamilySpec, build_precision_family, simulate_dataset

logger = logging.getLogger("lapshrink")

EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_GROUPS = 4
EXIT_NUMERIC = 5
EXIT_IO = 6

NETWORK_BUILDERS = {
    "complete": build_complete_graph,
    "line": build_line_graph,
    "star": build_star_graph,
}


class UsageError(Exception):
    pass


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "exit_code": code, "message": message}, sort_keys=True) + "\n")
    return code


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _solver_args(p: argparse.ArgumentParser, rho_required=True):
    g = p.add_argument_group("solver")
    g.add_argument("--rho-n", type=float, required=rho_required, help="l1 penalty strength")
    g.add_argument("--rho-2", type=float, default=0.0, help="Laplacian penalty multiplier")
    g.add_argument("--epsilon", type=float, default=1e-3)
    g.add_argument("--varrho", type=float, default=1.0, help="ADMM penalty parameter")
    g.add_argument("--tol", type=float, default=1e-6)
    g.add_argument("--max-iter", type=int, default=2000)


def _network_args(p: argparse.ArgumentParser):
    p.add_argument("--network", default="complete",
                   help="network JSON file, or one of: complete, line, star, identity, empty")
    p.add_argument("--mode", choices=["normalized", "unnormalized", "identity"], default=None,
                   help="override the Laplacian mode")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="lapshrink", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=None, help="cap on BLAS worker threads")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="joint estimate from labeled CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, default=None)
    _network_args(p)
    _solver_args(p)
    p.add_argument("--no-screen", action="store_true")
    p.add_argument("--out", required=True)

    p = sub.add_parser("hcfit", help="cluster unlabeled CSV, then estimate")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--linkage", choices=sorted(LINKAGES), default="complete")
    p.add_argument("--mode", choices=["normalized", "unnormalized", "identity"], default="normalized")
    _solver_args(p)
    p.add_argument("--no-screen", action="store_true")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("simulate", help="generate grouped data and truth")
    p.add_argument("--p", type=int, default=100)
    p.add_argument("--n", type=_int_list, default=[50, 100, 50])
    p.add_argument("--graph", choices=["er", "sf"], default="er")
    p.add_argument("--edges", type=int, default=95)
    p.add_argument("--components", type=int, default=4)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("screen", help="block partition certified by the screening rule")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, default=None)
    _network_args(p)
    _solver_args(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="compare an estimate JSON with a truth JSON")
    p.add_argument("--estimate", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("path", help="tuning-path CSV over a grid")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, default=None)
    _network_args(p)
    _solver_args(p, rho_required=False)
    p.add_argument("--rho-grid", type=_float_list, required=True)
    p.add_argument("--rho2-grid", type=_float_list, default=[0.0])
    p.add_argument("--truth", default=None)
    p.add_argument("--out", required=True)
    return ap


def _config(args, rho_n=None) -> SolverConfig:
    try:
        return SolverConfig(
            rho_n=args.rho_n if rho_n is None else rho_n,
            rho_2=args.rho_2, epsilon=args.epsilon, varrho=args.varrho,
            tol=args.tol, max_iter=args.max_iter,
        )
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid solver configuration: {exc}") from None


def _network(args, K: int) -> SubpopulationNetwork:
    src = args.network
    if src in NETWORK_BUILDERS:
        net = NETWORK_BUILDERS[src](K)
    elif src == "identity":
        net = build_empty_graph(K, mode="identity")
    elif src == "empty":
        net = build_empty_graph(K)
    else:
        try:
            net = SubpopulationNetwork.from_json(load_json(src))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InputFormatError):
                raise
            raise InputFormatError(f"malformed network JSON {src}: {exc}") from None
    if args.mode:
        net = net.with_mode(args.mode)
    if net.K != K:
        raise InconsistentGroupsError(f"network has K={net.K} but data has {K} groups")
    return net


def _resolved(args) -> dict:
    d = {k: v for k, v in vars(args).items() if k not in ("verbose",)}
    return d


def cmd_fit(args) -> int:
    sample = grouped_sample_from_csv(args.data, args.k)
    net = _network(args, sample.K)
    cfg = _config(args)
    mom = group_moments(sample)
    est = solve(mom, net, cfg) if args.no_screen else solve_with_screening(mom, net, cfg)
    extra = {"config": _resolved(args), "solver": cfg.to_dict(), "network": net.to_json(),
             "seed": args.seed, "bic": bic(est, mom)}
    dump_json(estimate_to_json(est, extra), args.out)
    return 0


def cmd_hcfit(args) -> int:
    # a group column, if present, is ignored
    data, _, _ = read_csv(args.data)
    if not 1 <= args.k <= data.shape[0]:
        raise UsageError(f"--k must lie in 1..{data.shape[0]}")
    cfg = _config(args)
    est, membership, net = hc_lasich(data, args.k, cfg, linkage=args.linkage, mode=args.mode,
                                     screen=not args.no_screen)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_membership(out / "membership.csv", membership)
    dissim = np.zeros((args.k, args.k))
    off = net.weights > 0
    dissim[off] = 1.0 / net.weights[off]
    net_json = net.to_json()
    net_json["dissimilarity"] = dissim
    net_json["dissimilarity_kind"] = "cophenetic merge height"
    dump_json(net_json, out / "network.json")
    extra = {"config": _resolved(args), "solver": cfg.to_dict(), "network": net.to_json(),
             "seed": args.seed}
    dump_json(estimate_to_json(est, extra), out / "estimate.json")
    return 0


def cmd_simulate(args) -> int:
    try:
        spec = PrecisionFamilySpec(p=args.p, n_components=args.components,
                                   graph_kind={"er": "erdos_renyi", "sf": "scale_free"}[args.graph],
                                   total_edges=args.edges, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if any(n < 2 for n in args.n):
        raise UsageError("every group needs at least 2 observations")
    if args.sigma < 0:
        raise UsageError("--sigma must be nonnegative")
    family = build_precision_family(spec, len(args.n))
    data, labels, omegas, supports, means = simulate_dataset(spec, args.n, args.sigma,
                                                             seed=args.seed, family=family)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "data.csv", data, labels)
    meta = dict(family[2], sizes=list(args.n), sigma=args.sigma, seed=args.seed)
    dump_json(truth_to_json(omegas, supports, means, meta), out / "truth.json")
    dump_json({"spec": spec.to_dict(), "sizes": list(args.n), "sigma": args.sigma,
               "seed": args.seed, "config": _resolved(args)}, out / "spec.json")
    return 0


def cmd_screen(args) -> int:
    sample = grouped_sample_from_csv(args.data, args.k)
    net = _network(args, sample.K)
    cfg = _config(args)
    part = block_partition(group_moments(sample), net, cfg)
    obj = part.to_json()
    obj.update(config=_resolved(args), seed=args.seed)
    dump_json(obj, args.out)
    return 0


def cmd_evaluate(args) -> int:
    est = estimate_from_json(load_json(args.estimate))
    truth = truth_from_json(load_json(args.truth))
    if truth.shape != est.theta.shape:
        raise InconsistentGroupsError(f"estimate shape {est.theta.shape} != truth shape {truth.shape}")
    m = edge_metrics(est, truth)
    dump_json({"metrics": m.to_dict(), "config": _resolved(args), "seed": args.seed}, args.out)
    return 0


def cmd_path(args) -> int:
    sample = grouped_sample_from_csv(args.data, args.k)
    net = _network(args, sample.K)
    base = _config(args, rho_n=args.rho_grid[0] if args.rho_grid else 0.1)
    truth = truth_from_json(load_json(args.truth)) if args.truth else None
    rows = tuning_path(group_moments(sample), net, args.rho_grid, args.rho2_grid, base, truth)
    cols = ["rho_n", "rho_2", "detected", "tp", "fp", "frobenius", "bic"]
    with Path(args.out).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow(["" if r[c] is None else (repr(r[c]) if isinstance(r[c], float) else r[c])
                        for c in cols])
    return 0


COMMANDS = {
    "fit": cmd_fit,
    "hcfit": cmd_hcfit,
    "simulate": cmd_simulate,
    "screen": cmd_screen,
    "evaluate": cmd_evaluate,
    "path": cmd_path,
}


def _limit_threads(n):
    if n is None:
        return
    if n < 1:
        raise UsageError("--threads must be positive")
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(n)
        return
    threadpool_limits(n)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _limit_threads(args.threads)
        with warnings.catch_warnings():
            warnings.simplefilter("always", ConvergenceWarning)
            return COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    except InputFormatError as exc:
        return _fail(EXIT_INPUT, "input_format", str(exc))
    except InconsistentGroupsError as exc:
        return _fail(EXIT_GROUPS, "inconsistent_groups", str(exc))
    except (DegenerateGroupError, DegenerateClusterError, ZeroVarianceError,
            NotPositiveDefiniteError) as exc:
        return _fail(EXIT_NUMERIC, type(exc).__name__, str(exc))
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc))


if __name__ == "__main__":
    sys.exit(main())
