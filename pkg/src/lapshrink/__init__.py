"""Joint estimation of sparse precision matrices across related subpopulations
with an l1 plus graph-Laplacian shrinkage penalty."""

__version__ = "0.1.0"

from ._core import BACKEND
from .admm import SolverConfig, kkt_violation, solve
from .graph import (
    SubpopulationNetwork,
    build_complete_graph,
    build_line_graph,
    build_star_graph,
    laplacian,
    laplacian_penalty,
)
from .hclust import cut, hc_lasich, hierarchical_cluster, rand_index
from .model import GroupedSample, GroupMoments, PrecisionEstimate, group_moments
from .screening import block_partition, solve_with_screening

__all__ = [
    "BACKEND",
    "GroupMoments",
    "GroupedSample",
    "PrecisionEstimate",
    "SolverConfig",
    "SubpopulationNetwork",
    "block_partition",
    "build_complete_graph",
    "build_line_graph",
    "build_star_graph",
    "cut",
    "group_moments",
    "hc_lasich",
    "hierarchical_cluster",
    "kkt_violation",
    "laplacian",
    "laplacian_penalty",
    "rand_index",
    "solve",
    "solve_with_screening",
]
