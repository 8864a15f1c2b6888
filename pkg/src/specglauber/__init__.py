"""Spectral-independence checks and Glauber dynamics for two-spin Gibbs models."""

__version__ = "0.1.0"

from .gibbs_exact import (Boundary, GibbsError, GibbsParams, enumerate_gibbs, extended_influence_exact,
                          influence_matrix_exact, n_matrix, partition_and_marginals, symmetrize_check)
from .glauber import (ChainState, TransitionMatrix, empirical_tv, glauber_step, mixing_time_exact,
                      spectral_gap, transition_matrix)
from .graph_core import Graph, GraphError, OrientedEdge, SawTree, build_graph, load_graph, saw_tree
from .influence_saw import BOUND_IDS, BoundReport, influence_saw, verify_bound
from .spectral import (LabeledMatrix, SpectralResult, adjacency_matrix, hashimoto_matrix, perron,
                       planar_rho_bound, genus_rho_bound)
from .tree_recursion import PotentialParams, delta_c, hc_potential_params, lambda_c, verify_potential

__all__ = [
    "BOUND_IDS", "Boundary", "BoundReport", "ChainState", "GibbsError", "GibbsParams", "Graph",
    "GraphError", "LabeledMatrix", "OrientedEdge", "PotentialParams", "SawTree", "SpectralResult",
    "TransitionMatrix", "adjacency_matrix", "build_graph", "delta_c", "empirical_tv", "enumerate_gibbs",
    "extended_influence_exact", "genus_rho_bound", "glauber_step", "hashimoto_matrix",
    "hc_potential_params", "influence_matrix_exact", "influence_saw", "lambda_c", "load_graph",
    "mixing_time_exact", "n_matrix", "partition_and_marginals", "perron", "planar_rho_bound",
    "saw_tree", "spectral_gap", "symmetrize_check", "transition_matrix", "verify_bound",
    "verify_potential",
]
