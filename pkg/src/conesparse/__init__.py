"""Sparse Bayesian estimation on closed convex polyhedral cones."""

from .geometry import (
    ConeError, DDPair, DegenerateCone, FacetCone, NotIrreducible, NotPointed,
    Result1Violated, ShapeMismatch, VertexCone, conically_independent_rows,
    facet_to_vertex, project_onto_cone, transform_cone, verify_dd_pair,
    vertex_to_facet, zero_set,
)
from .adjacency import (
    AdjacencyGraph, CliqueExplosion, CliqueSet, algebraic_adjacency_test,
    build_adjacency_graph, combinatorial_adjacency_test,
    enumerate_maximal_cliques, is_conically_sparse, is_weakly_eps_sparse,
    representation_uniqueness,
)
from .nnls import NnlsProblem, NnlsSolution, solve_nnls
from .prior import (
    PriorDraw, SpikeSlabHyper, log_prior_b, sample_adjacency_prior,
    sample_b_given_clique, sample_clique, sample_prior_mu,
    truncated_normal_density,
)
from .em import EmConfig, EmFit, EmState, e_step, fit, m_step_beta, \
    m_step_sigma2, update_hyper
from .mixed import (
    BsplineBasis, LongDataset, MixedConfig, MixedModel, bspline_basis,
    cone_design, fit_mixed, fit_unrestricted, marginal_loglik,
    random_effect_posterior, update_sigma_matrix,
)
from .shapes import (
    BELL20_SPARSE_EQUALITIES, ShapeSpec, build_constraint_matrix, preset,
    sparse_scenario_cone,
)
from .simulation import (
    SimConfig, run_replication, run_study, sample_gp_effect, true_f_dense,
    true_f_sparse,
)

__version__ = "0.1.0"
