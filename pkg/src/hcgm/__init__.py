"""Homotopy conditional gradient method for composite convex minimization
over compact domains: min f(x) + sum_j g_j(A_j x) using only a linear
minimization oracle of the domain and prox operators of the g_j."""

from .bounds import (
    BoundInputs,
    loglog_slope,
    optimal_beta0,
    rate_slope,
    thm1_bound,
    thm2_bound,
    thm3_bounds,
    thm4_bound,
    thm4_bound_mult,
    thm5_bound,
    thm5_bound_mult,
    thm6_bounds,
    thm6_bounds_mult,
)
from .linalg import EigConfig, jacobi_eig_full, min_eigpair, spectral_norm, top_singular_pair
from .oracles import (
    CompositeProblem,
    Domain,
    Indicator,
    LinearMap,
    Lipschitz,
    NonsmoothTerm,
    PenaltyTerm,
)
from .problems import (
    ProblemInstance,
    build_clustering_sdp,
    build_counterexample,
    build_matrix_game,
    build_quadratic_box,
    build_rpca,
    gen_synthetic,
    round_clustering,
)
from .smoothing import F_beta_value, F_value, SmoothedState, grad_F_beta, lmo_direction, y_star
from .solver import (
    Additive,
    Exact,
    IterationRecord,
    Multiplicative,
    SolveResult,
    SolverConfig,
    solve,
    step_schedule,
    step_schedule_mult,
)

__version__ = "0.1.0"

__all__ = [
    "Additive",
    "BoundInputs",
    "CompositeProblem",
    "Domain",
    "EigConfig",
    "Exact",
    "F_beta_value",
    "F_value",
    "Indicator",
    "IterationRecord",
    "LinearMap",
    "Lipschitz",
    "Multiplicative",
    "NonsmoothTerm",
    "PenaltyTerm",
    "ProblemInstance",
    "SmoothedState",
    "SolveResult",
    "SolverConfig",
    "build_clustering_sdp",
    "build_counterexample",
    "build_matrix_game",
    "build_quadratic_box",
    "build_rpca",
    "gen_synthetic",
    "grad_F_beta",
    "jacobi_eig_full",
    "lmo_direction",
    "loglog_slope",
    "min_eigpair",
    "optimal_beta0",
    "rate_slope",
    "round_clustering",
    "solve",
    "spectral_norm",
    "step_schedule",
    "step_schedule_mult",
    "thm1_bound",
    "thm2_bound",
    "thm3_bounds",
    "thm4_bound",
    "thm4_bound_mult",
    "thm5_bound",
    "thm5_bound_mult",
    "thm6_bounds",
    "thm6_bounds_mult",
    "top_singular_pair",
    "y_star",
]
