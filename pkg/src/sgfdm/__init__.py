"""Generalized finite differences for stochastic diffusion on point clouds."""

from .ensemble import (
    EnsembleConfig,
    ErrorReport,
    MeanField,
    convergence_study,
    l2_error,
    linf_error,
    run_ensemble,
    solve_problem,
)
from .geometry import (
    Domain,
    PointCloud,
    generate_perturbed_grid,
    generate_random_cloud,
    generate_regular_grid,
    load_cloud,
    refine_midpoints,
    save_cloud,
)
from .problems import AnalyticSolution, analytic_eval
from .sde import (
    Discretization,
    FieldState,
    ProblemSpec,
    StabilityReport,
    check_stability,
    discretize,
    max_stable_dt,
    run_realization,
    sample_wiener_increment,
    step,
)
from .stars import Star, StarSet, build_all_stars, build_star
from .stencil import (
    apply_stencil,
    assemble_moment_system,
    cholesky,
    derivative_coefficients,
    invert_lower_triangular,
    laplacian_stencil,
)
from .weights import WeightSpec, star_weights, weight

__version__ = "0.1.0"
