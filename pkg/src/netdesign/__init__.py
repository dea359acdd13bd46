"""Optimal treatment assignment for experiments with network-correlated outcomes."""

__version__ = "0.1.0"

from .design import (
    DesignResult,
    OptimizerConfig,
    PointPriorGrid,
    brute_force,
    optimize_assignment,
    point_prior_design,
    randomized_balanced,
    spectral_clusters,
    stratified_assignment,
    stratified_spectral,
)
from .models import (
    NefAbstract,
    NormalParams,
    OutcomeVector,
    PoissonGammaParams,
    PriorSpec,
    draw_params_from_prior,
    marginal_covariance,
    nef_abstract_normal,
    nef_abstract_poisson_gamma,
    sample_outcomes_normal,
    sample_outcomes_poisson_gamma,
)
from .network import (
    Network,
    augmented_adjacency,
    from_edge_list,
    gen_erdos_renyi,
    gen_power_law,
    gen_sbm,
    gen_small_world,
    generate,
    gram_matrix,
    neighborhood_sizes,
    read_network,
    write_network,
)
from .risk import (
    Assignment,
    DegenerateAssignmentError,
    ImseEstimate,
    MseDecomposition,
    RiskObjective,
    contrast_weights,
    delta_neighborhood,
    imse_closed_form_normal,
    imse_mc,
    mse_decomposition_normal,
    mse_general,
    mse_normal,
    mse_poisson_gamma,
    variance_of_contrast,
)
