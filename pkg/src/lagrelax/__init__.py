"""MAP estimation in discrete and Gaussian graphical models by Lagrangian
relaxation over thin augmented graphs."""

from .models import (
    LABELS,
    CliqueTerm,
    DiscreteFactorModel,
    GaussianInfoModel,
    Hypergraph,
    ModelError,
    NotPairwiseNormalizableError,
    NotPositiveDefiniteError,
    evaluate_objective,
    split_quadratic_cliques,
    validate_model,
)
from .modelio import model_to_text, parse_model_text, read_model, write_model
from .decomposition import (
    DecompositionConfig,
    DecompositionError,
    ReplicationMap,
    UncoveredEdgeError,
    add_intermediaries,
    build_decomposition,
    ensure_singletons,
    lift_assignment,
    project_assignment,
    split_potentials,
)
from .inference import (
    SubgraphEngine,
    build_engines,
    component_map,
    gaussian_marginal_info,
    max_marginals,
    min_fill_order,
    tempered_marginals,
)
from .discrete import (
    DiscreteRelaxation,
    SolveReport,
    TemperatureSchedule,
    build_relaxation,
    dual_gradient,
    dual_value,
    extract_estimate,
    smooth_dual_value,
    solve_discrete,
    sweep_log_marginal_averaging,
    sweep_max_marginal_averaging,
)
from .gaussian import (
    GaussianRelaxation,
    GaussianSolveReport,
    build_gaussian_relaxation,
    gaussian_dual_value,
    solve_gaussian,
    sweep_moment_matching,
    variance_bounds,
)
from .multiscale import (
    MultiscaleModel,
    build_multiscale,
    cross_scale_update,
    multiscale_consistency_residual,
    multiscale_objective,
    solve_multiscale,
    summary_multipliers,
)
from .oracle import brute_force_map, exact_gaussian_solve, exact_grid_map
from .generators import (
    generate_chain_membrane,
    generate_ising_grid,
    generate_thin_membrane,
    generate_thin_plate,
    grid_edges,
)
from .baselines import (
    baseline_block_gauss_seidel,
    baseline_gaussian_lbp,
    overlapping_blocks_1d,
    vertical_strip_blocks,
)
from .experiments import parse_config_text, run_experiment

__version__ = "0.1.0"
