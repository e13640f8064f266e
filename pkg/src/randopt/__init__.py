"""randopt: a workbench for random optimization problems.

Instance generators (random graphs, Gaussian interaction tensors, random
K-SAT), exact and heuristic optimizers, a zero-temperature Parisi PDE
solver with functional minimization, overlap-gap diagnostics, and a
reproducible experiment CLI.
"""

__version__ = "0.1.0"

from .errors import (
    BudgetExceededError,
    CapacityError,
    CorruptHeaderError,
    FormatError,
    GridError,
    InsufficientDataError,
    IntegrityError,
    ParameterError,
    RandoptError,
    SchemaError,
    StalledWalkError,
    TruncatedPayloadError,
    TypeMismatchError,
    VersionMismatchError,
)
from .rng import RngStream
from .instances import (
    ErGraph,
    GaussianTensor,
    InterpolationPath,
    KSatFormula,
    Provenance,
    VertexSubset,
    gen_er_graph,
    gen_ksat,
    gen_tensor,
    instance_at,
    make_interpolation_path,
    pair_index,
    pair_unrank,
    tuple_rank,
    tuple_unrank,
)
from .serialize import (
    content_hash,
    deserialize_instance,
    graph_to_edgelist,
    load_instance,
    save_instance,
    serialize_instance,
)
from .graphopt import (
    MomentCurve,
    clique_moment_curve,
    exact_optimum,
    karp_greedy,
)
from .spin import (
    ChainResult,
    ExtrapolationFit,
    WalkResult,
    brute_force_ground_state,
    energy,
    energy_gradient,
    extrapolate_ground_state,
    guided_walk,
    level_set,
    metropolis_chain,
    overlap,
)
from .parisi import (
    FunctionalValue,
    MinimizeResult,
    MixtureSpec,
    OrderParam,
    PdeGrid,
    minimize_functional,
    parisi_functional,
    solve_parisi_pde,
)
from .ksat import (
    DpllResult,
    WalkSatResult,
    dpll_sat_sweep,
    dpll_solve,
    empirical_crossing,
    enumerate_solutions,
    eval_clauses,
    first_moment_crossing,
    is_satisfying,
    sat_moment_curve,
    walksat,
)
from .ogp import (
    ClusterReport,
    GapReport,
    NearOptimumSet,
    OverlapHistogram,
    SamplerConfig,
    StabilityProfile,
    algorithm_stability_profile,
    cluster_solutions,
    detect_gap,
    interpolation_overlap_experiment,
    overlap_histogram,
    sample_near_optima,
)
from .expcli import (
    ExperimentConfig,
    RunManifest,
    emit_report,
    run_experiment,
    validate_config,
)
