"""racebo: Bayesian optimisation of lap-time control policies.

A Gaussian-process surrogate over policy weights is searched one coordinate
at a time, which keeps high-dimensional policy search tractable within a
small budget of simulated laps. Ships with a deterministic longitudinal
race simulator, baseline optimisers and a reproducible benchmark harness.
"""

__version__ = "0.1.0"

from .kernels import KernelFamily, KernelSpec, ard_sq_dist, gram_matrix, kernel_eval
from .gp import (
    FactorizationError,
    GpModel,
    HyperBounds,
    adapt_hyperparams,
    default_bounds,
    gp_fit,
    gp_posterior,
    gp_update,
    log_marginal_likelihood,
)
from .policy import (
    Demonstration,
    FeatureMap,
    Policy,
    feature_matrix,
    feature_vector,
    fit_initial_weights,
    load_demonstration,
    policy_action,
    save_demonstration,
)
from .racesim import (
    BUILTIN_TRACKS,
    CarParams,
    DemonstrationError,
    EpisodeResult,
    FailureReason,
    Track,
    TrackFormatError,
    builtin_track,
    curvature_speed_limit,
    demo_controller,
    load_track,
    pi_reference_result,
    save_track,
    simulate_lap,
)
from .search import (
    AcquisitionSpec,
    Incumbent,
    LapRecord,
    RunResult,
    SearchBudget,
    acquisition,
    cdbo_run,
    coordinate_ascent_sweep,
    line_maximize,
    stochastic_coordinate_ascent,
)
from .baselines import (
    CmaEs,
    Embedding,
    cmaes_run,
    maximize_acquisition_cmaes,
    plain_bo_run,
    random_search_run,
    rembo_run,
)
from .harness import (
    AveragedCurve,
    ConfigError,
    ExperimentConfig,
    RunRecord,
    aggregate,
    aggregate_directory,
    build_problem,
    emit_outputs,
    load_config,
    run_and_emit,
    run_experiment,
)
