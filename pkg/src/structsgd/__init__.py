"""Mini-batch SGD on finite-sum objectives with a strongly convex
regularizer: models, weighted sampling, prescribed step sizes and rates,
and an experiment harness that checks runs against their error bounds."""

from .data import (
    ReferenceSolution,
    SyntheticSpec,
    gen_synthetic,
    load_dataset,
    load_reference,
    save_dataset,
    save_reference,
    solve_reference,
)
from .errors import (
    AllRunsDivergedError,
    ConfigError,
    DatasetFormatError,
    InadmissibleStepError,
    InvalidDistributionError,
    InvalidInputError,
    NotApplicableError,
    ReferenceNotConvergedError,
)
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    emit_outputs,
    estimate_plateau,
    fit_log_slope,
    run_experiment,
    run_sweep,
)
from .optimizer import OptimizerConfig, Trace, gd_run, sgd_run
from .problem import (
    Dataset,
    Family,
    ProblemSpec,
    SmoothnessProfile,
    component_grad_sq_norms,
    eval_objective,
    grad_component,
    grad_full,
    smoothness_profile,
)
from .sampling import (
    AliasSampler,
    RngStream,
    SamplingScheme,
    build_sampler,
    draw_batch,
    minibatch_gradient,
    scheme_proportional_to,
    uniform_scheme,
)
from .theory import (
    TheoryReport,
    build_report,
    classic_rate,
    classic_step_size,
    contraction_rate,
    expected_error_bound,
    gd_contraction_factor,
    gd_step_size,
    growth_factor,
    noise_at_minimizer,
    rate_shift_check,
    region_radius,
    tuned_beats_classic,
    tuned_step_size,
)

__version__ = "0.1.0"
