"""End-to-end experiment driver: data, reference, runs, aggregation, outputs.

An experiment resolves its dataset (file or synthetic), solves the
reference minimizer, evaluates the rate constants, runs ``repetitions``
independent SGD trajectories (stream id r for repetition r), and
aggregates mean error curves against the matching theoretical bound.

Outputs written by :func:`emit_outputs`:

    trace.csv    k, mean_sq_error, mean_rel_error, bound_rhs
    theory.csv   one row of rate constants (see theory.TheoryReport)
    summary.txt  key-value block: plateau level, violations, slope, ...
    plot.svg     log-scale mean relative error with the bound overlaid

The bound column depends on the step rule: the stochastic bound
(1-q)^k D + R for ``tuned`` and ``fixed`` steps, the same form with the
classic rate and its own noise radius for ``classic``, and the
deterministic factor^(2k) D curve for ``gd``.
"""

import csv
import math
import os
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import theory
from .data import SyntheticSpec, gen_synthetic, load_dataset, require_converged, solve_reference
from .errors import AllRunsDivergedError, ConfigError, InadmissibleStepError
from .optimizer import OptimizerConfig, Trace, gd_run, sgd_run
from .problem import Family, ProblemSpec, component_grad_sq_norms, smoothness_profile
from .sampling import RngStream, SamplingScheme, scheme_proportional_to, uniform_scheme

SAMPLING_KINDS = ("uniform", "proportional_to_smoothness")
STEP_RULES = ("tuned", "classic", "gd", "fixed")
X1_MODES = ("constant", "zero")


@dataclass
class ExperimentConfig:
    """Everything one experiment needs; validated up front.

    ``dataset_path`` wins over the synthetic (n, d, data_seed) triple when
    set.  ``data_seed`` defaults to ``base_seed``; the generator uses a
    reserved stream id, so the overlap is harmless.
    """

    family: str = "logistic"
    lh: float = 10.0
    n: int = 10_000
    d: int = 20
    dataset_path: str | None = None
    data_seed: int | None = None
    batch_size: int = 1
    sampling: str = "uniform"
    step_rule: str = "tuned"
    step_value: float | None = None
    iterations: int = 1000
    repetitions: int = 100
    base_seed: int = 0
    x1_mode: str = "constant"
    x1_value: float = 10.0
    ref_tol: float = 1e-12
    ref_max_iters: int = 10_000_000
    out_dir: str | None = None

    def validate(self):
        try:
            Family(self.family)
        except ValueError:
            raise ConfigError(
                f"family must be one of {[f.value for f in Family]}, "
                f"got {self.family!r}"
            ) from None
        if not (math.isfinite(self.lh) and self.lh > 0):
            raise ConfigError("lh must be positive and finite")
        if self.dataset_path is None and (self.n < 1 or self.d < 1):
            raise ConfigError("n and d must be >= 1 for synthetic data")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.sampling not in SAMPLING_KINDS:
            raise ConfigError(
                f"sampling must be one of {SAMPLING_KINDS}, got {self.sampling!r}"
            )
        if self.step_rule not in STEP_RULES:
            raise ConfigError(
                f"step_rule must be one of {STEP_RULES}, got {self.step_rule!r}"
            )
        if self.step_rule == "fixed":
            if self.step_value is None or not math.isfinite(self.step_value) \
                    or self.step_value <= 0:
                raise ConfigError(
                    "step_rule 'fixed' needs a positive finite step_value"
                )
        if self.step_rule == "classic":
            if self.batch_size != 1 or self.sampling != "uniform":
                raise ConfigError(
                    "step_rule 'classic' is defined only for batch_size 1 "
                    "with uniform sampling"
                )
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.x1_mode not in X1_MODES:
            raise ConfigError(
                f"x1_mode must be one of {X1_MODES}, got {self.x1_mode!r}"
            )
        if not (math.isfinite(self.x1_value)):
            raise ConfigError("x1_value must be finite")
        if not (0 < self.ref_tol < 1):
            raise ConfigError("ref_tol must lie in (0, 1)")
        if self.ref_max_iters < 1:
            raise ConfigError("ref_max_iters must be >= 1")
        return self


@dataclass
class ExperimentReport:
    """Aggregated curves plus the constants and settings that produced them."""

    mean_sq_error: np.ndarray
    mean_rel_error: np.ndarray
    bound_rhs: np.ndarray
    bound_kind: str
    constants: theory.TheoryReport
    r_rel: float
    slope: float
    violations: int
    eta_used: float
    rate_used: float
    radius_used: float
    init_err_sq: float
    repetitions_done: int
    diverged_count: int
    reference_grad_norm: float
    config: ExperimentConfig
    traces: list = field(default_factory=list, repr=False)


def resolve_dataset(cfg):
    """Dataset and family for a validated config."""
    if cfg.dataset_path is not None:
        ds, family = load_dataset(cfg.dataset_path)
        if family != Family(cfg.family):
            raise ConfigError(
                f"config family {cfg.family!r} does not match dataset file "
                f"family {family.value!r}"
            )
        return ds, family
    seed = cfg.base_seed if cfg.data_seed is None else cfg.data_seed
    spec = SyntheticSpec(n=cfg.n, d=cfg.d, family=Family(cfg.family), seed=seed)
    return gen_synthetic(spec), spec.family


def _build_scheme(cfg, profile):
    if cfg.sampling == "uniform":
        return uniform_scheme(profile.n, cfg.batch_size)
    return scheme_proportional_to(profile.per_sample, cfg.batch_size)


def _classic_noise_radius(p, x_star, eta):
    # Limiting radius paired with the classic step: (2 eta / (lam n))
    # * sum_i ||grad f_i(x*) + grad h(x*)||^2.
    lam = p.reg_strength
    G = _per_sample_full_grads(p, x_star)
    total = float(np.sum(np.einsum("ij,ij->i", G, G)))
    return 2.0 * eta * total / (lam * p.n)


def _per_sample_full_grads(p, x):
    from .problem import grad_scalars

    A = p.data.features
    c = grad_scalars(p.family, A @ x, p.data.labels)
    return c[:, None] * A + p.reg_strength * x


def run_experiment(cfg, stream_ids=None, keep_traces=False):
    """Run one full experiment; returns an :class:`ExperimentReport`.

    ``stream_ids`` overrides the default 0..repetitions-1 assignment (one
    id per repetition); the mean curves are invariant to permutations of
    it up to float accumulation order.
    """
    cfg.validate()
    ds, family = resolve_dataset(cfg)
    p = ProblemSpec(family=family, data=ds, reg_strength=cfg.lh)
    profile = smoothness_profile(p)
    scheme = _build_scheme(cfg, profile)

    ref = require_converged(
        solve_reference(p, tolerance=cfg.ref_tol, max_iters=cfg.ref_max_iters)
    )
    constants = theory.build_report(
        p, scheme, ref.x_star, ref_tolerance=cfg.ref_tol, profile=profile
    )

    if cfg.step_rule == "tuned":
        eta = constants.step_tuned
    elif cfg.step_rule == "classic":
        eta = constants.step_classic
    elif cfg.step_rule == "gd":
        eta = constants.step_gd
    else:
        eta = float(cfg.step_value)
        limit = constants.step_tuned
        if eta > limit:
            raise InadmissibleStepError(
                f"fixed step {eta!r} exceeds the admissible bound "
                f"2/((s+1)(lam+L_F+L_h)) = {limit!r}"
            )

    if cfg.x1_mode == "constant":
        x1 = np.full(p.d, float(cfg.x1_value))
    else:
        x1 = np.zeros(p.d)
    run_cfg = OptimizerConfig(step_size=eta, iterations=cfg.iterations,
                              initial_point=x1)

    K = cfg.iterations
    init_dist = float(np.linalg.norm(x1 - ref.x_star))
    init_err_sq = init_dist * init_dist

    traces = []
    if cfg.step_rule == "gd":
        # Deterministic: repetitions would all be identical, run once.
        trace = gd_run(p, run_cfg, reference=ref.x_star)
        reps_done = 1
        runs = [trace]
    else:
        if stream_ids is None:
            stream_ids = range(cfg.repetitions)
        else:
            stream_ids = list(stream_ids)
            if len(stream_ids) != cfg.repetitions:
                raise ConfigError(
                    "stream_ids must supply exactly one id per repetition"
                )
        runs = [
            sgd_run(p, scheme, run_cfg, RngStream(cfg.base_seed, r),
                    reference=ref.x_star)
            for r in stream_ids
        ]
        reps_done = cfg.repetitions

    sum_err = np.zeros(K + 1)
    sum_sq = np.zeros(K + 1)
    used = 0
    diverged = 0
    for trace in runs:
        if trace.diverged:
            diverged += 1
            continue
        sum_err += trace.errors
        sum_sq += trace.errors * trace.errors
        used += 1
        if keep_traces:
            traces.append(trace)
    if used == 0:
        raise AllRunsDivergedError(
            f"all {reps_done} repetitions diverged (step {eta!r})"
        )
    mean_err = sum_err / used
    mean_sq = sum_sq / used
    mean_rel = mean_err / init_dist if init_dist > 0 else mean_err

    ks = np.arange(K + 1)
    if cfg.step_rule == "gd":
        factor = constants.rate_factor_gd
        bound = (factor ** (2.0 * ks)) * init_err_sq
        bound_kind = "gd"
        rate_used = float("nan")
        radius_used = 0.0
    elif cfg.step_rule == "classic":
        rate_used = p.reg_strength * eta
        radius_used = _classic_noise_radius(p, ref.x_star, eta)
        bound = theory.expected_error_bound(ks, rate_used, radius_used, init_err_sq)
        bound_kind = "classic"
    else:
        rate_used = theory.contraction_rate(eta, profile, constants.growth_factor)
        radius_used = theory.region_radius(eta, constants.noise_at_min, rate_used)
        bound = theory.expected_error_bound(ks, rate_used, radius_used, init_err_sq)
        bound_kind = "stochastic"

    violations = int(np.sum(mean_sq > bound))
    r_rel = estimate_plateau(mean_rel)
    slope = fit_log_slope(mean_rel, r_rel)

    return ExperimentReport(
        mean_sq_error=mean_sq,
        mean_rel_error=mean_rel,
        bound_rhs=np.asarray(bound, dtype=np.float64),
        bound_kind=bound_kind,
        constants=constants,
        r_rel=r_rel,
        slope=slope,
        violations=violations,
        eta_used=eta,
        rate_used=rate_used,
        radius_used=radius_used,
        init_err_sq=init_err_sq,
        repetitions_done=reps_done,
        diverged_count=diverged,
        reference_grad_norm=ref.grad_norm,
        config=cfg,
        traces=traces,
    )


def estimate_plateau(mean_rel_error):
    """Max of the mean relative error over the final 20% of iterations."""
    curve = np.asarray(mean_rel_error, dtype=np.float64)
    if curve.ndim != 1 or curve.size < 5:
        raise ConfigError("plateau estimate needs a curve of at least 5 entries")
    window = math.ceil(0.2 * curve.size)
    return float(np.max(curve[-window:]))


def fit_log_slope(mean_rel_error, plateau, upper=0.5, lower_factor=10.0,
                  floor=1e-13):
    """Least-squares slope of log(error) vs k over the linear decay phase.

    The fit window keeps entries strictly between max(lower_factor *
    plateau, floor) and ``upper``, which excludes both the flat start and
    the noise plateau.  Returns NaN when fewer than two points survive.
    """
    curve = np.asarray(mean_rel_error, dtype=np.float64)
    lo = max(lower_factor * plateau, floor)
    mask = (curve < upper) & (curve > lo)
    if int(np.sum(mask)) < 2:
        return float("nan")
    ks = np.flatnonzero(mask)
    coeffs = np.polyfit(ks, np.log(curve[mask]), 1)
    return float(coeffs[0])


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def emit_outputs(report, out_dir):
    """Write trace.csv, theory.csv, summary.txt, and plot.svg under out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    trace_path = os.path.join(out_dir, "trace.csv")
    with open(trace_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k", "mean_sq_error", "mean_rel_error", "bound_rhs"])
        for k in range(report.mean_sq_error.size):
            writer.writerow([
                k + 1,
                _fmt(report.mean_sq_error[k]),
                _fmt(report.mean_rel_error[k]),
                _fmt(report.bound_rhs[k]),
            ])

    with open(os.path.join(out_dir, "theory.csv"), "w") as fh:
        fh.write(report.constants.to_csv())

    cfg = report.config
    summary = [
        ("family", cfg.family),
        ("n", cfg.n if cfg.dataset_path is None else "file"),
        ("d", cfg.d if cfg.dataset_path is None else "file"),
        ("lh", _fmt(cfg.lh)),
        ("batch_size", cfg.batch_size),
        ("sampling", cfg.sampling),
        ("step_rule", cfg.step_rule),
        ("iterations", cfg.iterations),
        ("repetitions", report.repetitions_done),
        ("base_seed", cfg.base_seed),
        ("eta_used", _fmt(report.eta_used)),
        ("rate_used", _fmt(report.rate_used)),
        ("radius_used", _fmt(report.radius_used)),
        ("bound_kind", report.bound_kind),
        ("init_err_sq", _fmt(report.init_err_sq)),
        ("plateau_rel_error", _fmt(report.r_rel)),
        ("bound_violations", report.violations),
        ("fitted_log_slope", _fmt(report.slope)),
        ("diverged_runs", report.diverged_count),
        ("reference_grad_norm", _fmt(report.reference_grad_norm)),
        ("reference_tolerance", _fmt(cfg.ref_tol)),
    ]
    with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
        for key, value in summary:
            fh.write(f"{key} {value}\n")

    _write_plot(report, os.path.join(out_dir, "plot.svg"))
    return trace_path


def _write_plot(report, path):
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    ks = np.arange(report.mean_rel_error.size)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.semilogy(ks, np.maximum(report.mean_rel_error, 1e-300),
                label="mean relative error", lw=1.4)
    if report.init_err_sq > 0:
        rel_bound = np.sqrt(report.bound_rhs / report.init_err_sq)
        ax.semilogy(ks, np.maximum(rel_bound, 1e-300), "--",
                    label="bound (relative units)", lw=1.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel("relative error")
    ax.set_title(
        f"{report.config.family}, B={report.config.batch_size}, "
        f"L_h={report.config.lh:g}, rule={report.config.step_rule}"
    )
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def run_sweep(base_cfg, param, values, out_dir):
    """Run a family of experiments varying ``param`` (lh or batch_size).

    Each point lands in ``out_dir/<param>_<value>/``; a sweep.csv with
    (value, plateau, slope, violations) rows summarizes the family.
    Returns the list of (value, report) pairs.
    """
    if param not in ("lh", "batch_size"):
        raise ConfigError(f"sweep parameter must be 'lh' or 'batch_size', got {param!r}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    results = []
    os.makedirs(out_dir, exist_ok=True)
    for value in values:
        if param == "lh":
            cfg = replace(base_cfg, lh=float(value))
            tag = f"lh_{value:g}"
        else:
            cfg = replace(base_cfg, batch_size=int(value))
            tag = f"batch_size_{int(value)}"
        report = run_experiment(cfg)
        emit_outputs(report, os.path.join(out_dir, tag))
        results.append((value, report))
    with open(os.path.join(out_dir, "sweep.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([param, "plateau_rel_error", "fitted_log_slope",
                         "bound_violations"])
        for value, report in results:
            writer.writerow([
                _fmt(float(value)), _fmt(report.r_rel), _fmt(report.slope),
                report.violations,
            ])
    return results


def config_from_mapping(mapping):
    """Build an ExperimentConfig from string key-value pairs (config files).

    Unknown keys raise; values are coerced to the field's type.
    """
    kwargs = {}
    by_name = {f.name: f for f in fields(ExperimentConfig)}
    converters = {
        "family": str, "lh": float, "n": int, "d": int,
        "dataset_path": str, "data_seed": int, "batch_size": int,
        "sampling": str, "step_rule": str, "step_value": float,
        "iterations": int, "repetitions": int, "base_seed": int,
        "x1_mode": str, "x1_value": float, "ref_tol": float,
        "ref_max_iters": int, "out_dir": str,
    }
    for key, raw in mapping.items():
        if key not in by_name:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            kwargs[key] = converters[key](raw)
        except ValueError:
            raise ConfigError(
                f"config key {key!r} has unparseable value {raw!r}"
            ) from None
    return ExperimentConfig(**kwargs)
