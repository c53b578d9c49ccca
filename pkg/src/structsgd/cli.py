"""Command-line front end.

Subcommands: gen, solve-ref, theory, run, sweep.  Experiment settings can
come from a flat ``key = value`` config file (--config); individual flags
override file values.  Exit codes: 0 success, 2 validation/configuration
error, 3 numerical failure (reference did not converge, or every
repetition diverged).
"""

import argparse
import sys

from .data import (
    SyntheticSpec,
    gen_synthetic,
    require_converged,
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
    config_from_mapping,
    emit_outputs,
    resolve_dataset,
    run_experiment,
    run_sweep,
)
from .problem import Family, ProblemSpec, smoothness_profile
from .sampling import scheme_proportional_to, uniform_scheme
from .theory import build_report

_VALIDATION_ERRORS = (
    ConfigError,
    InvalidInputError,
    InvalidDistributionError,
    InadmissibleStepError,
    NotApplicableError,
    DatasetFormatError,
    FileNotFoundError,
)
_NUMERICAL_ERRORS = (ReferenceNotConvergedError, AllRunsDivergedError)


def parse_config_file(path):
    """Flat ``key = value`` lines; '#' starts a comment, blanks ignored."""
    mapping = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            mapping[key.strip()] = value.strip()
    return mapping


_FLAG_TO_FIELD = {
    "family": "family",
    "lh": "lh",
    "n": "n",
    "d": "d",
    "dataset": "dataset_path",
    "data_seed": "data_seed",
    "batch_size": "batch_size",
    "sampling": "sampling",
    "step_rule": "step_rule",
    "step_value": "step_value",
    "iterations": "iterations",
    "repetitions": "repetitions",
    "seed": "base_seed",
    "x1_mode": "x1_mode",
    "x1_value": "x1_value",
    "ref_tol": "ref_tol",
    "ref_max_iters": "ref_max_iters",
    "out": "out_dir",
}


def _add_experiment_flags(parser):
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--family", choices=[f.value for f in Family])
    parser.add_argument("--lh", type=float, help="regularizer weight L_h")
    parser.add_argument("--n", type=int, help="synthetic sample count")
    parser.add_argument("--d", type=int, help="synthetic dimension")
    parser.add_argument("--dataset", help="dataset file (overrides n/d)")
    parser.add_argument("--data-seed", dest="data_seed", type=int)
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--sampling",
                        choices=("uniform", "proportional_to_smoothness"))
    parser.add_argument("--step-rule", dest="step_rule",
                        choices=("tuned", "classic", "gd", "fixed"))
    parser.add_argument("--step-value", dest="step_value", type=float)
    parser.add_argument("--iterations", type=int)
    parser.add_argument("--repetitions", type=int)
    parser.add_argument("--seed", type=int, help="base seed (stream id = repetition)")
    parser.add_argument("--x1-mode", dest="x1_mode", choices=("constant", "zero"))
    parser.add_argument("--x1-value", dest="x1_value", type=float)
    parser.add_argument("--ref-tol", dest="ref_tol", type=float)
    parser.add_argument("--ref-max-iters", dest="ref_max_iters", type=int)
    parser.add_argument("--out", help="output directory")


def _experiment_config(args):
    mapping = {}
    if args.config:
        mapping.update(parse_config_file(args.config))
    cfg = config_from_mapping(mapping)
    for flag, fieldname in _FLAG_TO_FIELD.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, fieldname, value)
    return cfg.validate()


def _cmd_gen(args):
    family = Family.from_name(args.family or "logistic")
    spec = SyntheticSpec(n=args.n or 10_000, d=args.d or 20, family=family,
                         seed=args.seed if args.seed is not None else 0)
    ds = gen_synthetic(spec)
    out = args.out or f"{family.value}_{spec.n}x{spec.d}.txt"
    save_dataset(ds, family, out)
    print(f"wrote {out} ({spec.n} samples, dimension {spec.d}, {family.value})")
    return 0


def _cmd_solve_ref(args):
    cfg = _experiment_config(args)
    ds, family = resolve_dataset(cfg)
    p = ProblemSpec(family=family, data=ds, reg_strength=cfg.lh)
    ref = require_converged(
        solve_reference(p, tolerance=cfg.ref_tol, max_iters=cfg.ref_max_iters)
    )
    out = args.out or (
        f"{cfg.dataset_path}.ref" if cfg.dataset_path else "reference.ref"
    )
    save_reference(ref, out)
    print(f"wrote {out} (grad norm {ref.grad_norm:.3e} after "
          f"{ref.iterations} iterations)")
    return 0


def _cmd_theory(args):
    cfg = _experiment_config(args)
    ds, family = resolve_dataset(cfg)
    p = ProblemSpec(family=family, data=ds, reg_strength=cfg.lh)
    profile = smoothness_profile(p)
    if cfg.sampling == "uniform":
        scheme = uniform_scheme(p.n, cfg.batch_size)
    else:
        scheme = scheme_proportional_to(profile.per_sample, cfg.batch_size)
    ref = require_converged(
        solve_reference(p, tolerance=cfg.ref_tol, max_iters=cfg.ref_max_iters)
    )
    report = build_report(p, scheme, ref.x_star, ref_tolerance=cfg.ref_tol,
                          profile=profile)
    if args.format == "csv":
        sys.stdout.write(report.to_csv())
    else:
        sys.stdout.write(report.to_text())
    return 0


def _cmd_run(args):
    cfg = _experiment_config(args)
    report = run_experiment(cfg)
    out = cfg.out_dir or "results"
    emit_outputs(report, out)
    print(f"wrote {out}/trace.csv theory.csv summary.txt plot.svg")
    print(f"plateau_rel_error {report.r_rel!r}")
    print(f"bound_violations {report.violations}")
    print(f"fitted_log_slope {report.slope!r}")
    return 0


def _cmd_sweep(args):
    cfg = _experiment_config(args)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    if args.param == "batch_size":
        values = [int(v) for v in values]
    out = cfg.out_dir or "sweep"
    results = run_sweep(cfg, args.param, values, out)
    for value, report in results:
        print(f"{args.param}={value:g} plateau={report.r_rel!r} "
              f"slope={report.slope!r} violations={report.violations}")
    print(f"wrote {out}/sweep.csv")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="structsgd",
        description="Mini-batch SGD experiments on finite-sum objectives "
                    "with a strongly convex regularizer.",
    )
    parser.add_argument("--format", choices=("text", "csv"), default="text",
                        help="output format for the theory subcommand")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic dataset file")
    gen.add_argument("--family", choices=[f.value for f in Family],
                     default="logistic")
    gen.add_argument("--n", type=int, default=10_000)
    gen.add_argument("--d", type=int, default=20)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out")
    gen.set_defaults(func=_cmd_gen)

    ref = sub.add_parser("solve-ref",
                         help="solve and store the reference minimizer")
    _add_experiment_flags(ref)
    ref.set_defaults(func=_cmd_solve_ref)

    theory_cmd = sub.add_parser("theory",
                                help="print step sizes, rates, and radii")
    _add_experiment_flags(theory_cmd)
    theory_cmd.set_defaults(func=_cmd_theory)

    run = sub.add_parser("run", help="run an experiment and write outputs")
    _add_experiment_flags(run)
    run.set_defaults(func=_cmd_run)

    sweep = sub.add_parser("sweep", help="run an experiment per grid value")
    _add_experiment_flags(sweep)
    sweep.add_argument("--param", choices=("lh", "batch_size"), required=True)
    sweep.add_argument("--values", required=True,
                       help="comma-separated grid, e.g. 1,5,10")
    sweep.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
