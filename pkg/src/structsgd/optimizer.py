"""Constant-step mini-batch SGD and full-gradient descent.

The stochastic update is

    x_{k+1} = x_k - eta * ( (1/B) sum_j w_{i_j} grad f_{i_j}(x_k) + L_h x_k )

with importance weights w_i = 1/(n p_i) and indices drawn i.i.d. with
replacement.  ``sgd_run`` materializes its whole index plan up front
(fixed block schedule, see :mod:`structsgd.sampling`), which pins the
stream-to-iteration mapping and keeps the loop tight.

Non-finite iterates do not raise: the run halts, the remaining error
entries stay NaN, and the trace is flagged.  Callers aggregating many
repetitions need the flag, not an exception.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .problem import eval_objective, grad_full, grad_scalars
from .sampling import batch_gradient, build_sampler, draw_index_plan

_INF = float("inf")


@dataclass
class OptimizerConfig:
    """Step size, iteration count, and starting point for one run."""

    step_size: float
    iterations: int
    initial_point: np.ndarray

    def __post_init__(self):
        self.step_size = float(self.step_size)
        self.iterations = int(self.iterations)
        self.initial_point = np.ascontiguousarray(
            self.initial_point, dtype=np.float64
        )
        if not math.isfinite(self.step_size) or self.step_size <= 0.0:
            raise InvalidInputError("step_size must be positive and finite")
        if self.iterations < 1:
            raise InvalidInputError("iterations must be >= 1")
        if self.initial_point.ndim != 1:
            raise InvalidInputError("initial_point must be a 1-d array")
        if not np.all(np.isfinite(self.initial_point)):
            raise InvalidInputError("initial_point contains non-finite entries")


@dataclass
class Trace:
    """Per-iteration record of one run.

    ``errors`` holds ||x_k - x*|| for k = 1..K+1 (so K+1 entries, the
    first being the starting point) and is None when no reference point
    was supplied.  Entries after a divergence stay NaN.  ``objective_iters``
    / ``objective_values`` are filled only when objective recording is on.
    """

    final_iterate: np.ndarray
    errors: np.ndarray | None = None
    objective_iters: np.ndarray | None = None
    objective_values: np.ndarray | None = None
    diverged: bool = False
    diverged_at: int | None = None


def _start_point(p, config):
    x = np.array(config.initial_point, dtype=np.float64, copy=True)
    if x.shape != (p.d,):
        raise InvalidInputError(
            f"initial_point has shape {x.shape}, expected ({p.d},)"
        )
    return x


def sgd_run(p, scheme, config, rng, reference=None,
            record_objective=False, objective_stride=10):
    """One SGD trajectory; deterministic given (problem, scheme, config, rng).

    reference : optional minimizer x*; enables error recording.
    record_objective : sample psi(x_k) every ``objective_stride`` iterations.
    """
    if scheme.n != p.n:
        raise InvalidInputError(
            f"scheme covers {scheme.n} samples but problem has {p.n}"
        )
    if record_objective and objective_stride < 1:
        raise InvalidInputError("objective_stride must be >= 1")
    x = _start_point(p, config)
    xs = None
    if reference is not None:
        xs = np.asarray(reference, dtype=np.float64)
        if xs.shape != (p.d,):
            raise InvalidInputError(f"reference has shape {xs.shape}, expected ({p.d},)")

    K = config.iterations
    B = scheme.batch_size
    eta = config.step_size
    lh = p.reg_strength
    A = p.data.features
    labels = p.data.labels
    w = scheme.weights
    family = p.family

    sampler = build_sampler(scheme.probs)
    plan = draw_index_plan(sampler, rng, K * B)

    errors = None
    if xs is not None:
        errors = np.full(K + 1, np.nan)
        dx = x - xs
        errors[0] = math.sqrt(dx @ dx)

    obj_iters = []
    obj_values = []
    if record_objective:
        obj_iters.append(0)
        obj_values.append(eval_objective(p, x))

    diverged = False
    diverged_at = None

    # Divergence is detected and flagged, so the transient overflows on
    # the way there are expected; keep numpy quiet about them.
    with np.errstate(over="ignore", invalid="ignore"):
        if B == 1:
            # Hot path: python-int indexing, no batch bookkeeping.
            plan_list = plan.tolist()
            wl = w.tolist()
            for k in range(K):
                j = plan_list[k]
                rows = A[j : j + 1]
                c = grad_scalars(family, rows @ x, labels[j : j + 1])
                g = (wl[j] * c[0]) * rows[0]
                x = x - eta * (g + lh * x)
                if xs is not None:
                    dx = x - xs
                    e = math.sqrt(dx @ dx)
                    if not e < _INF:
                        diverged, diverged_at = True, k + 1
                        break
                    errors[k + 1] = e
                elif not np.all(np.isfinite(x)):
                    diverged, diverged_at = True, k + 1
                    break
                if record_objective and (k + 1) % objective_stride == 0:
                    obj_iters.append(k + 1)
                    obj_values.append(eval_objective(p, x))
        else:
            plan = plan.reshape(K, B)
            for k in range(K):
                g = batch_gradient(family, A, labels, w, x, plan[k])
                x = x - eta * (g + lh * x)
                if xs is not None:
                    dx = x - xs
                    e = math.sqrt(dx @ dx)
                    if not e < _INF:
                        diverged, diverged_at = True, k + 1
                        break
                    errors[k + 1] = e
                elif not np.all(np.isfinite(x)):
                    diverged, diverged_at = True, k + 1
                    break
                if record_objective and (k + 1) % objective_stride == 0:
                    obj_iters.append(k + 1)
                    obj_values.append(eval_objective(p, x))

    return Trace(
        final_iterate=x,
        errors=errors,
        objective_iters=np.array(obj_iters) if record_objective else None,
        objective_values=np.array(obj_values) if record_objective else None,
        diverged=diverged,
        diverged_at=diverged_at,
    )


def gd_run(p, config, reference=None, record_objective=False,
           objective_stride=10):
    """Deterministic full-gradient descent with a constant step."""
    if record_objective and objective_stride < 1:
        raise InvalidInputError("objective_stride must be >= 1")
    x = _start_point(p, config)
    xs = None
    if reference is not None:
        xs = np.asarray(reference, dtype=np.float64)
        if xs.shape != (p.d,):
            raise InvalidInputError(f"reference has shape {xs.shape}, expected ({p.d},)")

    K = config.iterations
    eta = config.step_size

    errors = None
    if xs is not None:
        errors = np.full(K + 1, np.nan)
        dx = x - xs
        errors[0] = math.sqrt(dx @ dx)

    obj_iters = []
    obj_values = []
    if record_objective:
        obj_iters.append(0)
        obj_values.append(eval_objective(p, x))

    diverged = False
    diverged_at = None
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(K):
            x = x - eta * grad_full(p, x)
            if xs is not None:
                dx = x - xs
                e = math.sqrt(dx @ dx)
                if not e < _INF:
                    diverged, diverged_at = True, k + 1
                    break
                errors[k + 1] = e
            elif not np.all(np.isfinite(x)):
                diverged, diverged_at = True, k + 1
                break
            if record_objective and (k + 1) % objective_stride == 0:
                obj_iters.append(k + 1)
                obj_values.append(eval_objective(p, x))

    return Trace(
        final_iterate=x,
        errors=errors,
        objective_iters=np.array(obj_iters) if record_objective else None,
        objective_values=np.array(obj_values) if record_objective else None,
        diverged=diverged,
        diverged_at=diverged_at,
    )
