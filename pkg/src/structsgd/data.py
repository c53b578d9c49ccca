"""Synthetic datasets, the on-disk text format, and the reference solve.

File format
-----------
Line 1:  ``n d family`` (family is ridge, logistic, or hinge_sq).
Lines 2..n+1:  label followed by d feature values, space separated,
printed with 17 significant digits so float64 values round-trip exactly.

A reference solution stored next to a dataset at ``<path>.ref`` holds::

    tolerance <float>
    grad_norm <float>
    iterations <int>
    converged <0|1>
    x_star <v1> ... <vd>

Synthetic data uses the shared Philox stream machinery with the reserved
stream id ``DATA_STREAM`` (2**63), far outside the 0..repetitions-1 range
the experiment harness hands to optimizer runs, so a dataset seed can
safely coincide with a run seed.  Features are drawn first (standard
normal, row-major), then labels: +1/-1 with equal probability for the
classification families, standard normal for ridge.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DatasetFormatError,
    InvalidInputError,
    ReferenceNotConvergedError,
)
from .problem import (
    CLASSIFICATION_FAMILIES,
    Dataset,
    Family,
    grad_full,
    smoothness_profile,
)
from .sampling import RngStream
from .theory import gd_step_size

DATA_STREAM = 1 << 63


@dataclass
class SyntheticSpec:
    """Shape, family, and seed of a generated dataset."""

    n: int
    d: int
    family: Family
    seed: int

    def __post_init__(self):
        self.n = int(self.n)
        self.d = int(self.d)
        self.family = Family(self.family)
        self.seed = int(self.seed)
        if self.n < 1 or self.d < 1:
            raise InvalidInputError("n and d must be >= 1")


def gen_synthetic(spec):
    """Standard-normal features; labels per family (see module docstring)."""
    gen = RngStream(spec.seed, DATA_STREAM).generator
    features = gen.standard_normal((spec.n, spec.d))
    if spec.family in CLASSIFICATION_FAMILIES:
        labels = gen.integers(0, 2, size=spec.n) * 2.0 - 1.0
    else:
        labels = gen.standard_normal(spec.n)
    return Dataset(features=features, labels=labels)


def save_dataset(ds, family, path):
    """Write header ``n d family`` then one ``label features...`` row each."""
    family = Family(family)
    with open(path, "w") as fh:
        fh.write(f"{ds.n} {ds.d} {family.value}\n")
        for i in range(ds.n):
            row = ds.features[i]
            fh.write(
                f"{ds.labels[i]:.17g} " + " ".join(f"{v:.17g}" for v in row) + "\n"
            )


def load_dataset(path):
    """Parse a dataset file; returns (Dataset, Family).

    Any malformed content raises DatasetFormatError naming the line.
    """
    with open(path) as fh:
        header = fh.readline()
        if not header:
            raise DatasetFormatError("empty file", path=path, line=1)
        parts = header.split()
        if len(parts) != 3:
            raise DatasetFormatError(
                f"header must be 'n d family', got {header.strip()!r}",
                path=path,
                line=1,
            )
        try:
            n, d = int(parts[0]), int(parts[1])
        except ValueError:
            raise DatasetFormatError(
                f"non-integer dimensions in header {header.strip()!r}",
                path=path,
                line=1,
            ) from None
        if n < 1 or d < 1:
            raise DatasetFormatError("n and d must be >= 1", path=path, line=1)
        try:
            family = Family(parts[2])
        except ValueError:
            raise DatasetFormatError(
                f"unknown family {parts[2]!r}", path=path, line=1
            ) from None

        features = np.empty((n, d))
        labels = np.empty(n)
        for i in range(n):
            lineno = i + 2
            line = fh.readline()
            if not line:
                raise DatasetFormatError(
                    f"expected {n} sample rows, file ends after {i}",
                    path=path,
                    line=lineno,
                )
            fields = line.split()
            if len(fields) != d + 1:
                raise DatasetFormatError(
                    f"expected {d + 1} values, got {len(fields)}",
                    path=path,
                    line=lineno,
                )
            try:
                values = [float(v) for v in fields]
            except ValueError:
                raise DatasetFormatError(
                    "unparseable numeric value", path=path, line=lineno
                ) from None
            if not all(math.isfinite(v) for v in values):
                raise DatasetFormatError(
                    "non-finite value", path=path, line=lineno
                )
            labels[i] = values[0]
            features[i] = values[1:]

    if family in CLASSIFICATION_FAMILIES and not np.all(np.abs(labels) == 1.0):
        bad = int(np.flatnonzero(np.abs(labels) != 1.0)[0])
        raise DatasetFormatError(
            f"{family.value} labels must be +1 or -1, sample {bad} has "
            f"{labels[bad]!r}",
            path=path,
            line=bad + 2,
        )
    return Dataset(features=features, labels=labels), family


@dataclass
class ReferenceSolution:
    """Minimizer estimate from the deterministic reference solve."""

    x_star: np.ndarray
    grad_norm: float
    iterations: int
    tolerance: float
    converged: bool


def solve_reference(p, tolerance=1e-12, max_iters=10_000_000):
    """Full-gradient descent from the origin until ||grad psi|| <= tolerance.

    Uses the step 2/(lam + L_F + L_h); convergence is geometric, so the
    default iteration cap is a safety valve, not a tuning knob.  A capped
    run returns ``converged=False`` rather than raising; callers must not
    use such a result as a minimizer.
    """
    if not 0.0 < tolerance < 1.0:
        raise InvalidInputError("tolerance must lie in (0, 1)")
    if max_iters < 1:
        raise InvalidInputError("max_iters must be >= 1")
    step = gd_step_size(smoothness_profile(p))
    x = np.zeros(p.d)
    for it in range(int(max_iters)):
        g = grad_full(p, x)
        gn = float(np.linalg.norm(g))
        if gn <= tolerance:
            return ReferenceSolution(
                x_star=x, grad_norm=gn, iterations=it,
                tolerance=tolerance, converged=True,
            )
        x = x - step * g
    gn = float(np.linalg.norm(grad_full(p, x)))
    return ReferenceSolution(
        x_star=x, grad_norm=gn, iterations=int(max_iters),
        tolerance=tolerance, converged=gn <= tolerance,
    )


def require_converged(ref):
    """Raise unless the reference solve actually met its tolerance."""
    if not ref.converged:
        raise ReferenceNotConvergedError(
            f"reference solve stopped at grad norm {ref.grad_norm!r} after "
            f"{ref.iterations} iterations (tolerance {ref.tolerance!r})"
        )
    return ref


def save_reference(ref, path):
    with open(path, "w") as fh:
        fh.write(f"tolerance {ref.tolerance:.17g}\n")
        fh.write(f"grad_norm {ref.grad_norm:.17g}\n")
        fh.write(f"iterations {ref.iterations}\n")
        fh.write(f"converged {int(ref.converged)}\n")
        fh.write("x_star " + " ".join(f"{v:.17g}" for v in ref.x_star) + "\n")


def load_reference(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    try:
        fields = dict(line.split(" ", 1) for line in lines if line)
        x = np.array([float(v) for v in fields["x_star"].split()])
        return ReferenceSolution(
            x_star=x,
            grad_norm=float(fields["grad_norm"]),
            iterations=int(fields["iterations"]),
            tolerance=float(fields["tolerance"]),
            converged=bool(int(fields["converged"])),
        )
    except (KeyError, ValueError) as exc:
        raise DatasetFormatError(
            f"malformed reference file: {exc}", path=path
        ) from None
