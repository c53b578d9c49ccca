"""Structured objectives: a finite-sum data term plus a ridge regularizer.

The objective handled everywhere in this package is

    psi(x) = F(x) + h(x),
    F(x)   = (1/n) sum_i f_i(x),
    h(x)   = (L_h / 2) ||x||^2,

with three per-sample loss families over feature rows a_i and labels b_i:

    ridge     f_i(x) = 0.5 * (a_i.x - b_i)^2
    logistic  f_i(x) = log(1 + exp(-b_i * a_i.x)),      b_i in {-1, +1}
    hinge_sq  f_i(x) = 0.5 * max(0, 1 - b_i * a_i.x)^2, b_i in {-1, +1}

All three have gradients of the form grad f_i(x) = c_i(x) * a_i for a
per-sample scalar c_i, which keeps full and batched gradients cheap.
Per-sample gradient Lipschitz constants are ||a_i||^2 for ridge and
hinge_sq and ||a_i||^2 / 4 for logistic.  h contributes L_h to the
smoothness budget and makes psi strongly convex with parameter L_h.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InvalidInputError


class Family(str, Enum):
    RIDGE = "ridge"
    LOGISTIC = "logistic"
    HINGE_SQ = "hinge_sq"

    @classmethod
    def from_name(cls, name):
        try:
            return cls(name)
        except ValueError:
            raise InvalidInputError(
                f"unknown family {name!r}; expected one of "
                f"{[f.value for f in cls]}"
            ) from None


# Families whose labels must be exactly +1 or -1.
CLASSIFICATION_FAMILIES = frozenset({Family.LOGISTIC, Family.HINGE_SQ})


@dataclass
class Dataset:
    """Feature matrix (n, d) and label vector (n,), both float64 and finite."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.float64)
        if self.features.ndim != 2:
            raise InvalidInputError("features must be a 2-d array")
        if self.labels.ndim != 1:
            raise InvalidInputError("labels must be a 1-d array")
        if self.features.shape[0] != self.labels.shape[0]:
            raise InvalidInputError(
                f"row count mismatch: {self.features.shape[0]} feature rows, "
                f"{self.labels.shape[0]} labels"
            )
        if self.features.shape[0] == 0:
            raise InvalidInputError("dataset must contain at least one sample")
        if not np.all(np.isfinite(self.features)):
            raise InvalidInputError("features contain non-finite entries")
        if not np.all(np.isfinite(self.labels)):
            raise InvalidInputError("labels contain non-finite entries")

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]


@dataclass
class ProblemSpec:
    """A dataset bound to a loss family and regularizer weight L_h > 0."""

    family: Family
    data: Dataset
    reg_strength: float

    def __post_init__(self):
        self.family = Family(self.family)
        self.reg_strength = float(self.reg_strength)
        if not np.isfinite(self.reg_strength) or self.reg_strength <= 0.0:
            raise InvalidInputError("reg_strength must be a positive finite number")
        if self.family in CLASSIFICATION_FAMILIES:
            if not np.all(np.abs(self.data.labels) == 1.0):
                raise InvalidInputError(
                    f"{self.family.value} labels must be exactly +1 or -1"
                )

    @property
    def n(self):
        return self.data.n

    @property
    def d(self):
        return self.data.d

    # The regularizer is (L_h/2)||x||^2, so its strong convexity parameter
    # equals its weight.  Kept as a named property because the two play
    # different roles in the rate formulas.
    @property
    def convexity(self):
        return self.reg_strength


@dataclass
class SmoothnessProfile:
    """Per-sample Lipschitz constants plus the regularizer's constants.

    Fields
    ------
    per_sample : (n,) array, L_i >= 0.  Zero entries are legal (an all-zero
        feature row has a constant loss) but are flagged via
        ``degenerate_rows`` so samplers weighting by L_i can reject them.
    deterministic_term : L_h > 0, smoothness of the regularizer.
    convexity : strong convexity parameter.  Equals L_h for the built-in
        families; kept separate so hand-built profiles can explore the
        full admissible range 0 < convexity <= mean_sample + L_h.
    mean_sample : (1/n) sum_i L_i, derived.
    """

    per_sample: np.ndarray
    deterministic_term: float
    convexity: float
    mean_sample: float = field(init=False)

    def __post_init__(self):
        self.per_sample = np.ascontiguousarray(self.per_sample, dtype=np.float64)
        self.deterministic_term = float(self.deterministic_term)
        self.convexity = float(self.convexity)
        if self.per_sample.ndim != 1 or self.per_sample.size == 0:
            raise InvalidInputError("per_sample must be a non-empty 1-d array")
        if not np.all(np.isfinite(self.per_sample)) or np.any(self.per_sample < 0.0):
            raise InvalidInputError("per-sample constants must be finite and >= 0")
        if not np.isfinite(self.deterministic_term) or self.deterministic_term <= 0.0:
            raise InvalidInputError("deterministic_term must be positive and finite")
        self.mean_sample = float(np.mean(self.per_sample))
        if not np.isfinite(self.convexity) or self.convexity <= 0.0:
            raise InvalidInputError("convexity must be positive and finite")
        # Strong convexity can never exceed the total smoothness budget.
        # Allow a hair of rounding slack for profiles built right at the edge.
        total = self.mean_sample + self.deterministic_term
        if self.convexity > total * (1.0 + 1e-12):
            raise InvalidInputError(
                f"convexity {self.convexity} exceeds mean_sample + deterministic_term"
                f" = {total}"
            )

    @property
    def n(self):
        return self.per_sample.size

    @property
    def degenerate_rows(self):
        """Indices with L_i == 0 (constant per-sample losses)."""
        return np.flatnonzero(self.per_sample == 0.0)


def _check_point(p, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (p.d,):
        raise InvalidInputError(f"point has shape {x.shape}, expected ({p.d},)")
    return x


def grad_scalars(family, margins, labels):
    """Per-sample scalars c with grad f_i(x) = c_i * a_i, given margins a_i.x.

    Vectorized and overflow-safe: the logistic factor sigmoid(-b*z) is
    evaluated through exp(-|b*z|) only, so no intermediate overflows even
    for margins in the hundreds.
    """
    if family is Family.RIDGE:
        return margins - labels
    if family is Family.LOGISTIC:
        m = labels * margins
        e = np.exp(-np.abs(m))
        sig = np.where(m >= 0.0, e / (1.0 + e), 1.0 / (1.0 + e))
        return -labels * sig
    if family is Family.HINGE_SQ:
        slack = np.maximum(0.0, 1.0 - labels * margins)
        return -labels * slack
    raise InvalidInputError(f"unknown family {family!r}")


def _loss_values(family, margins, labels):
    if family is Family.RIDGE:
        r = margins - labels
        return 0.5 * r * r
    if family is Family.LOGISTIC:
        # log(1 + exp(-m)) via logaddexp(0, -m): log1p on the small branch,
        # -m + log1p(exp(m)) on the large one.  Never overflows.
        return np.logaddexp(0.0, -(labels * margins))
    if family is Family.HINGE_SQ:
        slack = np.maximum(0.0, 1.0 - labels * margins)
        return 0.5 * slack * slack
    raise InvalidInputError(f"unknown family {family!r}")


def eval_objective(p, x):
    """psi(x) = mean of the per-sample losses + (L_h/2)||x||^2."""
    x = _check_point(p, x)
    z = p.data.features @ x
    data_term = float(np.mean(_loss_values(p.family, z, p.data.labels)))
    return data_term + 0.5 * p.reg_strength * float(x @ x)


def grad_component(p, i, x):
    """Gradient of the single (zero-based) sample loss f_i at x."""
    if not 0 <= i < p.n:
        raise IndexError(f"sample index {i} out of range for n={p.n}")
    x = _check_point(p, x)
    rows = p.data.features[i : i + 1]
    c = grad_scalars(p.family, rows @ x, p.data.labels[i : i + 1])
    return c[0] * rows[0]


def grad_full(p, x):
    """Exact gradient of psi: (1/n) A^T c(x) + L_h x."""
    x = _check_point(p, x)
    A = p.data.features
    c = grad_scalars(p.family, A @ x, p.data.labels)
    return (A.T @ c) / p.n + p.reg_strength * x


def component_grad_sq_norms(p, x):
    """||grad f_i(x)||^2 for every sample, as an (n,) array.

    Uses ||c_i a_i||^2 = c_i^2 ||a_i||^2; one pass over the data.
    """
    x = _check_point(p, x)
    A = p.data.features
    c = grad_scalars(p.family, A @ x, p.data.labels)
    row_sq = np.einsum("ij,ij->i", A, A)
    return c * c * row_sq


def smoothness_profile(p):
    """Per-sample and regularizer smoothness constants for a problem.

    ridge/hinge_sq rows give L_i = ||a_i||^2, logistic L_i = ||a_i||^2 / 4.
    The strong convexity parameter is the regularizer weight.
    """
    A = p.data.features
    row_sq = np.einsum("ij,ij->i", A, A)
    if p.family is Family.LOGISTIC:
        per_sample = row_sq / 4.0
    else:
        per_sample = row_sq
    return SmoothnessProfile(
        per_sample=per_sample,
        deterministic_term=p.reg_strength,
        convexity=p.reg_strength,
    )
