"""Step sizes, contraction rates, and error radii for the SGD scheme.

Notation: L_i are per-sample gradient Lipschitz constants, L_F their
mean, L_h the regularizer smoothness, lam the strong convexity
parameter, p the sampling distribution, B the batch size, w_i = 1/(n p_i).

Core quantities, all plain closed forms:

    growth_factor      s = (2 / (B lam^2 n)) sum_i L_i^2 / (n p_i)
    noise_at_minimizer v = (1 / (B n)) sum_i (1 / (n p_i)) ||grad f_i(x*)||^2
    tuned_step_size    eta = 2 / ((s + 1)(lam + L_F + L_h))   [the largest
                       admissible step; smaller steps are admissible too]
    contraction_rate   q(eta) = 2 eta lam (L_F + L_h) / (lam + L_F + L_h)
    region_radius      R(eta) = 2 eta^2 v / q(eta)

With eta at the tuned value these specialize to

    q = 4 lam (L_F + L_h) / ((s + 1)(lam + L_F + L_h)^2)
    R = 2 v / (lam (s + 1)(L_F + L_h))

and the expected squared error after K steps obeys

    E ||x_{K+1} - x*||^2 <= (1 - q)^K ||x_1 - x*||^2 + R.

For comparison the module also evaluates the classic single-draw
prescription (uniform p, B = 1)

    eta_c = 1 / (2 (max_i L_i + L_h)),   q_c = lam * eta_c,

and full-gradient descent with step 2/(lam + L_F + L_h), whose error
contracts by (L_F + L_h - lam)/(L_F + L_h + lam) per iteration.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InadmissibleStepError, InvalidInputError, NotApplicableError
from .problem import component_grad_sq_norms, smoothness_profile


def _total_smoothness(lam, mean_sample, det_term):
    # Shared so that the admissibility check in contraction_rate sees the
    # exact same float as tuned_step_size's denominator.
    return lam + mean_sample + det_term


def _growth_factor_raw(per_sample, lam, probs, batch_size):
    n = per_sample.size
    base = (2.0 / (lam * lam * n)) * float(np.sum(per_sample**2 / (n * probs)))
    return base / batch_size


def growth_factor(profile, scheme):
    """Relative second-moment growth factor of the weighted estimator.

    Halves exactly when B doubles (B divides last).
    """
    if scheme.n != profile.n:
        raise InvalidInputError(
            f"scheme covers {scheme.n} samples but profile has {profile.n}"
        )
    return _growth_factor_raw(
        profile.per_sample, profile.convexity, scheme.probs, scheme.batch_size
    )


def noise_at_minimizer(p, x_star, scheme):
    """Weighted second moment of the per-sample gradients at the minimizer.

    Zero exactly when every grad f_i(x*) vanishes (interpolation).  The
    caller is responsible for x_star actually being the reference
    minimizer; the formula itself is evaluated at whatever point is given.
    """
    if scheme.n != p.n:
        raise InvalidInputError(
            f"scheme covers {scheme.n} samples but problem has {p.n}"
        )
    sq = component_grad_sq_norms(p, x_star)
    base = float(np.sum(sq / (p.n * scheme.probs))) / p.n
    return base / scheme.batch_size


def tuned_step_size(profile, growth):
    """Largest admissible constant step, 2 / ((s+1)(lam + L_F + L_h))."""
    if not math.isfinite(growth) or growth < 0.0:
        raise InvalidInputError("growth factor must be finite and >= 0")
    total = _total_smoothness(
        profile.convexity, profile.mean_sample, profile.deterministic_term
    )
    return 2.0 / ((growth + 1.0) * total)


def contraction_rate(eta, profile, growth):
    """Per-iteration contraction q(eta) = 2 eta lam (L_F+L_h) / (lam+L_F+L_h).

    Raises if eta is outside (0, tuned_step_size]; the tuned step itself
    passes the check exactly.  q is linear in eta, so halving the step
    halves the rate bit for bit.  q < 1 is guaranteed whenever growth > 0
    or lam < L_F + L_h; at the doubly degenerate boundary q reaches 1,
    which corresponds to exact one-step convergence.
    """
    limit = tuned_step_size(profile, growth)
    if not math.isfinite(eta) or eta <= 0.0 or eta > limit:
        raise InadmissibleStepError(
            f"step size {eta!r} outside admissible range (0, {limit!r}]"
        )
    lam = profile.convexity
    smooth = profile.mean_sample + profile.deterministic_term
    return 2.0 * eta * lam * smooth / (lam + smooth)


def region_radius(eta, noise, rate):
    """Limiting squared-error radius R = 2 eta^2 v / q."""
    if not math.isfinite(eta) or eta <= 0.0:
        raise InvalidInputError("eta must be positive and finite")
    if not math.isfinite(noise) or noise < 0.0:
        raise InvalidInputError("noise must be finite and >= 0")
    if not (0.0 < rate <= 1.0):
        raise InvalidInputError("rate must lie in (0, 1]")
    return 2.0 * eta * eta * noise / rate


def classic_step_size(profile):
    """Single-draw uniform-sampling prescription 1 / (2 (max_i L_i + L_h))."""
    top = float(np.max(profile.per_sample)) + profile.deterministic_term
    return 1.0 / (2.0 * top)


def classic_rate(profile):
    """Contraction lam / (2 (max_i L_i + L_h)) paired with classic_step_size."""
    top = float(np.max(profile.per_sample)) + profile.deterministic_term
    return profile.convexity / (2.0 * top)


def gd_step_size(profile):
    """Full-gradient step 2 / (lam + L_F + L_h)."""
    return 2.0 / _total_smoothness(
        profile.convexity, profile.mean_sample, profile.deterministic_term
    )


def gd_contraction_factor(profile):
    """Per-iteration error contraction (L_F + L_h - lam)/(L_F + L_h + lam)."""
    smooth = profile.mean_sample + profile.deterministic_term
    return (smooth - profile.convexity) / (smooth + profile.convexity)


def _require_single_uniform(scheme):
    if scheme.batch_size != 1:
        raise NotApplicableError(
            f"defined only for batch_size 1, got {scheme.batch_size}"
        )
    if not scheme.is_uniform():
        raise NotApplicableError("defined only for uniform sampling")


def tuned_beats_classic(profile, scheme):
    """Whether the tuned rate provably dominates the classic one.

    True iff (2/n) sum_i L_i^2 <= lam^2 (equivalently, growth factor <= 1
    for single uniform draws).  Only defined for batch_size 1 with uniform
    sampling; anything else raises NotApplicableError.
    """
    if scheme.n != profile.n:
        raise InvalidInputError(
            f"scheme covers {scheme.n} samples but profile has {profile.n}"
        )
    _require_single_uniform(scheme)
    lam = profile.convexity
    lhs = (2.0 / profile.n) * float(np.sum(profile.per_sample**2))
    return bool(lhs <= lam * lam)


def expected_error_bound(iterations, rate, radius, init_err_sq):
    """(1 - q)^K * ||x_1 - x*||^2 + R, stably via exp(K log1p(-q)).

    ``iterations`` may be a scalar or an integer array of exponents.
    """
    if not (0.0 < rate <= 1.0):
        raise InvalidInputError("rate must lie in (0, 1]")
    if radius < 0.0 or init_err_sq < 0.0:
        raise InvalidInputError("radius and init_err_sq must be >= 0")
    k = np.asarray(iterations, dtype=np.float64)
    if np.any(k < 0):
        raise InvalidInputError("iteration counts must be >= 0")
    if rate < 1.0:
        out = np.exp(k * math.log1p(-rate)) * init_err_sq + radius
    else:
        # (1 - q)^K degenerates to the indicator of K == 0.
        out = np.where(k == 0, float(init_err_sq), 0.0) + radius
    if out.ndim == 0:
        return float(out)
    return out


@dataclass
class ShiftComparison:
    """Trading smoothness between the samples and the regularizer.

    ``rate_shift_components`` is the tuned rate with every L_i lowered by
    c; ``rate_shift_regularizer`` lowers L_h by c instead (strong
    convexity held fixed).  The first is strictly larger whenever
    0 < c < min(min_i L_i, L_h).  The classic rates are equal up to
    rounding under the same shifts.
    """

    rate_shift_components: float
    rate_shift_regularizer: float
    strict: bool
    classic_shift_components: float
    classic_shift_regularizer: float
    classic_equal: bool


def rate_shift_check(profile, scheme, c):
    """Compare lowering every per-sample constant by c vs lowering L_h by c."""
    if scheme.n != profile.n:
        raise InvalidInputError(
            f"scheme covers {scheme.n} samples but profile has {profile.n}"
        )
    c = float(c)
    lo = min(float(np.min(profile.per_sample)), profile.deterministic_term)
    if not 0.0 < c < lo:
        raise InvalidInputError(
            f"shift must satisfy 0 < c < min(min L_i, L_h) = {lo!r}, got {c!r}"
        )

    lam = profile.convexity
    probs, B = scheme.probs, scheme.batch_size

    def q_tuned(per_sample, det_term):
        s = _growth_factor_raw(per_sample, lam, probs, B)
        smooth = float(np.mean(per_sample)) + det_term
        return 4.0 * lam * smooth / ((s + 1.0) * (lam + smooth) ** 2)

    def q_classic(per_sample, det_term):
        return lam / (2.0 * (float(np.max(per_sample)) + det_term))

    shifted = profile.per_sample - c
    det = profile.deterministic_term
    lhs = q_tuned(shifted, det)
    rhs = q_tuned(profile.per_sample, det - c)
    cl = q_classic(shifted, det)
    cr = q_classic(profile.per_sample, det - c)
    return ShiftComparison(
        rate_shift_components=lhs,
        rate_shift_regularizer=rhs,
        strict=bool(lhs > rhs),
        classic_shift_components=cl,
        classic_shift_regularizer=cr,
        classic_equal=bool(abs(cl - cr) <= 1e-15 * max(abs(cl), abs(cr))),
    )


@dataclass
class TheoryReport:
    """All derived constants for one (problem, scheme) pair.

    ``tuned_beats_classic`` records the single-uniform-draw dominance
    predicate (2/n) sum L_i^2 <= lam^2 evaluated on the profile; it
    certifies rate dominance only for batch_size-1 uniform schemes.
    ``ref_tolerance`` is the gradient tolerance of the reference solve
    whose minimizer fed ``noise_at_min``.
    """

    growth_factor: float
    noise_at_min: float
    step_tuned: float
    rate_tuned: float
    radius_tuned: float
    step_classic: float
    rate_classic: float
    step_gd: float
    rate_factor_gd: float
    tuned_beats_classic: bool
    ref_tolerance: float | None = None

    CSV_COLUMNS = (
        "growth_factor",
        "noise_at_min",
        "step_tuned",
        "rate_tuned",
        "radius_tuned",
        "step_classic",
        "rate_classic",
        "step_gd",
        "rate_factor_gd",
        "tuned_beats_classic",
    )

    def to_text(self):
        lines = [f"{name} {_fmt(getattr(self, name))}" for name in self.CSV_COLUMNS]
        if self.ref_tolerance is not None:
            lines.append(f"ref_tolerance {_fmt(self.ref_tolerance)}")
        return "\n".join(lines) + "\n"

    def to_csv(self):
        header = ",".join(self.CSV_COLUMNS)
        row = ",".join(_fmt(getattr(self, name)) for name in self.CSV_COLUMNS)
        return header + "\n" + row + "\n"


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(float(v))


def build_report(p, scheme, x_star, ref_tolerance=None, profile=None):
    """Evaluate every constant for a problem, scheme, and reference point."""
    if profile is None:
        profile = smoothness_profile(p)
    s = growth_factor(profile, scheme)
    v = noise_at_minimizer(p, x_star, scheme)
    eta = tuned_step_size(profile, s)
    q = contraction_rate(eta, profile, s)
    lam = profile.convexity
    lhs = (2.0 / profile.n) * float(np.sum(profile.per_sample**2))
    return TheoryReport(
        growth_factor=s,
        noise_at_min=v,
        step_tuned=eta,
        rate_tuned=q,
        radius_tuned=region_radius(eta, v, q),
        step_classic=classic_step_size(profile),
        rate_classic=classic_rate(profile),
        step_gd=gd_step_size(profile),
        rate_factor_gd=gd_contraction_factor(profile),
        tuned_beats_classic=bool(lhs <= lam * lam),
        ref_tolerance=ref_tolerance,
    )
