import numpy as np
import pytest

from structsgd import (
    Dataset,
    Family,
    InvalidInputError,
    ProblemSpec,
    SmoothnessProfile,
    component_grad_sq_norms,
    eval_objective,
    grad_component,
    grad_full,
    smoothness_profile,
)
from structsgd.problem import grad_scalars

from _helpers import random_problem

ALL_FAMILIES = (Family.RIDGE, Family.LOGISTIC, Family.HINGE_SQ)


def _problem(family, A, b, lh):
    return Dataset(np.asarray(A, dtype=float), np.asarray(b, dtype=float)), family, lh


def make(family, A, b, lh):
    return ProblemSpec(
        family=family,
        data=Dataset(np.asarray(A, dtype=float), np.asarray(b, dtype=float)),
        reg_strength=lh,
    )


class TestObjectiveValues:
    # Expected values below were computed with 60-digit arithmetic on the
    # exact float64 inputs and rounded once to double precision.

    def test_logistic_hand_value(self):
        p = make(Family.LOGISTIC, [[1.0, -2.0], [0.5, 0.25], [-1.5, 0.75]],
                 [1.0, -1.0, 1.0], 0.75)
        got = eval_objective(p, np.array([0.2, -0.4]))
        assert got == pytest.approx(0.7562989395213513, rel=1e-15)

    def test_ridge_hand_value(self):
        p = make(Family.RIDGE, [[1.0, 2.0], [3.0, 4.0]], [1.0, -1.0], 0.5)
        got = eval_objective(p, np.array([0.3, -0.2]))
        assert got == pytest.approx(0.6375, rel=1e-15)

    def test_hinge_sq_hand_value(self):
        p = make(Family.HINGE_SQ, [[2.0, 0.0], [0.0, 3.0], [1.0, 1.0]],
                 [1.0, -1.0, -1.0], 1.25)
        got = eval_objective(p, np.array([0.5, -0.5]))
        assert got == pytest.approx(0.4791666666666667, rel=1e-15)

    def test_logistic_at_origin_is_log_two_plus_nothing(self):
        p = make(Family.LOGISTIC, [[1.0, 3.0], [2.0, -1.0]], [1.0, -1.0], 4.0)
        assert eval_objective(p, np.zeros(2)) == pytest.approx(np.log(2.0), rel=1e-15)

    def test_ridge_perfect_fit_leaves_only_regularizer(self):
        # b_i = a_i.x exactly, so the data term vanishes.
        x = np.array([2.0, -1.0])
        A = np.array([[1.0, 0.0], [0.0, 1.0], [3.0, 2.0]])
        p = make(Family.RIDGE, A, A @ x, 0.5)
        assert eval_objective(p, x) == 0.25 * float(x @ x)

    def test_hinge_inactive_when_margins_exceed_one(self):
        p = make(Family.HINGE_SQ, [[2.0, 0.0], [0.0, -3.0]], [1.0, 1.0], 2.0)
        x = np.array([1.0, -1.0])  # margins 2 and 3
        assert eval_objective(p, x) == 1.0 * float(x @ x)

    def test_logistic_huge_margins_stay_finite(self):
        p = make(Family.LOGISTIC, [[1e4, 0.0], [-1e4, 0.0]], [-1.0, -1.0], 1.0)
        x = np.array([1.0, 0.0])
        got = eval_objective(p, x)
        assert np.isfinite(got)
        # one sample contributes ~1e4, the other ~exp(-1e4) ~ 0
        assert got == pytest.approx(0.5e4 + 0.5, rel=1e-12)
        g = grad_full(p, x)
        assert np.all(np.isfinite(g))


class TestGradients:
    def test_logistic_gradient_at_origin(self):
        p = make(Family.LOGISTIC, [[1.0, 0.0]], [1.0], 1.0)
        g = grad_component(p, 0, np.zeros(2))
        assert g.tolist() == [-0.5, 0.0]
        assert grad_full(p, np.zeros(2)).tolist() == [-0.5, 0.0]

    def test_logistic_gradient_hand_value(self):
        p = make(Family.LOGISTIC, [[1.0, -2.0], [0.5, 0.25], [-1.5, 0.75]],
                 [1.0, -1.0, 1.0], 0.75)
        g = grad_full(p, np.array([0.2, -0.4]))
        np.testing.assert_allclose(
            g, [0.46651434598956604, -0.24045312897645213], rtol=1e-14
        )

    def test_ridge_gradient_exact(self):
        p = make(Family.RIDGE, [[1.0, 2.0]], [3.0], 1.0)
        assert grad_component(p, 0, np.array([1.0, 1.0])).tolist() == [0.0, 0.0]
        assert grad_component(p, 0, np.array([2.0, 1.0])).tolist() == [1.0, 2.0]

    def test_hinge_gradient_zero_when_well_classified(self):
        p = make(Family.HINGE_SQ, [[1.0, 0.0]], [1.0], 1.0)
        assert grad_component(p, 0, np.array([2.0, 5.0])).tolist() == [0.0, 0.0]
        # active side: slack = 1 - (-1) = 2, grad = -b * slack * a
        g = grad_component(p, 0, np.array([-1.0, 0.0]))
        assert g.tolist() == [-2.0, 0.0]

    @pytest.mark.parametrize("family", ALL_FAMILIES)
    def test_matches_central_differences(self, family):
        rng = np.random.default_rng(101)
        h = 1e-6
        for _ in range(10):
            p = random_problem(rng, family)
            x = rng.standard_normal(p.d)
            g = grad_full(p, x)
            fd = np.empty(p.d)
            for j in range(p.d):
                e = np.zeros(p.d)
                e[j] = h
                fd[j] = (eval_objective(p, x + e) - eval_objective(p, x - e)) / (2 * h)
            assert np.linalg.norm(fd - g) <= 1e-6 * (1.0 + np.linalg.norm(g))

    @pytest.mark.parametrize("family", ALL_FAMILIES)
    def test_full_gradient_is_mean_of_components_plus_ridge(self, family):
        rng = np.random.default_rng(5)
        for _ in range(5):
            p = random_problem(rng, family)
            x = rng.standard_normal(p.d)
            mean_part = np.mean(
                [grad_component(p, i, x) for i in range(p.n)], axis=0
            )
            total = mean_part + p.reg_strength * x
            np.testing.assert_allclose(total, grad_full(p, x), rtol=1e-12, atol=1e-12)

    @pytest.mark.parametrize("family", ALL_FAMILIES)
    def test_component_sq_norms_match_components(self, family):
        rng = np.random.default_rng(17)
        p = random_problem(rng, family)
        x = rng.standard_normal(p.d)
        sq = component_grad_sq_norms(p, x)
        direct = np.array(
            [float(np.sum(grad_component(p, i, x) ** 2)) for i in range(p.n)]
        )
        np.testing.assert_allclose(sq, direct, rtol=1e-12, atol=0)

    def test_component_index_out_of_range(self):
        p = make(Family.RIDGE, [[1.0, 2.0]], [3.0], 1.0)
        with pytest.raises(IndexError):
            grad_component(p, 1, np.zeros(2))
        with pytest.raises(IndexError):
            grad_component(p, -1, np.zeros(2))


class TestCurvatureInequalities:
    @pytest.mark.parametrize("family", ALL_FAMILIES)
    def test_per_sample_gradients_are_lipschitz(self, family):
        rng = np.random.default_rng(23)
        for _ in range(20):
            p = random_problem(rng, family)
            prof = smoothness_profile(p)
            x = rng.standard_normal(p.d)
            y = rng.standard_normal(p.d)
            cx = grad_scalars(family, p.data.features @ x, p.data.labels)
            cy = grad_scalars(family, p.data.features @ y, p.data.labels)
            row_norm = np.linalg.norm(p.data.features, axis=1)
            diff = np.abs(cx - cy) * row_norm
            lim = prof.per_sample * np.linalg.norm(x - y)
            assert np.all(diff <= lim * (1.0 + 1e-12) + 1e-12)

    @pytest.mark.parametrize("family", ALL_FAMILIES)
    def test_objective_curvature_bracket(self, family):
        # lam |y-x|^2 <= <grad(y) - grad(x), y - x> <= (L_F + L_h) |y-x|^2
        rng = np.random.default_rng(31)
        for _ in range(20):
            p = random_problem(rng, family)
            prof = smoothness_profile(p)
            total = prof.mean_sample + prof.deterministic_term
            x = rng.standard_normal(p.d)
            y = rng.standard_normal(p.d)
            inner = float((grad_full(p, y) - grad_full(p, x)) @ (y - x))
            gap = float(np.sum((y - x) ** 2))
            assert inner >= p.convexity * gap * (1.0 - 1e-10)
            assert inner <= total * gap * (1.0 + 1e-10)

    @pytest.mark.parametrize("family", ALL_FAMILIES)
    def test_coercivity_inequality(self, family):
        # <gx - gy, x - y> >= (lam L/(lam+L)) |x-y|^2 + (1/(lam+L)) |gx-gy|^2
        # for the full objective with L = L_F + L_h.
        rng = np.random.default_rng(37)
        for _ in range(20):
            p = random_problem(rng, family)
            prof = smoothness_profile(p)
            lam = p.convexity
            L = prof.mean_sample + prof.deterministic_term
            x = rng.standard_normal(p.d)
            y = rng.standard_normal(p.d)
            gd = grad_full(p, x) - grad_full(p, y)
            lhs = float(gd @ (x - y))
            rhs = (lam * L / (lam + L)) * float(np.sum((x - y) ** 2)) \
                + float(gd @ gd) / (lam + L)
            assert lhs >= rhs - 1e-10 * (1.0 + abs(rhs))


class TestSmoothnessProfile:
    def test_per_sample_constants_by_family(self):
        A = [[2.0, 0.0], [1.0, 1.0]]
        ridge = smoothness_profile(make(Family.RIDGE, A, [0.0, 0.0], 3.0))
        assert ridge.per_sample.tolist() == [4.0, 2.0]
        assert ridge.deterministic_term == 3.0
        assert ridge.convexity == 3.0
        assert ridge.mean_sample == 3.0
        logi = smoothness_profile(make(Family.LOGISTIC, A, [1.0, -1.0], 3.0))
        assert logi.per_sample.tolist() == [1.0, 0.5]
        hinge = smoothness_profile(make(Family.HINGE_SQ, A, [1.0, -1.0], 3.0))
        assert hinge.per_sample.tolist() == [4.0, 2.0]

    def test_degenerate_rows_flagged(self):
        p = make(Family.RIDGE, [[0.0, 0.0], [1.0, 0.0]], [1.0, 2.0], 1.0)
        prof = smoothness_profile(p)
        assert prof.degenerate_rows.tolist() == [0]

    def test_mean_constant_concentrates_at_quarter_dimension(self):
        # logistic L_i = |a_i|^2/4 with standard normal rows: mean d/4,
        # variance d/8 per sample.
        from structsgd import SyntheticSpec, gen_synthetic

        d = 100
        ds = gen_synthetic(SyntheticSpec(n=10_000, d=d, family=Family.LOGISTIC, seed=3))
        p = ProblemSpec(family=Family.LOGISTIC, data=ds, reg_strength=1.0)
        prof = smoothness_profile(p)
        se = np.sqrt((d / 8.0) / ds.n)
        assert abs(prof.mean_sample - d / 4.0) <= 3.0 * se

    def test_convexity_cannot_exceed_total(self):
        with pytest.raises(InvalidInputError):
            SmoothnessProfile(
                per_sample=np.array([1.0, 1.0]),
                deterministic_term=1.0,
                convexity=2.5,
            )
        # right at the boundary is legal
        prof = SmoothnessProfile(
            per_sample=np.array([1.0, 1.0]),
            deterministic_term=1.0,
            convexity=2.0,
        )
        assert prof.convexity == 2.0

    def test_rejects_bad_fields(self):
        with pytest.raises(InvalidInputError):
            SmoothnessProfile(np.array([-1.0]), 1.0, 0.5)
        with pytest.raises(InvalidInputError):
            SmoothnessProfile(np.array([1.0]), 0.0, 0.5)
        with pytest.raises(InvalidInputError):
            SmoothnessProfile(np.array([1.0]), 1.0, 0.0)
        with pytest.raises(InvalidInputError):
            SmoothnessProfile(np.array([[1.0]]), 1.0, 0.5)


class TestValidation:
    def test_dataset_shape_checks(self):
        with pytest.raises(InvalidInputError):
            Dataset(np.zeros((2, 2, 2)), np.zeros(2))
        with pytest.raises(InvalidInputError):
            Dataset(np.zeros((2, 2)), np.zeros((2, 1)))
        with pytest.raises(InvalidInputError):
            Dataset(np.zeros((3, 2)), np.zeros(2))
        with pytest.raises(InvalidInputError):
            Dataset(np.zeros((0, 2)), np.zeros(0))

    def test_dataset_rejects_non_finite(self):
        A = np.array([[1.0, np.nan]])
        with pytest.raises(InvalidInputError):
            Dataset(A, np.array([1.0]))
        with pytest.raises(InvalidInputError):
            Dataset(np.array([[1.0, 2.0]]), np.array([np.inf]))

    def test_classification_labels_must_be_unit(self):
        A = np.array([[1.0, 2.0]])
        for family in (Family.LOGISTIC, Family.HINGE_SQ):
            with pytest.raises(InvalidInputError):
                ProblemSpec(family=family, data=Dataset(A, np.array([0.0])),
                            reg_strength=1.0)
        # ridge takes real labels
        ProblemSpec(family=Family.RIDGE, data=Dataset(A, np.array([0.3])),
                    reg_strength=1.0)

    def test_reg_strength_must_be_positive(self):
        A = np.array([[1.0, 2.0]])
        for bad in (0.0, -1.0, np.nan, np.inf):
            with pytest.raises(InvalidInputError):
                ProblemSpec(family=Family.RIDGE, data=Dataset(A, np.array([1.0])),
                            reg_strength=bad)

    def test_point_shape_checked(self):
        p = make(Family.RIDGE, [[1.0, 2.0]], [1.0], 1.0)
        with pytest.raises(InvalidInputError):
            eval_objective(p, np.zeros(3))
        with pytest.raises(InvalidInputError):
            grad_full(p, np.zeros((2, 1)))

    def test_family_from_name(self):
        assert Family.from_name("ridge") is Family.RIDGE
        assert Family.from_name("logistic") is Family.LOGISTIC
        assert Family.from_name("hinge_sq") is Family.HINGE_SQ
        with pytest.raises(InvalidInputError):
            Family.from_name("huber")
