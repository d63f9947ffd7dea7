import numpy as np
import pytest

from unrollreg import (
    ConvergenceFailure,
    DivergenceError,
    SparseOperator,
    additive_learned_combination,
    convex_combination,
    dense_pseudo_inverse,
    landweber,
    operator_norm_sq,
    tikhonov_solve,
)


def rng(seed=0):
    return np.random.Generator(np.random.PCG64(seed))


def svd_least_squares(a, y):
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    return vt.T @ ((u.T @ y) / s)


@pytest.fixture(scope="module")
def tall_system():
    a = rng(42).standard_normal((12, 8))
    op = SparseOperator.from_dense(a)
    y = rng(43).standard_normal(12)
    return a, op, y


class TestLandweber:
    def test_zero_data_zero_start(self, small_op):
        x = landweber(small_op, np.zeros(small_op.rows), np.zeros(small_op.cols), 25, 1e-3)
        assert np.all(x == 0.0)

    def test_identity_operator_closed_form(self):
        # T = I, tau = 1/2: x_k = (1 - 0.5^k) y
        op = SparseOperator.from_dense(np.eye(2))
        y = np.array([1.0, 2.0])
        x1 = landweber(op, y, np.zeros(2), 1, 0.5)
        assert np.allclose(x1, [0.5, 1.0], atol=1e-15)
        for k in (2, 5, 10):
            xk = landweber(op, y, np.zeros(2), k, 0.5)
            assert np.allclose(xk, (1.0 - 0.5**k) * y, atol=1e-12)

    def test_converges_to_least_squares(self, tall_system):
        a, op, y = tall_system
        tau = 1.0 / operator_norm_sq(op, 500, seed=0)
        ref = svd_least_squares(a, y)
        x = landweber(op, y, np.zeros(8), 20000, tau)
        assert np.linalg.norm(x - ref) <= 1e-9 * np.linalg.norm(ref)

    def test_masked_rows_do_not_contribute(self, tall_system):
        a, op, y = tall_system
        mask = np.ones(12, dtype=bool)
        mask[3] = False
        poisoned = y.copy()
        poisoned[3] = 1e9
        tau = 0.5 / operator_norm_sq(op, 300, seed=0)
        x_clean = landweber(op, y, np.zeros(8), 50, tau, fit_mask=mask)
        x_poisoned = landweber(op, poisoned, np.zeros(8), 50, tau, fit_mask=mask)
        assert np.array_equal(x_clean, x_poisoned)

    def test_divergence_names_step(self, tall_system):
        _, op, y = tall_system
        with pytest.raises(DivergenceError) as err:
            landweber(op, y, np.zeros(8), 10000, 1e6)
        assert err.value.step >= 1

    def test_residual_monotone_on_consistent_data(self, small_op):
        # noiseless consistent data and tau < 2/||T||^2: residual never increases
        x_true = rng(3).random(small_op.cols)
        y = small_op.apply(x_true)
        tau = 1.9 / operator_norm_sq(small_op, 300, seed=1)
        x = np.zeros(small_op.cols)
        prev = np.linalg.norm(y)
        for _ in range(100):
            x = landweber(small_op, y, x, 100, tau)
            cur = np.linalg.norm(small_op.apply(x) - y)
            assert cur <= prev * (1.0 + 1e-12)
            prev = cur

    def test_semi_convergence_witness(self):
        # ill-conditioned system with noise: error dips, then climbs
        g = rng(8)
        u, _ = np.linalg.qr(g.standard_normal((12, 12)))
        v, _ = np.linalg.qr(g.standard_normal((6, 6)))
        sigma = np.array([1.0, 0.5, 0.25, 0.1, 0.05, 0.02])
        a = u[:, :6] @ np.diag(sigma) @ v.T
        op = SparseOperator.from_dense(a)
        x_true = v @ g.standard_normal(6)
        y = a @ x_true + 0.05 * g.standard_normal(12)
        errors = []
        x = np.zeros(6)
        for _ in range(250):
            x = landweber(op, y, x, 40, 1.0)
            errors.append(np.linalg.norm(x - x_true))
        best = int(np.argmin(errors))
        assert 0 < best < len(errors) - 1
        assert errors[0] > errors[best]
        assert errors[-1] > errors[best]

    def test_dim_mismatch(self, small_op):
        with pytest.raises(ValueError):
            landweber(small_op, np.zeros(3), np.zeros(small_op.cols), 1, 1e-3)


class TestTikhonov:
    def test_huge_alpha_shrinks_to_zero(self, tall_system):
        a, op, y = tall_system
        alpha = 1e8 * operator_norm_sq(op, 300, seed=0)
        x = tikhonov_solve(op, y, alpha)
        assert np.linalg.norm(x) <= np.linalg.norm(a.T @ y) / alpha

    def test_diagonal_hand_solve(self):
        # (T'T + I)^-1 T'y for T = diag(2,1), y = (2,1): x = (4/5, 1/2)
        op = SparseOperator.from_dense(np.diag([2.0, 1.0]))
        x = tikhonov_solve(op, np.array([2.0, 1.0]), 1.0)
        assert np.allclose(x, [0.8, 0.5], atol=1e-10)

    def test_alpha_zero_identity(self):
        op = SparseOperator.from_dense(np.eye(6))
        y = rng(2).standard_normal(6)
        assert np.allclose(tikhonov_solve(op, y, 0.0), y, atol=1e-10)

    def test_limit_to_pseudo_inverse(self, tall_system):
        a, op, y = tall_system
        x_dag = dense_pseudo_inverse(op).apply(y)
        errors = [np.linalg.norm(tikhonov_solve(op, y, al) - x_dag) for al in (1e-2, 1e-4, 1e-6)]
        assert errors[0] > errors[1] > errors[2]
        assert errors[-1] < 1e-4

    def test_cap_failure_carries_residual(self):
        # normal equations of a Hilbert matrix: CG stalls above the tolerance
        from scipy.linalg import hilbert

        op = SparseOperator.from_dense(hilbert(12))
        y = rng(5).standard_normal(12)
        with pytest.raises(ConvergenceFailure) as err:
            tikhonov_solve(op, y, 0.0, rtol=1e-10)
        assert err.value.residual > 1e-10

    def test_negative_alpha(self, tall_system):
        _, op, y = tall_system
        with pytest.raises(ValueError):
            tikhonov_solve(op, y, -1.0)

    def test_zero_rhs(self, tall_system):
        _, op, _ = tall_system
        assert np.all(tikhonov_solve(op, np.zeros(12), 1e-3) == 0.0)


class TestAdditivePseudoInverseForm:
    def test_desk_scale_demonstration(self, small_op):
        # the raw additive family "pseudo-inverse plus weighted learned term",
        # exercised at desk scale only: as the weight vanishes it falls back
        # to the minimum-norm least-squares solution
        from unrollreg import DenoiserSpec, apply_denoiser

        pinv = dense_pseudo_inverse(small_op)
        y = rng(9).standard_normal(small_op.rows)
        x_dag = pinv.apply(y)
        learned = apply_denoiser(
            DenoiserSpec.gaussian(1.0), x_dag.reshape(small_op.geometry.image_shape)
        ).reshape(-1)
        gaps = []
        for alpha in (1.0, 1e-2, 1e-4):
            x_alpha = additive_learned_combination(x_dag, learned, alpha)
            gap = np.linalg.norm(x_alpha - x_dag)
            assert gap == pytest.approx(alpha * np.linalg.norm(learned), rel=1e-12)
            gaps.append(gap)
        assert gaps[0] > gaps[1] > gaps[2]


class TestCombinations:
    def test_additive_beta_zero(self):
        c = rng(1).standard_normal(10)
        learned = rng(2).standard_normal(10)
        assert np.array_equal(additive_learned_combination(c, learned, 0.0), c)

    def test_additive_beta_inf_returns_learned(self):
        c = rng(1).standard_normal(10)
        learned = rng(2).standard_normal(10)
        assert np.array_equal(additive_learned_combination(c, learned, np.inf), learned)

    def test_additive_homogeneous_in_beta(self):
        c = np.zeros(16)
        learned = rng(3).standard_normal(16)
        full = additive_learned_combination(c, learned, 0.8)
        half = additive_learned_combination(c, learned, 0.4)
        assert np.linalg.norm(half) == pytest.approx(0.5 * np.linalg.norm(full), rel=1e-14)

    def test_additive_negative_beta(self):
        with pytest.raises(ValueError):
            additive_learned_combination(np.zeros(3), np.zeros(3), -0.1)

    def test_convex_endpoints(self):
        c = rng(4).standard_normal(12)
        learned = rng(5).standard_normal(12)
        assert np.array_equal(convex_combination(c, learned, 0.0), c)
        assert np.array_equal(convex_combination(c, learned, 1.0), learned)

    def test_convex_midpoint(self):
        learned = np.zeros(8)
        learned[5] = 2.0
        out = convex_combination(np.zeros(8), learned, 0.5)
        expected = np.zeros(8)
        expected[5] = 1.0
        assert np.array_equal(out, expected)

    def test_convex_affine_in_beta(self):
        c = rng(6).standard_normal(20)
        learned = rng(7).standard_normal(20)
        r0 = convex_combination(c, learned, 0.0)
        r1 = convex_combination(c, learned, 1.0)
        for beta in (0.125, 0.33, 0.77):
            rb = convex_combination(c, learned, beta)
            assert np.max(np.abs(rb - r0 - beta * (r1 - r0))) <= 1e-12

    def test_convex_range_check(self):
        with pytest.raises(ValueError):
            convex_combination(np.zeros(3), np.zeros(3), 1.5)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            convex_combination(np.zeros(3), np.zeros(4), 0.5)
