import numpy as np
import pytest

from covseg.adaptive import uniform_weights
from covseg.admm import (
    admm_solve,
    build_psi,
    check_termination,
    dual_ascent,
    dual_objective_and_feasibility,
    group_shrink,
    initialize,
    primal_objective,
    soft_threshold,
    solve_theta_block,
    update_d,
    update_upsilon,
)
from covseg.core import ObservationSeries, PenaltySpec, WeightSet, offdiag, project_psd


def random_weights(T, p, rng):
    xi1 = rng.uniform(0.1, 2.0, size=(T, p, p))
    xi1 = 0.5 * (xi1 + xi1.transpose(0, 2, 1))
    xi1[:, np.arange(p), np.arange(p)] = 0.0
    return WeightSet(xi1=xi1, xi2=rng.uniform(0.1, 2.0, size=max(T - 1, 0)))


def dense_theta_system(psi, beta, T):
    """Dense re-assembly of the coordinate tridiagonal systems (oracle)."""
    p = psi.shape[1]
    theta = np.zeros_like(psi)
    for u in range(p):
        for v in range(u, p):
            if u == v:
                b, c = 2.0 * beta + 1.0 / T, 3.0 * beta + 1.0 / T
            else:
                b, c = 3.0 * beta + 1.0 / T, 4.0 * beta + 1.0 / T
            mat = np.diag(np.full(T, c))
            mat[0, 0] = b
            mat[-1, -1] = b
            for t in range(T - 1):
                mat[t, t + 1] = mat[t + 1, t] = -beta
            sol = np.linalg.solve(mat, psi[:, u, v])
            theta[:, u, v] = sol
            theta[:, v, u] = sol
    return theta


class TestInitialize:
    def test_single_time_rank_one(self):
        data = ObservationSeries(np.array([[1.0, 0.0]]))
        state = initialize(data, PenaltySpec(lambda1=0.0, lambda2=1.0, epsilon=0.01))
        np.testing.assert_allclose(state.theta[0], [[1.0, 0.0], [0.0, 0.0]])
        np.testing.assert_allclose(state.v[0], [[1.0, 0.0], [0.0, 0.01]], atol=1e-12)

    def test_duals_zero(self):
        rng = np.random.default_rng(0)
        data = ObservationSeries(rng.standard_normal((5, 3)))
        state = initialize(data, PenaltySpec(lambda1=0.1, lambda2=1.0))
        assert np.all(state.a == 0.0)
        assert np.all(state.y == 0.0)
        assert np.all(state.z == 0.0)

    def test_first_difference(self):
        x = np.array([[1.0, 0.0], [0.0, 2.0]])
        data = ObservationSeries(x)
        state = initialize(data, PenaltySpec(lambda1=0.0, lambda2=1.0))
        s = data.outer_products()
        np.testing.assert_allclose(state.d[0], s[1] - s[0])


class TestBuildPsi:
    def test_fresh_state_t1(self):
        data = ObservationSeries(np.array([[1.0, 2.0]]))
        state = initialize(data, PenaltySpec(lambda1=0.0, lambda2=1.0, epsilon=0.01))
        psi = build_psi(state, data, beta=1.0)
        s = data.outer_products()
        np.testing.assert_allclose(psi[0], s[0] + state.v[0] + state.upsilon[0])

    def test_matches_independent_formula(self):
        rng = np.random.default_rng(1)
        T, p, beta = 6, 3, 1.7
        data = ObservationSeries(rng.standard_normal((T, p)))
        state = initialize(data, PenaltySpec(lambda1=0.1, lambda2=1.0))
        state.a = rng.standard_normal((T, p, p))
        state.y = offdiag(rng.standard_normal((T, p, p)))
        state.z = rng.standard_normal((T - 1, p, p))
        state.d = rng.standard_normal((T - 1, p, p))
        psi = build_psi(state, data, beta)
        s = data.outer_products()
        for t in range(T):
            zc = state.z[t - 1] if t >= 1 else 0.0
            zn = state.z[t] if t < T - 1 else 0.0
            dc = state.d[t - 1] if t >= 1 else 0.0
            dn = state.d[t] if t < T - 1 else 0.0
            expected = (
                s[t] / T + state.a[t] + state.y[t] - zn + zc
                + beta * (state.v[t] + state.upsilon[t] - dn + dc)
            )
            np.testing.assert_allclose(psi[t], expected, atol=1e-14)


class TestThetaBlock:
    def test_hand_solved_diagonal_system(self):
        # diagonal coordinate, beta=1, T=2: system [[2.5,-1],[-1,2.5]],
        # rhs (1.5, 1.5) -> solution (1, 1)
        psi = np.full((2, 1, 1), 1.5)
        theta = solve_theta_block(psi, beta=1.0, T=2)
        np.testing.assert_allclose(theta[:, 0, 0], [1.0, 1.0], atol=1e-12)

    def test_matches_dense_solve(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            T = int(rng.integers(2, 30))
            p = int(rng.integers(1, 5))
            beta = float(rng.uniform(0.1, 10.0))
            psi = rng.standard_normal((T, p, p))
            psi = 0.5 * (psi + psi.transpose(0, 2, 1))
            fast = solve_theta_block(psi, beta, T)
            dense = dense_theta_system(psi, beta, T)
            scale = np.max(np.abs(dense)) + 1.0
            assert np.max(np.abs(fast - dense)) / scale <= 1e-10


class TestProxOperators:
    def test_soft_threshold_examples(self):
        assert soft_threshold(1.2, 0.5) == pytest.approx(0.7)
        assert soft_threshold(-0.3, 0.5) == 0.0
        assert soft_threshold(-2.0, 0.5) == pytest.approx(-1.5)

    def test_soft_threshold_exact_zeros(self):
        x = np.array([0.4, -0.4, 0.5])
        out = soft_threshold(x, 0.5)
        assert out[0] == 0.0 and out[1] == 0.0 and out[2] == 0.0

    def test_group_shrink_examples(self):
        np.testing.assert_allclose(group_shrink(np.zeros((2, 2)), 1.0), np.zeros((2, 2)))
        out = group_shrink(2.0 * np.eye(2), 1.0)
        np.testing.assert_allclose(out, (1.0 - 1.0 / (2.0 * np.sqrt(2.0))) * 2.0 * np.eye(2))
        small = np.full((2, 2), 0.45)  # frobenius norm 0.9 < 1
        assert np.all(group_shrink(small, 1.0) == 0.0)

    def test_update_upsilon_single_entry(self):
        # T_{0.3}(1.0 - 0.2/2) = T_{0.3}(0.9) = 0.6
        theta = np.zeros((1, 2, 2))
        theta[0, 0, 1] = theta[0, 1, 0] = 1.0
        y = np.zeros((1, 2, 2))
        y[0, 0, 1] = y[0, 1, 0] = 0.2
        xi1 = np.zeros((1, 2, 2))
        xi1[0, 0, 1] = xi1[0, 1, 0] = 1.0
        w = WeightSet(xi1=xi1, xi2=np.ones(0))
        out = update_upsilon(theta, y, w, lambda1=0.6, beta=2.0)
        assert out[0, 0, 1] == pytest.approx(0.6)
        assert np.all(np.diag(out[0]) == 0.0)

    def test_update_upsilon_zero_lambda_passthrough(self):
        rng = np.random.default_rng(3)
        theta = rng.standard_normal((4, 3, 3))
        y = rng.standard_normal((4, 3, 3))
        w = uniform_weights(4, 3)
        out = update_upsilon(theta, y, w, lambda1=0.0, beta=2.0)
        np.testing.assert_allclose(out, offdiag(theta - y / 2.0), atol=1e-14)

    def test_update_d_matches_scalar_formula(self):
        rng = np.random.default_rng(4)
        T, p = 6, 3
        theta = rng.standard_normal((T, p, p))
        z = rng.standard_normal((T - 1, p, p))
        w = random_weights(T, p, rng)
        out = update_d(theta, z, w, lambda2=0.7, beta=1.3)
        for i in range(T - 1):
            xi = theta[i + 1] - theta[i] - z[i] / 1.3
            np.testing.assert_allclose(
                out[i], group_shrink(xi, 0.7 * w.xi2[i] / 1.3), atol=1e-14
            )

    def test_update_d_constant_path(self):
        theta = np.ones((4, 2, 2))
        z = np.zeros((3, 2, 2))
        out = update_d(theta, z, uniform_weights(4, 2), lambda2=0.5, beta=1.0)
        assert np.all(out == 0.0)


class TestDualAscent:
    def test_fixed_point(self):
        rng = np.random.default_rng(5)
        data = ObservationSeries(rng.standard_normal((3, 2)))
        state = initialize(data, PenaltySpec(lambda1=0.0, lambda2=1.0))
        theta = state.theta
        a, y, z = dual_ascent(
            state, theta, theta, offdiag(theta), theta[1:] - theta[:-1], 1.0, 1.61
        )
        np.testing.assert_allclose(a, state.a, atol=1e-14)
        np.testing.assert_allclose(y, state.y, atol=1e-14)
        np.testing.assert_allclose(z, state.z, atol=1e-14)

    def test_known_step(self):
        rng = np.random.default_rng(6)
        data = ObservationSeries(rng.standard_normal((2, 2)))
        state = initialize(data, PenaltySpec(lambda1=0.0, lambda2=1.0))
        theta = state.theta
        v = theta - np.eye(2)  # residual theta - v = I
        a, _, _ = dual_ascent(
            state, theta, v, offdiag(theta), theta[1:] - theta[:-1], 1.0, 1.61
        )
        np.testing.assert_allclose(a, np.broadcast_to(-1.61 * np.eye(2), a.shape), atol=1e-12)

    def test_matches_formula(self):
        rng = np.random.default_rng(7)
        T, p = 5, 3
        data = ObservationSeries(rng.standard_normal((T, p)))
        state = initialize(data, PenaltySpec(lambda1=0.1, lambda2=1.0))
        state.a = rng.standard_normal((T, p, p))
        state.y = offdiag(rng.standard_normal((T, p, p)))
        state.z = rng.standard_normal((T - 1, p, p))
        theta = rng.standard_normal((T, p, p))
        v = rng.standard_normal((T, p, p))
        ups = offdiag(rng.standard_normal((T, p, p)))
        d = rng.standard_normal((T - 1, p, p))
        beta, gamma = 1.4, 1.2
        a, y, z = dual_ascent(state, theta, v, ups, d, beta, gamma)
        step = gamma * beta
        np.testing.assert_allclose(a, state.a - step * (theta - v), atol=1e-14)
        np.testing.assert_allclose(y, state.y - step * (offdiag(theta) - ups), atol=1e-14)
        np.testing.assert_allclose(
            z, state.z - step * (theta[1:] - theta[:-1] - d), atol=1e-14
        )


class TestObjectives:
    def test_perfect_fit_t1(self):
        data = ObservationSeries(np.array([[1.0, -1.0]]))
        theta = data.outer_products()
        w = uniform_weights(1, 2)
        assert primal_objective(theta, data, w, 0.0, 1.0) == pytest.approx(0.0)

    def test_zero_path(self):
        rng = np.random.default_rng(8)
        data = ObservationSeries(rng.standard_normal((4, 3)))
        s = data.outer_products()
        w = uniform_weights(4, 3)
        expected = np.sum(s**2) / (2.0 * 4)
        assert primal_objective(np.zeros_like(s), data, w, 0.3, 1.0) == pytest.approx(expected)

    def test_matches_term_by_term(self):
        rng = np.random.default_rng(9)
        T, p = 5, 3
        data = ObservationSeries(rng.standard_normal((T, p)))
        theta = rng.standard_normal((T, p, p))
        w = random_weights(T, p, rng)
        l1, l2 = 0.2, 0.7
        s = data.outer_products()
        expected = sum(np.sum((s[t] - theta[t]) ** 2) / (2.0 * T) for t in range(T))
        expected += l1 * sum(
            w.xi1[t, u, v] * abs(theta[t, u, v])
            for t in range(T)
            for u in range(p)
            for v in range(p)
            if u != v
        )
        expected += l2 * sum(
            w.xi2[t - 1] * np.linalg.norm(theta[t] - theta[t - 1]) for t in range(1, T)
        )
        assert primal_objective(theta, data, w, l1, l2) == pytest.approx(expected, rel=1e-12)

    def test_dual_zero_state(self):
        data = ObservationSeries(np.array([[1.0, 2.0], [0.5, -1.0]]))
        state = initialize(data, PenaltySpec(lambda1=0.0, lambda2=1.0))
        w = uniform_weights(2, 2)
        vd, dfeas = dual_objective_and_feasibility(state, data, w, 0.0, 1.0, 0.01)
        assert vd == pytest.approx(0.0)
        assert dfeas == pytest.approx(0.0)

    def test_weak_duality_after_solve(self):
        rng = np.random.default_rng(10)
        data = ObservationSeries(rng.standard_normal((8, 3)))
        w = uniform_weights(8, 3)
        res = admm_solve(data, PenaltySpec(lambda1=0.01, lambda2=0.1), w, tol=1e-4)
        assert res.report.dual_objective <= res.report.primal_objective + 1e-6 * (
            1.0 + abs(res.report.primal_objective)
        )


class TestTermination:
    def test_t1_fires(self):
        assert check_termination(5e-4, 8e-4, 1e-3) == "T1"

    def test_t2_on_stagnation(self):
        blocks = tuple(np.ones((2, 2, 2)) for _ in range(4))
        assert check_termination(1.0, 1.0, 1e-3, blocks, blocks) == "T2"

    def test_continue(self):
        prev = tuple(np.zeros((2, 2, 2)) for _ in range(4))
        curr = tuple(np.ones((2, 2, 2)) for _ in range(4))
        assert check_termination(2e-3, 0.0, 1e-3, prev, curr) == "continue"


class TestAdmmSolve:
    def test_decoupled_limit(self):
        rng = np.random.default_rng(11)
        data = ObservationSeries(rng.standard_normal((10, 4)))
        res = admm_solve(
            data, PenaltySpec(lambda1=0.0, lambda2=1e-8), uniform_weights(10, 4), tol=1e-5
        )
        ref = project_psd(data.outer_products(), 0.01)
        assert np.max(np.abs(res.theta - ref)) <= 1e-3

    def test_fusion_saturation(self):
        rng = np.random.default_rng(12)
        p = 3
        data = ObservationSeries(rng.standard_normal((12, p)))
        res = admm_solve(
            data, PenaltySpec(lambda1=0.01, lambda2=1e6 * p), uniform_weights(12, p)
        )
        assert np.all(res.d == 0.0)

    def test_v_iterates_feasible(self):
        rng = np.random.default_rng(13)
        data = ObservationSeries(rng.standard_normal((8, 3)))
        res = admm_solve(
            data, PenaltySpec(lambda1=0.05, lambda2=0.2), uniform_weights(8, 3), tol=1e-4
        )
        assert np.min(np.linalg.eigvalsh(res.v)) >= 0.01 - 1e-8

    def test_deterministic(self):
        rng = np.random.default_rng(14)
        data = ObservationSeries(rng.standard_normal((6, 2)))
        spec = PenaltySpec(lambda1=0.01, lambda2=0.1)
        w = uniform_weights(6, 2)
        r1 = admm_solve(data, spec, w, tol=1e-4)
        r2 = admm_solve(data, spec, w, tol=1e-4)
        assert np.array_equal(r1.theta, r2.theta)
        assert np.array_equal(r1.d, r2.d)
        assert np.array_equal(r1.upsilon, r2.upsilon)

    def test_t1_contract_on_report(self):
        rng = np.random.default_rng(15)
        data = ObservationSeries(rng.standard_normal((10, 3)))
        res = admm_solve(
            data, PenaltySpec(lambda1=0.001, lambda2=0.3), uniform_weights(10, 3), tol=1e-3
        )
        if res.report.terminated_by == "T1":
            assert max(res.report.final_gap, res.report.final_dfeas) <= 1e-3

    def test_exact_zero_bearing_blocks(self):
        rng = np.random.default_rng(16)
        p = 4
        data = ObservationSeries(rng.standard_normal((10, p)))
        res = admm_solve(
            data, PenaltySpec(lambda1=0.5, lambda2=2.0), uniform_weights(10, p), tol=1e-3
        )
        # strong penalties must produce at least one bit-exact zero
        assert np.any(res.upsilon == 0.0)
