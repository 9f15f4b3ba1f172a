import math

import numpy as np
import pytest

from covseg.synth import (
    GroundTruth,
    Scenario,
    extra_samples,
    gen_sigma_setting_i,
    gen_sigma_setting_ii,
    gen_sigma_setting_iii,
    make_scenario,
    pd_repair,
    place_changepoints,
    sample_gaussian,
)


class TestScenario:
    def test_default_kappa(self):
        assert Scenario("I", 200, 10, 1).kappa == pytest.approx(1.0 / 9.0)
        assert Scenario("I", 200, 10, 3).kappa == pytest.approx(1.0 / 11.0)

    def test_infeasible(self):
        with pytest.raises(ValueError):
            Scenario("I", 10, 2, 5, kappa=0.5)

    def test_bad_setting(self):
        with pytest.raises(ValueError):
            Scenario("IV", 100, 5, 0)


class TestPlaceChangepoints:
    def test_no_breaks(self):
        rng = np.random.default_rng(0)
        assert place_changepoints(100, 0, 0.1, rng) == ()

    def test_min_gap_m1(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            bps = place_changepoints(200, 1, 1.0 / 9.0, rng)
            assert len(bps) == 1
            edges = [1, bps[0], 201]
            gaps = np.diff(edges)
            assert gaps.min() >= 200.0 / 9.0  # >= 22.22, so integer gaps >= 23
            assert gaps.min() >= 23

    def test_min_gap_m3(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            bps = place_changepoints(200, 3, 1.0 / 11.0, rng)
            assert len(bps) == 3
            edges = [1, *bps, 201]
            assert np.diff(edges).min() >= 200.0 / 11.0

    def test_infeasible(self):
        rng = np.random.default_rng(3)
        with pytest.raises(ValueError):
            place_changepoints(10, 5, 0.5, rng)


class TestPdRepair:
    def test_already_pd(self):
        s = 2.0 * np.eye(3)
        np.testing.assert_array_equal(pd_repair(s), s)

    def test_zero_eigenvalue_case(self):
        out = pd_repair(np.diag([0.0, 1.0]))
        np.testing.assert_allclose(out, np.diag([0.015, 1.015]), atol=1e-14)

    def test_negative_eigenvalue_case(self):
        out = pd_repair(np.diag([-1.0, 1.0]))
        np.testing.assert_allclose(out, np.diag([0.015, 2.015]), atol=1e-14)

    def test_output_floor(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            a = rng.standard_normal((4, 4))
            s = 0.5 * (a + a.T)
            assert np.linalg.eigvalsh(pd_repair(s)).min() > 0.01 - 1e-12


class TestSettingI:
    def test_exact_zero_count(self):
        rng = np.random.default_rng(5)
        for p, expected in ((10, 36), (20, 152)):
            s = gen_sigma_setting_i(p, rng)
            low = s[np.tril_indices(p, -1)]
            n_low = p * (p - 1) // 2
            assert expected == math.ceil(0.8 * n_low)
            # repair adds a multiple of I, so off-diagonal zeros survive
            assert np.sum(low == 0.0) >= expected

    def test_pd(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            s = gen_sigma_setting_i(6, rng)
            assert np.linalg.eigvalsh(s).min() > 0.01 - 1e-12
            np.testing.assert_allclose(s, s.T)


class TestSettingII:
    def test_pd_and_symmetric(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            s = gen_sigma_setting_ii(8, rng)
            assert np.linalg.eigvalsh(s).min() > 0.01 - 1e-12
            np.testing.assert_allclose(s, s.T)

    def test_banded_decay_zeroes_far_lags(self):
        rng = np.random.default_rng(8)
        # with a = 0.3, lag-4 entries are at most 4 * 0.3^4 = 0.0324 < 0.05,
        # so they are thresholded to zero (possibly shifted on the diagonal)
        found_far_zero = False
        for _ in range(20):
            s = gen_sigma_setting_ii(10, rng)
            lag4 = np.diagonal(s, offset=4)
            if np.all(lag4 == 0.0):
                found_far_zero = True
        assert found_far_zero


class TestSettingIII:
    def test_eigenvalue_floor_structural(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            s = gen_sigma_setting_iii(7, rng)
            assert np.linalg.eigvalsh(s).min() >= 0.5 - 1e-10

    def test_low_rank_plus_diagonal(self):
        rng = np.random.default_rng(10)
        s = gen_sigma_setting_iii(12, rng)
        # subtracting the diagonal part leaves rank <= 6 (up to the psi part,
        # bounded by max factor count)
        np.testing.assert_allclose(s, s.T)


class TestSampling:
    def test_deterministic(self):
        scen = Scenario("I", 50, 4, 1, seed=42)
        t1, d1 = make_scenario(scen)
        t2, d2 = make_scenario(scen)
        assert np.array_equal(d1.data, d2.data)
        assert t1.breakpoints == t2.breakpoints
        assert all(np.array_equal(a, b) for a, b in zip(t1.sigmas, t2.sigmas))

    def test_path_piecewise_constant(self):
        truth, _ = make_scenario(Scenario("I", 60, 4, 2, seed=7))
        seg = truth.segmentation
        for (start, end), cov in zip(seg.block_bounds(), truth.sigmas):
            for t in range(start - 1, end):
                np.testing.assert_array_equal(truth.path[t], cov)

    def test_gaps_respect_kappa(self):
        scen = Scenario("II", 120, 5, 2, seed=9)
        truth, _ = make_scenario(scen)
        edges = [1, *truth.breakpoints, 121]
        assert np.diff(edges).min() >= scen.kappa * 120

    def test_sample_covariance_converges(self):
        # identity path, large T: entrywise within 5/sqrt(T)
        T, p = 10_000, 3
        path = np.broadcast_to(np.eye(p), (T, p, p)).copy()
        truth = GroundTruth(
            breakpoints=(), sigmas=(np.eye(p),), path=path, supports=(frozenset(),)
        )
        series = sample_gaussian(truth, np.random.default_rng(11))
        emp = series.data.T @ series.data / T
        assert np.max(np.abs(emp - np.eye(p))) <= 5.0 / np.sqrt(T)

    def test_non_pd_truth_errors(self):
        path = np.zeros((3, 2, 2))
        truth = GroundTruth(
            breakpoints=(), sigmas=(np.zeros((2, 2)),), path=path, supports=(frozenset(),)
        )
        with pytest.raises(np.linalg.LinAlgError):
            sample_gaussian(truth, np.random.default_rng(12))

    def test_extra_samples_independent_of_training(self):
        truth, data = make_scenario(Scenario("I", 30, 3, 0, seed=5))
        held = extra_samples(truth, 2, seed=5)
        assert len(held) == 2
        assert not np.array_equal(held[0].data, data.data)
        assert not np.array_equal(held[0].data, held[1].data)

    def test_supports_match_sigmas(self):
        truth, _ = make_scenario(Scenario("I", 40, 5, 1, seed=13))
        for sigma, supp in zip(truth.sigmas, truth.supports):
            off = ~np.eye(5, dtype=bool)
            expected = {
                (int(u), int(v)) for u, v in zip(*np.nonzero((sigma != 0.0) & off))
            }
            assert supp == expected
