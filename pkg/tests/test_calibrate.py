import math

import numpy as np
import pytest

from oracles import renyi_gaussian_quadrature
from srpp.calibrate import (
    CalibrationSpec,
    DivergenceReport,
    NoiseSpec,
    ave_srd_gaussian,
    calibrate_ave,
    calibrate_ave_pac,
    calibrate_joint,
    calibrate_joint_pac,
    divergence_report,
    group_envelope_baseline,
    joint_pac_condition,
    joint_srd_gaussian,
    privatize,
    renyi_gaussian_shift,
    srpp_to_spp,
    srpp_to_spp_grid,
)
from srpp.scenario import SliceProfile, sample_slice_profile
from srpp.sensitivity import SensitivityProfile


def sens_profile(per_slice, delta0, weights=None):
    m = len(per_slice)
    weights = np.full(m, 1.0 / m) if weights is None else np.asarray(weights)
    profile = SliceProfile(dim=1, directions=[[1.0]] * m, weights=weights)
    return SensitivityProfile(
        profile=profile,
        per_slice=np.asarray(per_slice, dtype=float),
        mode="dkw",
        rho=0.05,
        delta0=delta0,
    )


class TestCalibrationSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            CalibrationSpec(alpha=1.0, epsilon=1.0, mode="ave")
        with pytest.raises(ValueError):
            CalibrationSpec(alpha=2.0, epsilon=0.0, mode="ave")
        with pytest.raises(ValueError):
            CalibrationSpec(alpha=2.0, epsilon=1.0, mode="nope")
        with pytest.raises(ValueError):
            CalibrationSpec(alpha=2.0, epsilon=1.0, mode="ave_pac", gamma=1.5)


class TestRenyiGaussianShift:
    def test_zero_shift(self):
        for alpha in (1.5, 2.0, 16.0):
            assert renyi_gaussian_shift(0.0, 2.0, alpha) == 0.0

    def test_against_quadrature_spot_values(self):
        assert renyi_gaussian_shift(1.0, 1.0, 2.0) == pytest.approx(
            renyi_gaussian_quadrature(1.0, 1.0, 2.0), abs=1e-8
        )
        assert renyi_gaussian_shift(3.0, 4.0, 4.0) == pytest.approx(
            renyi_gaussian_quadrature(3.0, 2.0, 4.0), abs=1e-8
        )
        assert renyi_gaussian_shift(1.0, 1.0, 2.0) == pytest.approx(1.0, abs=1e-12)
        assert renyi_gaussian_shift(3.0, 4.0, 4.0) == pytest.approx(4.5, abs=1e-12)

    def test_zero_variance_signals_infinity(self):
        assert renyi_gaussian_shift(1.0, 0.0, 2.0) == math.inf
        assert renyi_gaussian_shift(0.0, 0.0, 2.0) == 0.0


class TestClosedFormCalibration:
    def test_ave_substitution(self):
        spec = CalibrationSpec(alpha=4.0, epsilon=2.0, mode="ave")
        assert calibrate_ave(1.0, spec).sigma2 == pytest.approx(1.0)

    def test_ave_zero_sensitivity(self):
        spec = CalibrationSpec(alpha=4.0, epsilon=2.0, mode="ave")
        assert calibrate_ave(0.0, spec).sigma2 == 0.0

    def test_joint_substitution(self):
        spec = CalibrationSpec(alpha=4.0, epsilon=2.0, mode="joint")
        assert calibrate_joint(4.0, spec).sigma2 == pytest.approx(4.0)

    def test_joint_at_least_ave(self):
        rng = np.random.default_rng(0)
        per = rng.uniform(0, 2, 8)
        weights = np.full(8, 1 / 8)
        mean_square = float(weights @ per**2)
        worst = float((per**2).max())
        ave = calibrate_ave(mean_square, CalibrationSpec(4.0, 2.0, "ave"))
        joint = calibrate_joint(worst, CalibrationSpec(4.0, 2.0, "joint"))
        assert joint.sigma2 >= ave.sigma2

    def test_ave_soundness_on_attaining_shifts(self):
        # point-mass conditionals attaining every per-slice bound: the
        # calibrated variance makes the average divergence exactly epsilon
        rng = np.random.default_rng(1)
        for _ in range(20):
            m = int(rng.integers(1, 12))
            shifts = rng.uniform(0, 3, m)
            weights = rng.dirichlet(np.ones(m))
            alpha = float(rng.uniform(1.1, 16))
            eps = float(rng.uniform(0.1, 8))
            mean_square = float(weights @ shifts**2)
            if mean_square == 0:
                continue
            noise = calibrate_ave(mean_square, CalibrationSpec(alpha, eps, "ave"))
            got = ave_srd_gaussian(shifts, weights, noise.sigma2, alpha)
            assert got == pytest.approx(eps, abs=1e-9)

    def test_joint_soundness_at_worst_shift(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            m = int(rng.integers(1, 12))
            weights = rng.dirichlet(np.ones(m))
            alpha = float(rng.uniform(1.1, 16))
            eps = float(rng.uniform(0.1, 8))
            worst = float(rng.uniform(0.1, 4))
            noise = calibrate_joint(worst, CalibrationSpec(alpha, eps, "joint"))
            shifts = np.full(m, math.sqrt(worst))
            got = joint_srd_gaussian(shifts, weights, noise.sigma2, alpha)
            assert got == pytest.approx(eps, abs=1e-9)

    def test_monotonicity_in_alpha_and_epsilon(self):
        s1 = calibrate_ave(1.0, CalibrationSpec(2.0, 1.0, "ave")).sigma2
        s2 = calibrate_ave(1.0, CalibrationSpec(4.0, 1.0, "ave")).sigma2
        s3 = calibrate_ave(1.0, CalibrationSpec(2.0, 2.0, "ave")).sigma2
        assert s2 > s1 > s3


class TestAvePac:
    def test_zero_estimates(self):
        sens = sens_profile([0.0, 0.0], delta0=1.0)
        gamma = 4.0 / math.e**2
        spec = CalibrationSpec(alpha=2.0, epsilon=1.0, mode="ave_pac", gamma=gamma)
        got = calibrate_ave_pac(sens, spec, 2)
        assert got.sigma2 == pytest.approx(math.sqrt(0.5), abs=1e-12)

    def test_large_m_limit(self):
        per = np.full(10**6, 0.7)
        sens = sens_profile(per, delta0=1.0)
        spec = CalibrationSpec(alpha=3.0, epsilon=2.0, mode="ave_pac", gamma=0.1)
        got = calibrate_ave_pac(sens, spec, 10**6)
        plain = calibrate_ave(0.49, CalibrationSpec(3.0, 2.0, "ave"))
        assert got.sigma2 == pytest.approx(plain.sigma2, rel=3e-3)
        assert got.sigma2 > plain.sigma2

    def test_smaller_gamma_strictly_larger(self):
        sens = sens_profile([0.5, 0.5], delta0=1.0)
        sig = [
            calibrate_ave_pac(
                sens, CalibrationSpec(2.0, 1.0, "ave_pac", gamma=g), 2
            ).sigma2
            for g in (0.2, 0.1, 0.05)
        ]
        assert sig[0] < sig[1] < sig[2]

    def test_requires_gamma(self):
        sens = sens_profile([0.5], delta0=1.0)
        spec = CalibrationSpec(alpha=2.0, epsilon=1.0, mode="ave_pac")
        with pytest.raises(ValueError, match="gamma"):
            calibrate_ave_pac(sens, spec, 1)


class TestJointPac:
    def test_closed_form_m1_instance(self):
        # m=1, estimate = bound = 1, gamma = 4/e^2 makes the Hoeffding
        # factor 1: condition log(2 e^c - 1) <= eps with c = 1/sigma^2,
        # eps = log 3 inverts to sigma = 1/sqrt(log 2)
        sens = sens_profile([1.0], delta0=1.0)
        spec = CalibrationSpec(
            alpha=2.0, epsilon=math.log(3.0), mode="joint_pac", gamma=4.0 / math.e**2
        )
        got = calibrate_joint_pac(sens, spec, 1)
        assert math.sqrt(got.sigma2) == pytest.approx(
            1.0 / math.sqrt(math.log(2.0)), abs=1e-6
        )

    def test_degenerate_returns_floor(self):
        sens = sens_profile([0.0, 0.0], delta0=0.0)
        spec = CalibrationSpec(alpha=2.0, epsilon=0.5, mode="joint_pac", gamma=0.1)
        got = calibrate_joint_pac(sens, spec, 2)
        assert math.sqrt(got.sigma2) == pytest.approx(1e-8)

    def test_minimality_on_random_instances(self):
        rng = np.random.default_rng(3)
        for _ in range(15):
            m = int(rng.integers(1, 10))
            delta0 = float(rng.uniform(0.5, 3))
            per = rng.uniform(0, delta0, m)
            alpha = float(rng.uniform(1.2, 16))
            eps = float(rng.uniform(0.05, 5))
            gamma = float(rng.uniform(0.01, 0.5))
            sens = sens_profile(per, delta0=delta0)
            spec = CalibrationSpec(alpha, eps, "joint_pac", gamma=gamma)
            sigma = math.sqrt(calibrate_joint_pac(sens, spec, m).sigma2)
            phi = lambda s: joint_pac_condition(s, per, delta0, alpha, gamma, m)
            assert phi(sigma) <= eps + 1e-12
            assert phi(0.99 * sigma) > eps

    def test_condition_strictly_decreasing(self):
        per = np.array([0.5, 1.0])
        grid = np.linspace(0.05, 20, 50)
        vals = [joint_pac_condition(s, per, 1.5, 4.0, 0.1, 2) for s in grid]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_no_overflow_at_tiny_sigma(self):
        val = joint_pac_condition(1e-6, np.array([1.0]), 1.0, 16.0, 0.1, 1)
        assert math.isfinite(val) and val > 1e9


class TestSlicedDivergences:
    def test_ave_zero_shifts(self):
        assert ave_srd_gaussian([0.0, 0.0], [0.5, 0.5], 1.0, 2.0) == 0.0

    def test_single_slice_reduces_to_shift_envelope(self):
        got = ave_srd_gaussian([1.3], [1.0], 0.7, 3.0)
        assert got == pytest.approx(renyi_gaussian_shift(1.3, 0.7, 3.0), abs=1e-15)

    def test_ave_hand_value(self):
        got = ave_srd_gaussian([1.0, 3.0], [0.5, 0.5], 1.0, 2.0)
        assert got == pytest.approx(5.0, abs=1e-12)

    def test_joint_zero_shifts(self):
        assert joint_srd_gaussian([0.0, 0.0], [0.5, 0.5], 1.0, 2.0) == 0.0

    def test_joint_constant_shifts_collapse(self):
        got = joint_srd_gaussian([2.0] * 5, [0.2] * 5, 4.0, 3.0)
        assert got == pytest.approx(renyi_gaussian_shift(2.0, 4.0, 3.0), abs=1e-12)

    def test_joint_hand_value_and_ordering(self):
        # scalar evaluation: log(e/2 + e^9/2)
        want = math.log(0.5 * math.e + 0.5 * math.exp(9.0))
        got = joint_srd_gaussian([1.0, 3.0], [0.5, 0.5], 1.0, 2.0)
        assert got == pytest.approx(want, abs=1e-12)
        assert got >= 5.0

    def test_joint_logsumexp_stable_at_huge_shifts(self):
        got = joint_srd_gaussian([50.0, 60.0], [0.5, 0.5], 1.0, 16.0)
        per_max = 16.0 * 60.0**2 / 2.0
        assert math.isfinite(got)
        assert got == pytest.approx(per_max + math.log(0.5) / 15.0, rel=1e-9)

    def test_ordering_invariant_random(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            d = int(rng.integers(1, 5))
            m = int(rng.integers(1, 16))
            v = rng.normal(size=d)
            dirs = rng.normal(size=(m, d))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            weights = rng.dirichlet(np.ones(m))
            sigma2 = float(rng.uniform(0.2, 4))
            alpha = float(rng.uniform(1.1, 8))
            shifts = dirs @ v
            ave = ave_srd_gaussian(shifts, weights, sigma2, alpha)
            joint = joint_srd_gaussian(shifts, weights, sigma2, alpha)
            full = renyi_gaussian_shift(np.linalg.norm(v), sigma2, alpha)
            assert ave <= joint + 1e-9
            assert joint <= full + 1e-9

    def test_weights_validated(self):
        with pytest.raises(ValueError, match="sum"):
            ave_srd_gaussian([1.0], [0.5], 1.0, 2.0)

    def test_divergence_report_bundles(self):
        rep = divergence_report([1.0, 2.0], [0.5, 0.5], 1.0, 2.0, shift_norm=3.0)
        assert rep.ave <= rep.joint <= rep.full
        assert rep.per_slice.shape == (2,)

    def test_divergence_report_rejects_bad_ordering(self):
        with pytest.raises(ValueError):
            DivergenceReport(ave=2.0, joint=1.0, per_slice=np.array([1.0]))


class TestConversion:
    def test_arithmetic(self):
        want = 1.0 + math.log(1e5) / 15.0
        assert srpp_to_spp(1.0, 16.0, 1e-5) == pytest.approx(want, abs=1e-12)

    def test_delta_to_one_limit(self):
        assert srpp_to_spp(1.0, 16.0, 1.0 - 1e-15) == pytest.approx(1.0, abs=1e-12)

    def test_grid_singleton_equals_scalar(self):
        assert srpp_to_spp_grid([(16.0, 1.0)], 1e-5) == srpp_to_spp(1.0, 16.0, 1e-5)

    def test_grid_minimizes(self):
        entries = [(2.0, 0.5), (16.0, 0.5), (64.0, 0.5)]
        got = srpp_to_spp_grid(entries, 1e-6)
        assert got == min(srpp_to_spp(e, a, 1e-6) for a, e in entries)


class TestGroupBaseline:
    def test_zero_group_sensitivity(self):
        assert group_envelope_baseline(0.0, 4.0, 2.0).sigma2 == 0.0

    def test_substitution(self):
        assert group_envelope_baseline(2.0, 4.0, 2.0).sigma2 == pytest.approx(4.0)

    def test_dominates_ave_when_group_bound_dominates(self):
        mean_square = 1.5
        base = group_envelope_baseline(1.5, 4.0, 2.0)  # group^2 = 2.25 >= 1.5
        ave = calibrate_ave(mean_square, CalibrationSpec(4.0, 2.0, "ave"))
        assert base.sigma2 >= ave.sigma2


class TestPrivatize:
    def test_zero_variance_is_identity(self):
        x = np.array([1.0, -2.0, 3.0])
        out = privatize(x, NoiseSpec(sigma2=0.0, dim=3), seed=1)
        np.testing.assert_array_equal(out, x)

    def test_reproducible(self):
        x = np.zeros(4)
        noise = NoiseSpec(sigma2=2.0, dim=4)
        np.testing.assert_array_equal(
            privatize(x, noise, seed=7), privatize(x, noise, seed=7)
        )
        assert not np.array_equal(privatize(x, noise, seed=7), privatize(x, noise, 8))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            privatize(np.zeros(3), NoiseSpec(sigma2=1.0, dim=4), seed=0)

    def test_empirical_variance(self):
        # 10^5 noise coordinates pooled across seeds and dimensions
        noise = NoiseSpec(sigma2=0.8, dim=500)
        draws = np.stack(
            [privatize(np.zeros(500), noise, seed=s) for s in range(200)]
        )
        assert np.var(draws) == pytest.approx(0.8, rel=0.03)


class TestSampledProfileIntegration:
    def test_pac_pipeline_runs(self):
        profile = sample_slice_profile(3, 16, seed=2)
        sens = SensitivityProfile(
            profile=profile,
            per_slice=np.random.default_rng(0).uniform(0, 1, 16),
            mode="dkw",
            rho=0.01,
            delta0=1.0,
        )
        spec = CalibrationSpec(alpha=4.0, epsilon=1.0, mode="joint_pac", gamma=0.1)
        noise = calibrate_joint_pac(sens, spec, 16)
        assert noise.dim == 3 and noise.sigma2 > 0
