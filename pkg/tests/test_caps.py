import math

import numpy as np
import pytest
from scipy.stats import hypergeom

from srpp.caps import (
    CapEstimate,
    SubsamplingSpec,
    bernoulli_mismatch_coupling,
    caps_from_draws,
    caps_from_tv,
    delta_gamma_bookkeeping,
    discrepancy_count,
    hypergeometric_k2,
    independent_coupling,
    localized_cap,
    mc_caps,
    subsample,
    subsample_with,
    two_world_coupling,
    union_caps,
)
from srpp.rng import rng_stream


class TestSubsamplingSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            SubsamplingSpec(scheme="WOR", population=10, batch=11)
        with pytest.raises(ValueError):
            SubsamplingSpec(scheme="WR", population=10, batch=0)
        with pytest.raises(ValueError):
            SubsamplingSpec(scheme="Poisson", population=10, rate=0.0)
        with pytest.raises(ValueError):
            SubsamplingSpec(scheme="fancy", population=10, batch=1)

    def test_batch_bound(self):
        assert SubsamplingSpec("WOR", 10, batch=4).batch_bound == 4
        assert SubsamplingSpec("Poisson", 10, rate=0.5).batch_bound == 10


class TestSubsample:
    def test_wor_full_batch_is_everything(self):
        sub = SubsamplingSpec("WOR", population=20, batch=20)
        idx = subsample(sub, seed=3)
        assert sorted(idx.tolist()) == list(range(20))

    def test_poisson_rate_one_is_everything(self):
        sub = SubsamplingSpec("Poisson", population=15, rate=1.0)
        idx = subsample(sub, seed=3)
        assert sorted(idx.tolist()) == list(range(15))

    def test_poisson_never_empty(self):
        sub = SubsamplingSpec("Poisson", population=3, rate=0.05)
        rng = rng_stream(0, 1)
        for _ in range(300):
            assert subsample_with(sub, rng).size >= 1

    def test_deterministic(self):
        sub = SubsamplingSpec("WR", population=100, batch=10)
        np.testing.assert_array_equal(subsample(sub, 5), subsample(sub, 5))

    def test_wr_inclusion_frequency(self):
        # per-index inclusion probability 1 - (1 - 1/n)^B over 10^5 draws
        n, B, draws = 50000, 512, 10**5
        rng = rng_stream(0, 99)
        counts = np.zeros(n, dtype=np.int64)
        chunk = 5000
        for _ in range(draws // chunk):
            idx = rng.integers(0, n, size=(chunk, B))  # WR draws in bulk
            srt = np.sort(idx, axis=1)
            first = np.ones_like(srt, dtype=bool)
            first[:, 1:] = srt[:, 1:] != srt[:, :-1]
            counts += np.bincount(srt[first], minlength=n)
        p = 1.0 - (1.0 - 1.0 / n) ** B
        freq = counts / draws
        se = math.sqrt(p * (1 - p) / draws)
        # global mean within 3 sigma of its (averaged) expectation
        assert abs(freq.mean() - p) <= 3 * se / math.sqrt(n) + 1e-12
        assert np.all(np.abs(freq[:200] - p) <= 6 * se)


class TestDiscrepancyCount:
    def test_identical_datasets(self):
        x = np.arange(12).reshape(6, 2)
        assert discrepancy_count(x, x, np.array([0, 3, 5])) == 0

    def test_all_differing(self):
        x = np.zeros((8, 2))
        y = np.ones((8, 2))
        assert discrepancy_count(x, y, np.arange(5)) == 5

    def test_wr_multiplicity(self):
        x = np.zeros(4)
        y = np.array([1.0, 0.0, 0.0, 0.0])
        assert discrepancy_count(x, y, np.array([0, 0, 2])) == 2

    def test_index_out_of_range(self):
        with pytest.raises(ValueError, match="range"):
            discrepancy_count(np.zeros(3), np.zeros(3), np.array([3]))


class TestCapsFromDraws:
    def test_all_zero_draws_hoeffding_term(self):
        est = caps_from_draws(np.zeros(10000), batch=10, delta_t=0.05, gamma_t=0.05)
        want = 100.0 * math.sqrt(math.log(40.0) / 20000.0)
        assert est.ms_cap == pytest.approx(want, abs=1e-12)
        assert est.tail_cap == 0.0

    def test_delta_below_band_falls_back_to_batch(self):
        # band with M=50, gamma=0.05 is ~0.19 > delta=0.1
        est = caps_from_draws(np.zeros(50), batch=7, delta_t=0.1, gamma_t=0.05)
        assert est.tail_cap == 7.0

    def test_saturated_draws(self):
        est = caps_from_draws(np.full(500, 9.0), batch=9, delta_t=0.2, gamma_t=0.1)
        assert est.ms_cap == 81.0  # clamped at B^2, so >= B^2 holds with equality
        assert est.tail_cap == 9.0

    def test_quantile_indexing(self):
        draws = np.arange(100, dtype=float) / 99 * 5
        est = caps_from_draws(draws, batch=5, delta_t=0.3, gamma_t=0.5)
        band = math.sqrt(math.log(4.0) / 200.0)
        k = math.ceil((1.0 - (0.3 - band)) * 100)
        assert est.tail_cap == draws[k - 1]

    def test_validation(self):
        with pytest.raises(ValueError, match="draws"):
            caps_from_draws(np.zeros(1), 5, 0.1, 0.1)
        with pytest.raises(ValueError, match="delta"):
            caps_from_draws(np.zeros(10), 5, 1.1, 0.1)


class TestMcCaps:
    def test_two_world_all_indices_differ(self):
        sub = SubsamplingSpec("WOR", population=6, batch=4)
        sampler = two_world_coupling(np.zeros(6), np.ones(6))
        est = mc_caps(sampler, sub, M=200, delta_t=0.2, gamma_t=0.1, seed=0)
        assert est.tail_cap == 4.0
        assert est.ms_cap == 16.0

    def test_independent_coupling_runs(self):
        sub = SubsamplingSpec("WR", population=10, batch=3)
        sampler = independent_coupling(
            lambda rng: rng.integers(0, 2, 10), lambda rng: rng.integers(0, 2, 10)
        )
        est = mc_caps(sampler, sub, M=500, delta_t=0.2, gamma_t=0.1, seed=1)
        assert 0 <= est.tail_cap <= 3
        assert est.draws is not None and est.draws.size == 500

    def test_reproducible(self):
        sub = SubsamplingSpec("WOR", population=30, batch=5)
        sampler = bernoulli_mismatch_coupling(
            lambda rng: np.zeros(30), 0.3, lambda rng, rows: np.ones(rows.shape[0])
        )
        a = mc_caps(sampler, sub, 100, 0.2, 0.1, seed=9)
        b = mc_caps(sampler, sub, 100, 0.2, 0.1, seed=9)
        assert a.ms_cap == b.ms_cap and a.tail_cap == b.tail_cap


class TestWrWorRangeInvariants:
    def test_wr_discrepancy_reaches_batch(self):
        # one differing record, n=10, B=3: the all-hit event has
        # probability 1e-3 per draw and must appear within 10^6 draws
        rng = rng_stream(0, 7)
        j = 4
        hits = 0
        max_delta = 0
        for _ in range(100):
            idx = rng.integers(0, 10, size=(10000, 3))
            delta = (idx == j).sum(axis=1)
            max_delta = max(max_delta, int(delta.max()))
            hits += int((delta == 3).sum())
        assert max_delta == 3
        assert hits >= 1

    def test_wor_bounded_by_hamming_distance(self):
        x = np.zeros(20)
        y = x.copy()
        y[:4] = 1.0  # Hamming distance 4
        sub = SubsamplingSpec("WOR", population=20, batch=10)
        rng = rng_stream(0, 8)
        for _ in range(2000):
            idx = subsample_with(sub, rng)
            assert discrepancy_count(x, y, idx) <= 4


class TestCapsFromTv:
    def test_tau_zero_delta_one(self):
        est = caps_from_tv(0.0, 100, 1.0)
        assert est.ms_cap == 0.0 and est.tail_cap == 0.0

    def test_tau_one_saturates(self):
        est = caps_from_tv(1.0, 100, 0.5)
        assert est.ms_cap == 100.0**2
        assert est.tail_cap == 100.0

    def test_hand_values(self):
        est = caps_from_tv(0.1, 100, 0.05)
        assert est.ms_cap == pytest.approx(109.0, abs=1e-12)
        want_tail = 10.0 + math.sqrt(50.0 * math.log(20.0))
        assert est.tail_cap == pytest.approx(want_tail, abs=1e-12)
        assert est.tail_cap < 100  # clamp inactive

    def test_ms_cap_matches_binomial_monte_carlo(self):
        rng = rng_stream(0, 10)
        draws = rng.binomial(100, 0.1, size=10**6).astype(float)
        assert caps_from_tv(0.1, 100, 0.05).ms_cap == pytest.approx(
            float(np.mean(draws**2)), abs=0.5
        )

    def test_tail_cap_covers(self):
        rng = rng_stream(0, 11)
        draws = rng.binomial(100, 0.1, size=10**6)
        est = caps_from_tv(0.1, 100, 0.05)
        assert np.mean(draws <= est.tail_cap) >= 0.95


class TestHypergeometricK2:
    def test_degenerate_cases(self):
        assert hypergeometric_k2(100, 0, 10) == (0.0, 0.0, 0.0)
        mean, var, m2 = hypergeometric_k2(50, 7, 50)
        assert (mean, var, m2) == (7.0, 0.0, 49.0)

    def test_against_scipy(self):
        mean, var, m2 = hypergeometric_k2(50000, 20, 512)
        dist = hypergeom(M=50000, n=20, N=512)
        assert mean == pytest.approx(dist.mean(), abs=1e-12)
        assert var == pytest.approx(dist.var(), abs=1e-12)
        assert m2 == pytest.approx(dist.var() + dist.mean() ** 2, abs=1e-12)
        assert m2 == pytest.approx(0.244569, abs=1e-6)

    def test_binomial_limit(self):
        n = 10**6
        B = 100
        tau = 0.1
        _, _, m2_hyper = hypergeometric_k2(n, int(tau * n), B)
        m2_binom = B * tau * (1 - tau) + (B * tau) ** 2
        assert abs(m2_hyper - m2_binom) / m2_binom <= 0.01

    def test_validation(self):
        with pytest.raises(ValueError):
            hypergeometric_k2(10, 11, 5)
        with pytest.raises(ValueError):
            hypergeometric_k2(10, 5, 0)


class TestLocalizedCap:
    def test_min_semantics(self):
        est = localized_cap(5, 512)
        assert est.tail_cap == 5.0 and est.ms_cap == 25.0 and est.delta == 0.0

    def test_zero(self):
        est = localized_cap(0, 16)
        assert est.tail_cap == 0.0 and est.ms_cap == 0.0

    def test_saturation(self):
        est = localized_cap(600, 512)
        assert est.tail_cap == 512.0 and est.ms_cap == 512.0**2


class TestUnionCaps:
    def _mc(self, seed, tau=0.3, M=400):
        sub = SubsamplingSpec("WOR", population=40, batch=8)
        sampler = bernoulli_mismatch_coupling(
            lambda rng: np.zeros(40), tau, lambda rng, rows: np.ones(rows.shape[0])
        )
        return mc_caps(sampler, sub, M, 0.2, 0.1, seed=seed)

    def test_single_instance_identity(self):
        est = self._mc(0)
        merged = union_caps([est], gamma_total=0.1, delta_t=0.2)
        assert merged.ms_cap == est.ms_cap
        assert merged.tail_cap == est.tail_cap

    def test_two_identical_instances_larger_correction(self):
        est = self._mc(0)
        merged = union_caps([est, est], gamma_total=0.1, delta_t=0.2)
        assert merged.ms_cap > est.ms_cap
        assert merged.tail_cap >= est.tail_cap

    def test_max_semantics(self):
        ests = [self._mc(s, tau=t) for s, t in ((0, 0.1), (1, 0.4), (2, 0.7))]
        merged = union_caps(ests, gamma_total=0.1, delta_t=0.2)
        recomputed = [
            caps_from_draws(e.draws, e.batch, 0.2, 0.1 / 3) for e in ests
        ]
        assert merged.ms_cap == max(r.ms_cap for r in recomputed)
        assert merged.tail_cap == max(r.tail_cap for r in recomputed)
        assert all(merged.ms_cap >= r.ms_cap for r in recomputed)

    def test_validation(self):
        with pytest.raises(ValueError, match="nonempty"):
            union_caps([], 0.1, 0.2)
        with pytest.raises(ValueError, match="draws"):
            union_caps([localized_cap(3, 8)], 0.1, 0.2)


class TestBookkeeping:
    def test_residual_probability(self):
        got = delta_gamma_bookkeeping([0.01] * 3, [0.002] * 3)
        assert got == pytest.approx(1.0 - 0.03 - 0.006)

    def test_empty(self):
        assert delta_gamma_bookkeeping([], []) == 1.0


class TestCapEstimateInvariants:
    def test_range_validation(self):
        with pytest.raises(ValueError):
            CapEstimate(
                tail_cap=11.0, delta=0.1, ms_cap=4.0, gamma=0.1, batch=10, method="x"
            )
        with pytest.raises(ValueError):
            CapEstimate(
                tail_cap=1.0, delta=0.1, ms_cap=101.0, gamma=0.1, batch=10, method="x"
            )
