import numpy as np
import pytest
from scipy.stats import norm

from cellstring.errors import DomainError
from cellstring.stats import (AGED, FRESH, CellPopulation, FaultSpec,
                              build_distribution, draw_faulty, draw_healthy,
                              false_alarm_rate, fit_and_thresholds, histogram,
                              missed_detection_rate, named_population,
                              sample_faulty_string, sample_healthy_string,
                              sample_stream, size_sweep)


class TestPopulations:
    def test_reference_populations(self):
        assert FRESH.mu_ohm == 6e-3 and FRESH.sigma_ohm == 0.12e-3
        assert AGED.mu_ohm == 11e-3 and AGED.sigma_ohm == 0.385e-3
        assert FRESH.kappa == pytest.approx(0.02)
        assert AGED.kappa == pytest.approx(0.035)

    def test_named_lookup(self):
        assert named_population("fresh") is FRESH
        with pytest.raises(DomainError):
            named_population("ancient")

    def test_invalid_population_rejected(self):
        with pytest.raises(DomainError):
            CellPopulation(mu_ohm=0.0, sigma_ohm=1e-4)
        with pytest.raises(DomainError):
            CellPopulation(mu_ohm=1e-3, sigma_ohm=-1e-4)


class TestSampling:
    def test_zero_sigma_is_deterministic(self):
        pop = CellPopulation(mu_ohm=6e-3, sigma_ohm=0.0)
        draws = draw_healthy(pop, 5, 20, seed=1)
        assert np.all(draws == pytest.approx(1.2e-3, rel=1e-12))

    def test_single_draw_matches_stream_contract(self):
        # batch draws are exactly the per-index stream draws
        batch = draw_healthy(FRESH, 5, 50, seed=99)
        manual = np.array([
            sample_healthy_string(FRESH, 5, sample_stream(99, j)) for j in range(50)
        ])
        np.testing.assert_array_equal(batch, manual)

    def test_seed_determinism(self):
        a = draw_healthy(AGED, 7, 300, seed=4)
        b = draw_healthy(AGED, 7, 300, seed=4)
        np.testing.assert_array_equal(a, b)
        c = draw_healthy(AGED, 7, 300, seed=5)
        assert not np.array_equal(a, c)

    @pytest.mark.parametrize("workers", [2, 3, 8])
    def test_worker_count_does_not_change_results(self, workers):
        serial = draw_healthy(AGED, 5, 500, seed=21, n_workers=1)
        parallel = draw_healthy(AGED, 5, 500, seed=21, n_workers=workers)
        np.testing.assert_array_equal(serial, parallel)

    def test_null_fault_reproduces_healthy_samples(self):
        healthy = draw_healthy(AGED, 5, 200, seed=8)
        faulty = draw_faulty(AGED, 5, FaultSpec(delta_rel=0.0), 200, seed=8)
        np.testing.assert_array_equal(healthy, faulty)

    def test_mean_mode_pins_faulty_cell_at_scaled_mean(self):
        fault = FaultSpec(delta_rel=0.6, mode="mean")
        rng = sample_stream(3, 0)
        r = sample_faulty_string(AGED, 1, fault, rng)
        assert r == pytest.approx(1.6 * AGED.mu_ohm, rel=1e-12)

    def test_sampled_mode_scales_the_draw(self):
        healthy = sample_healthy_string(AGED, 1, sample_stream(3, 7))
        faulty = sample_faulty_string(AGED, 1, FaultSpec(delta_rel=0.6),
                                      sample_stream(3, 7))
        assert faulty == pytest.approx(1.6 * healthy, rel=1e-12)

    def test_too_many_faulty_cells_rejected(self):
        with pytest.raises(DomainError):
            sample_faulty_string(AGED, 2, FaultSpec(delta_rel=0.6, n_faulty=3),
                                 sample_stream(0, 0))

    def test_samples_positive_and_bounded_by_min_draw(self):
        draws = draw_healthy(AGED, 10, 500, seed=2)
        assert np.all(draws > 0)
        assert np.all(draws <= AGED.mu_ohm + 6 * AGED.sigma_ohm)

    def test_bad_fault_spec_rejected(self):
        with pytest.raises(DomainError):
            FaultSpec(delta_rel=-1.0)
        with pytest.raises(DomainError):
            FaultSpec(delta_rel=0.6, mode="additive")


class TestFitAndThresholds:
    def test_reference_fresh_five_cell_fit(self):
        dist = build_distribution(FRESH, 5, n_mc=10000, seed=12345)
        assert dist.mu_s == pytest.approx(1.2e-3, rel=0.005)
        assert dist.kappa_s == pytest.approx(0.0089, rel=0.10)

    def test_reference_aged_five_cell_fit(self):
        dist = build_distribution(AGED, 5, n_mc=10000, seed=12345)
        assert dist.mu_s == pytest.approx(2.2e-3, rel=0.005)
        assert dist.kappa_s == pytest.approx(0.016, rel=0.10)

    def test_two_sigma_band_placement(self):
        dist = build_distribution(FRESH, 5, n_mc=2000, seed=1)
        thr = fit_and_thresholds(dist, k_sigma=2.0)
        assert thr.lower_ohm == pytest.approx(dist.mu_s - 2 * dist.sigma_s)
        assert thr.upper_ohm == pytest.approx(dist.mu_s + 2 * dist.sigma_s)
        assert thr.provenance["n_cells"] == 5
        assert thr.provenance["seed"] == 1

    def test_zero_k_collapses_band(self):
        dist = build_distribution(FRESH, 5, n_mc=500, seed=1)
        thr = fit_and_thresholds(dist, k_sigma=0.0)
        assert thr.lower_ohm == thr.upper_ohm == dist.mu_s

    def test_zero_sigma_population_gives_zero_width_band(self):
        pop = CellPopulation(mu_ohm=6e-3, sigma_ohm=0.0)
        dist = build_distribution(pop, 5, n_mc=500, seed=1)
        thr = fit_and_thresholds(dist, k_sigma=2.0)
        assert thr.lower_ohm == thr.upper_ohm == pytest.approx(1.2e-3, rel=1e-12)

    def test_too_few_samples_rejected(self):
        dist = build_distribution(FRESH, 5, n_mc=99, seed=1)
        with pytest.raises(DomainError):
            fit_and_thresholds(dist)


class TestRates:
    def test_false_alarm_near_two_sided_two_sigma(self):
        dist = build_distribution(FRESH, 5, n_mc=10000, seed=12345)
        thr = fit_and_thresholds(dist, k_sigma=2.0)
        fa = false_alarm_rate(FRESH, 5, thr, n_mc=10000, seed=12346)
        assert fa.rate == pytest.approx(0.046, abs=0.006)

    def test_false_alarm_at_three_sigma(self):
        dist = build_distribution(FRESH, 5, n_mc=10000, seed=12345)
        thr = fit_and_thresholds(dist, k_sigma=3.0)
        fa = false_alarm_rate(FRESH, 5, thr, n_mc=10000, seed=12346)
        expected = 2.0 * norm.sf(3.0)  # two-sided tail of the fitted normal
        assert fa.rate == pytest.approx(expected, abs=0.002)

    def test_zero_width_band_on_continuous_population_alarms_always(self):
        dist = build_distribution(FRESH, 5, n_mc=500, seed=1)
        thr = fit_and_thresholds(dist, k_sigma=0.0)
        fa = false_alarm_rate(FRESH, 5, thr, n_mc=500, seed=2)
        assert fa.rate == 1.0

    def test_zero_sigma_population_never_alarms(self):
        pop = CellPopulation(mu_ohm=6e-3, sigma_ohm=0.0)
        dist = build_distribution(pop, 5, n_mc=500, seed=1)
        thr = fit_and_thresholds(dist, k_sigma=0.0)
        fa = false_alarm_rate(pop, 5, thr, n_mc=500, seed=2)
        assert fa.rate == 0.0  # boundary counts as inside

    def test_md_complements_fa_at_zero_delta(self):
        dist = build_distribution(AGED, 5, n_mc=10000, seed=3)
        thr = fit_and_thresholds(dist, k_sigma=2.0)
        fa = false_alarm_rate(AGED, 5, thr, n_mc=10000, seed=4)
        md = missed_detection_rate(AGED, 5, FaultSpec(delta_rel=0.0), thr,
                                   n_mc=10000, seed=5)
        se = np.hypot(fa.se, md.se)
        assert md.rate == pytest.approx(1.0 - fa.rate, abs=3 * se)

    def test_md_monotone_nonincreasing_in_delta(self):
        dist = build_distribution(AGED, 10, n_mc=4000, seed=6)
        thr = fit_and_thresholds(dist, k_sigma=2.0)
        deltas = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2]
        rates = [
            missed_detection_rate(AGED, 10, FaultSpec(delta_rel=d), thr,
                                  n_mc=4000, seed=7)
            for d in deltas
        ]
        for lo, hi in zip(rates[1:], rates[:-1]):
            # common random numbers across deltas: allow 3 SE of slack anyway
            assert lo.rate <= hi.rate + 3 * np.hypot(lo.se, hi.se)

    def test_extreme_fault_always_detected(self):
        dist = build_distribution(AGED, 5, n_mc=4000, seed=8)
        thr = fit_and_thresholds(dist, k_sigma=2.0)
        md = missed_detection_rate(AGED, 5, FaultSpec(delta_rel=10.0), thr,
                                   n_mc=4000, seed=9)
        assert md.rate == 0.0

    def test_rate_se_is_binomial(self):
        dist = build_distribution(AGED, 5, n_mc=1000, seed=8)
        thr = fit_and_thresholds(dist, k_sigma=2.0)
        fa = false_alarm_rate(AGED, 5, thr, n_mc=1000, seed=9)
        assert fa.se == pytest.approx(np.sqrt(fa.rate * (1 - fa.rate) / 1000))


class TestSizeSweep:
    def test_md_grows_with_string_size(self):
        rows = size_sweep(AGED, FaultSpec(delta_rel=0.6), 2.0, [5, 10, 20],
                          n_mc=4000, seed=10)
        assert [r.n_cells for r in rows] == [5, 10, 20]
        md = [r.missed_detection.rate for r in rows]
        assert md[0] < md[1] < md[2]


class TestDeltaMethodCrossCheck:
    @pytest.mark.parametrize("kappa", [0.01, 0.035, 0.05])
    @pytest.mark.parametrize("n_cells", [2, 10])
    def test_moments_track_first_order_theory(self, kappa, n_cells):
        mu = 8e-3
        pop = CellPopulation(mu_ohm=mu, sigma_ohm=kappa * mu)
        dist = build_distribution(pop, n_cells, n_mc=10000, seed=77)
        assert dist.mu_s == pytest.approx(mu / n_cells, rel=0.02)
        assert dist.kappa_s == pytest.approx(kappa / np.sqrt(n_cells), rel=0.02)


class TestHistogram:
    def test_counts_cover_all_samples(self):
        samples = draw_healthy(FRESH, 5, 2000, seed=11)
        edges, counts = histogram(samples)
        assert counts.sum() == 2000
        assert edges.size == counts.size + 1
        assert edges[0] <= samples.min() and edges[-1] >= samples.max()
