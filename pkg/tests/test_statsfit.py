import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from branchlat.lattice import ConfigurationError
from branchlat.statsfit import (count_modes, fit_gaussian, fit_power_law,
                                fit_size_scaling, has_power_law_regime,
                                histogram, scan_power_law, small_t_fits)


class TestHistogram:
    def test_empty_rejected(self):
        with pytest.raises(ConfigurationError):
            histogram([])

    def test_single_value_linear(self):
        h = histogram([3.0, 3.0, 3.0], scheme="linear", bins=5)
        assert h.counts.sum() == 3
        assert abs((h.density * h.widths).sum() - 1.0) < 1e-12

    def test_log_rejects_nonpositive(self):
        with pytest.raises(ConfigurationError):
            histogram([1.0, 0.0], scheme="log")

    def test_log_binned_power_law_slope(self):
        # inverse-transform sample of P(t) ~ t^-2.5 on [1, inf)
        rng = np.random.default_rng(4)
        u = rng.random(1_000_000)
        samples = (1 - u) ** (-1 / 1.5)  # survival exponent alpha-1 = 1.5
        h = histogram(samples, scheme="log", base=1.5)
        keep = (h.counts > 50) & (h.centers < np.quantile(samples, 0.999))
        x, y = np.log(h.centers[keep]), np.log(h.density[keep])
        slope = np.polyfit(x, y, 1)[0]
        assert slope == pytest.approx(-2.5, abs=0.05)

    def test_normal_density_matches_curve(self):
        rng = np.random.default_rng(7)
        samples = rng.normal(0.0, 1.0, 1_000_000)
        h = histogram(samples, scheme="linear", bins=60)
        centers = h.centers
        pdf = np.exp(-0.5 * centers ** 2) / np.sqrt(2 * np.pi)
        core = np.abs(centers) < 2.5
        assert np.max(np.abs(h.density[core] - pdf[core])) < 0.005

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(0.1, 1e6), min_size=1, max_size=400),
           st.sampled_from(["linear", "log"]))
    def test_density_integrates_to_one(self, samples, scheme):
        h = histogram(samples, scheme=scheme, bins=12)
        assert (h.density * h.widths).sum() == pytest.approx(1.0, rel=1e-12)
        assert h.counts.sum() == len(samples)


class TestPowerLawFit:
    def make_exact_hist(self, alpha, amplitude=1.0):
        edges = 1.3 ** np.arange(0, 14)
        centers = np.sqrt(edges[:-1] * edges[1:])
        density = amplitude * centers ** -alpha
        from branchlat.statsfit import Histogram
        counts = np.maximum((density * np.diff(edges) * 1e6).astype(int), 1)
        return Histogram(edges=edges, counts=counts, density=density,
                         scheme="log", n_samples=int(counts.sum()))

    def test_exact_input_recovers_exponent(self):
        h = self.make_exact_hist(1.18)
        fit = fit_power_law(h, (h.centers[0], h.centers[-1]))
        assert fit.alpha == pytest.approx(1.18, abs=1e-9)
        assert fit.chi2 < 1e-18

    def test_scale_equivariance(self):
        h1 = self.make_exact_hist(2.0, amplitude=1.0)
        h2 = self.make_exact_hist(2.0, amplitude=7.5)
        f1 = fit_power_law(h1, (h1.centers[0], h1.centers[-1]))
        f2 = fit_power_law(h2, (h2.centers[0], h2.centers[-1]))
        assert f1.alpha == pytest.approx(f2.alpha, abs=1e-12)
        assert f2.amplitude / f1.amplitude == pytest.approx(7.5, rel=1e-9)

    def test_window_too_small_rejected(self):
        h = self.make_exact_hist(1.5)
        with pytest.raises(ConfigurationError):
            fit_power_law(h, (h.centers[0], h.centers[1]))

    def test_scan_covers_all_window_lengths(self):
        h = self.make_exact_hist(1.5)
        n = len(h.nonempty())
        fits = scan_power_law(h, min_bins=5)
        assert len(fits) == (n - 4) * (n - 3) // 2
        assert all(w.fit.n_points >= 5 for w in fits)

    def test_small_t_fits_anchor_at_start(self):
        h = self.make_exact_hist(1.5)
        fits = small_t_fits(h)
        assert all(w.start_bin in (0, 1) for w in fits)

    def test_regime_detector_on_exact_power_law(self):
        rng = np.random.default_rng(11)
        u = rng.random(20000)
        samples = (1 - u) ** (-1 / 0.8)
        samples = samples[samples < 1e4]
        assert has_power_law_regime(samples, threshold=0.02)

    def test_regime_detector_rejects_gaussian(self):
        rng = np.random.default_rng(12)
        samples = np.abs(rng.normal(50, 5, 20000)) + 1
        assert not has_power_law_regime(samples, threshold=0.001)


class TestGaussianFit:
    def test_exact_normal_quantiles(self):
        # deterministic quantile sample of a standard normal
        from math import erf
        qs = (np.arange(1, 4000) / 4000.0)
        # inverse CDF by bisection for an exact symmetric sample
        def inv(p):
            lo, hi = -8.0, 8.0
            for _ in range(80):
                mid = (lo + hi) / 2
                if 0.5 * (1 + erf(mid / np.sqrt(2))) < p:
                    lo = mid
                else:
                    hi = mid
            return mid
        samples = np.array([inv(p) for p in qs])
        fit = fit_gaussian(samples)
        assert abs(fit.skewness) < 1e-6
        assert abs(fit.excess_kurtosis) < 0.05
        assert fit.n_modes == 1
        assert fit.chi2_reduced < 2.0
        assert fit.is_gaussian_like()

    def test_bimodal_mixture_flagged(self):
        rng = np.random.default_rng(3)
        samples = np.concatenate([rng.normal(0, 1, 4000),
                                  rng.normal(12, 1, 4000)])
        fit = fit_gaussian(samples)
        assert fit.chi2_reduced > 5.0
        assert fit.n_modes >= 2
        assert not fit.is_gaussian_like()

    def test_too_few_samples(self):
        with pytest.raises(ConfigurationError):
            fit_gaussian([1.0] * 7)

    def test_degenerate_sample(self):
        with pytest.raises(ConfigurationError):
            fit_gaussian([2.0] * 100)

    def test_count_modes_simple(self):
        assert count_modes(np.array([1, 5, 9, 5, 1])) == 1
        assert count_modes(np.array([1, 9, 1, 1, 9, 1])) == 2
        assert count_modes(np.zeros(6)) == 0


class TestSizeScaling:
    def test_exact_recovery(self):
        pts = [(L, 3.0 * L ** -0.0059) for L in (2500, 5625, 10000, 22500)]
        fit = fit_size_scaling(pts)
        assert fit.phi == pytest.approx(0.0059, abs=1e-10)
        assert fit.weakly_discontinuous

    def test_constant_jumps_give_zero(self):
        fit = fit_size_scaling([(100, 0.2), (400, 0.2), (1600, 0.2)])
        assert fit.phi == pytest.approx(0.0, abs=1e-12)
        assert not fit.weakly_discontinuous

    def test_needs_three_positive_points(self):
        with pytest.raises(ConfigurationError):
            fit_size_scaling([(100, 0.1), (200, 0.2)])
        with pytest.raises(ConfigurationError):
            fit_size_scaling([(100, 0.1), (200, 0.0), (400, 0.2)])

    def test_stderr_zero_on_exact_input(self):
        pts = [(L, 2.0 * L ** -0.01) for L in (100, 1000, 10000)]
        fit = fit_size_scaling(pts)
        assert fit.stderr == pytest.approx(0.0, abs=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-0.2, 0.2), st.floats(0.1, 5.0))
    def test_recovery_property(self, phi, amp):
        pts = [(L, amp * L ** -phi) for L in (100, 500, 2500, 12500)]
        fit = fit_size_scaling(pts)
        assert fit.phi == pytest.approx(phi, abs=1e-8)
