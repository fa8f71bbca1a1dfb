"""KS tests, the Rayleigh error-law harness, and pseudo-variance."""

import math

import numpy as np
import pytest

from mbfdetect.benford import exact_bf_coefficient
from mbfdetect.ggd import GgdParams, ggd_sample
from mbfdetect.stats import (
    ks_one_sample,
    ks_one_sample_vs_ggd,
    ks_two_sample,
    pseudo_variance,
    verify_rayleigh,
)


def brute_force_d(a, b):
    """O(n_a * n_b) reference: evaluate both ECDFs at every pooled point."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    best = 0.0
    for v in np.concatenate([a, b]):
        gap = abs(np.mean(a <= v) - np.mean(b <= v))
        best = max(best, gap)
    return best


class TestTwoSample:
    def test_identical_samples(self):
        r = ks_two_sample([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert r.d_statistic == 0.0
        assert r.p_value == 1.0

    def test_disjoint_supports(self):
        r = ks_two_sample([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])
        assert r.d_statistic == 1.0

    def test_half_overlap(self):
        r = ks_two_sample([1.0, 2.0, 3.0, 4.0], [3.0, 4.0, 5.0, 6.0])
        assert r.d_statistic == pytest.approx(brute_force_d([1, 2, 3, 4], [3, 4, 5, 6]))
        assert r.d_statistic == pytest.approx(0.5)

    def test_symmetric(self):
        rng = np.random.default_rng(0)
        a = rng.normal(0, 1, 37)
        b = rng.normal(0.4, 1.3, 23)
        r1 = ks_two_sample(a, b)
        r2 = ks_two_sample(b, a)
        assert r1.d_statistic == r2.d_statistic
        assert r1.p_value == r2.p_value

    def test_matches_brute_force_with_ties(self):
        rng = np.random.default_rng(42)
        for _ in range(400):
            na, nb = rng.integers(1, 51, size=2)
            if rng.random() < 0.5:
                a = rng.integers(0, 8, na).astype(float)
                b = rng.integers(0, 8, nb).astype(float)
            else:
                a = rng.normal(0, 1, na)
                b = rng.normal(0.3, 1, nb)
            r = ks_two_sample(a, b)
            assert r.d_statistic == pytest.approx(brute_force_d(a, b), abs=1e-12)

    def test_matches_scipy(self):
        rng = np.random.default_rng(5)
        import scipy.stats
        for _ in range(30):
            a = rng.normal(0, 1, int(rng.integers(20, 300)))
            b = rng.normal(0.2, 1.1, int(rng.integers(20, 300)))
            ours = ks_two_sample(a, b)
            ref = scipy.stats.ks_2samp(a, b, method="asymp")
            assert ours.d_statistic == pytest.approx(ref.statistic, abs=1e-12)
            # scipy's asymptotic mode omits the Stephens correction, so p-values
            # agree only loosely; direction and order of magnitude must match.
            assert ours.p_value == pytest.approx(ref.pvalue, abs=0.05)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ks_two_sample([], [1.0])


class TestOneSampleVsGgd:
    def test_self_consistency(self):
        params = GgdParams(c=2.0, sigma=1.0)
        sample = ggd_sample(params, 500, seed=100)
        ps = [ks_one_sample_vs_ggd(sample, params, draws=500, trials=50, seed=s)
              for s in range(20)]
        assert np.mean(ps) > 0.05

    def test_gross_mismatch(self):
        sample = np.random.default_rng(1).uniform(0, 1, 500)
        p = ks_one_sample_vs_ggd(sample, GgdParams(c=2.0, sigma=0.01), draws=500,
                                 trials=50, seed=3)
        assert p < 0.01

    def test_single_trial_is_one_two_sample_test(self):
        from mbfdetect.ggd import draw_ggd
        from mbfdetect.stats import trial_seed
        params = GgdParams(c=1.5, sigma=2.0)
        sample = np.random.default_rng(2).normal(0, 2, 120)
        p = ks_one_sample_vs_ggd(sample, params, draws=200, trials=1, seed=11)
        ref = draw_ggd(params, 200, trial_seed(11, 0))
        assert p == ks_two_sample(sample, ref).p_value

    def test_empty_sample_rejected(self):
        with pytest.raises(ValueError):
            ks_one_sample_vs_ggd([], GgdParams(c=2.0, sigma=1.0))


class TestPseudoVariance:
    def test_fourth_roots_of_unity(self):
        assert pseudo_variance([1, 1j, -1, -1j]) == pytest.approx(0.0)

    def test_constant(self):
        assert pseudo_variance([1.0, 1.0, 1.0]) == pytest.approx(0.0)

    def test_unit_phasor_draws_match_closed_form(self):
        # pseudo-variance of exp(-j*2*pi*log10|X|) converges to a_2 - a_1^2
        params = GgdParams(c=2.0, sigma=1.0)
        a1 = exact_bf_coefficient(params, 1).value
        a2 = exact_bf_coefficient(params, 2).value
        x = ggd_sample(params, 10 ** 5, seed=6)
        t = np.exp(-1j * 2 * np.pi * np.log10(np.abs(x)))
        assert abs(pseudo_variance(t) - (a2 - a1 * a1)) < 0.02


class TestVerifyRayleigh:
    def test_predicted_values(self):
        r = verify_rayleigh(c=2.0, n=1, m=10 ** 4, trials=100, seed=0)
        assert r.predicted_mean == pytest.approx(0.0088623, abs=5e-8)
        assert r.predicted_var == pytest.approx(2.1460e-5, abs=5e-10)

    def test_error_law_at_c1_n2(self):
        r = verify_rayleigh(c=1.0, n=2, m=10 ** 3, trials=2000, seed=7)
        assert abs(r.empirical_mean_abs_error - 0.028025) / 0.028025 < 0.05
        assert r.rayleigh_ks_p > 0.01

    def test_error_shrinks_with_m(self):
        small = verify_rayleigh(c=2.0, n=1, m=10 ** 3, trials=300, seed=2)
        large = verify_rayleigh(c=2.0, n=1, m=10 ** 4, trials=300, seed=2)
        assert large.empirical_mean_abs_error < small.empirical_mean_abs_error

    def test_error_pseudo_variance_vanishes(self):
        r = verify_rayleigh(c=2.0, n=1, m=10 ** 3, trials=500, seed=3)
        assert r.pseudo_variance_magnitude <= 3.0 / math.sqrt(500)

    def test_preconditions(self):
        with pytest.raises(ValueError):
            verify_rayleigh(c=2.0, n=1, m=10, trials=500)
        with pytest.raises(ValueError):
            verify_rayleigh(c=2.0, n=1, m=1000, trials=10)


class TestOneSampleHelper:
    def test_uniform_sample_against_uniform_cdf(self):
        x = np.random.default_rng(0).uniform(0, 1, 2000)
        r = ks_one_sample(x, lambda q: np.clip(q, 0, 1))
        assert r.p_value > 0.05

    def test_wrong_reference_rejected(self):
        x = np.random.default_rng(0).uniform(0, 1, 2000)
        r = ks_one_sample(x, lambda q: np.clip(q, 0, 1) ** 3)
        assert r.p_value < 1e-6
