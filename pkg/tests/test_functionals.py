import math

import mpmath as mp
import numpy as np
import pytest
from scipy import stats

from predbayes.functionals import (FunctionalSpec, coverage_limit, evaluate,
                                   mean_asymptotic_sd, normal_cdf,
                                   quantile_asymptotic_var)
from predbayes.measures import Sample


def mp_coverage(r, alpha):
    """High-precision oracle for the limiting coverage formula."""
    z = mp.sqrt(2) * mp.erfinv(1 - mp.mpf(alpha))
    return float(2 * mp.ncdf(z * mp.sqrt(r)) - 1)


class TestEvaluate:
    def test_mean(self):
        assert evaluate(FunctionalSpec("mean"), Sample.of([1, 2, 3])) == 2

    def test_quantile_order_statistic_rule(self):
        assert evaluate(FunctionalSpec("quantile", 0.5), Sample.of([1, 2, 3, 4])) == 2

    def test_mean_and_variance_vector(self):
        out = evaluate(FunctionalSpec("mean_and_variance"), Sample.of([0, 2]))
        np.testing.assert_allclose(out, [1.0, 1.0])

    def test_variance_needs_two_points(self):
        with pytest.raises(ValueError):
            evaluate(FunctionalSpec("variance"), Sample.of([1.0]))

    def test_quantile_level_validated(self):
        with pytest.raises(ValueError):
            FunctionalSpec("quantile", 1.0)
        with pytest.raises(ValueError):
            FunctionalSpec("quantile")

    @pytest.mark.parametrize("shift", [-3.5, 0.25, 12.0])
    def test_translation_equivariance(self, shift):
        rng = np.random.default_rng(0)
        x = rng.normal(size=40)
        s, s2 = Sample(x), Sample(x + shift)
        assert evaluate(FunctionalSpec("mean"), s2) == pytest.approx(
            evaluate(FunctionalSpec("mean"), s) + shift, abs=1e-12)
        assert evaluate(FunctionalSpec("quantile", 0.3), s2) == pytest.approx(
            evaluate(FunctionalSpec("quantile", 0.3), s) + shift, abs=1e-12)
        assert evaluate(FunctionalSpec("variance"), s2) == pytest.approx(
            evaluate(FunctionalSpec("variance"), s), abs=1e-12)

    @pytest.mark.parametrize("c", [0.5, 2.0, 7.5])
    def test_variance_scale(self, c):
        rng = np.random.default_rng(1)
        x = rng.normal(size=40)
        v1 = evaluate(FunctionalSpec("variance"), Sample(x))
        v2 = evaluate(FunctionalSpec("variance"), Sample(c * x))
        assert v2 == pytest.approx(c**2 * v1, rel=1e-12)


class TestCoverageLimit:
    def test_well_specified_recovers_nominal(self):
        for alpha in (0.01, 0.05, 0.1):
            assert coverage_limit(1.0, alpha) == pytest.approx(1 - alpha, abs=1e-10)

    def test_half_ratio_against_oracle(self):
        assert coverage_limit(0.5, 0.05) == pytest.approx(mp_coverage(0.5, 0.05),
                                                          abs=1e-12)
        assert coverage_limit(0.5, 0.05) == pytest.approx(0.834224, abs=5e-7)

    def test_quadruple_ratio_against_oracle(self):
        assert coverage_limit(4.0, 0.05) == pytest.approx(mp_coverage(4.0, 0.05),
                                                          abs=1e-12)
        assert coverage_limit(4.0, 0.05) == pytest.approx(0.99991, abs=5e-6)

    def test_strictly_increasing_in_ratio(self):
        grid = np.linspace(0.05, 6.0, 60)
        vals = [coverage_limit(r, 0.05) for r in grid]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_range_checks(self):
        with pytest.raises(ValueError):
            coverage_limit(-0.1, 0.05)
        with pytest.raises(ValueError):
            coverage_limit(1.0, 1.5)


class TestNormalCdf:
    def test_high_precision_against_mpmath(self):
        for x in np.linspace(-8, 8, 33):
            ref = float(mp.ncdf(x))
            got = normal_cdf(float(x))
            assert got == pytest.approx(ref, rel=1e-12, abs=1e-15)


class TestMeanAsymptoticSd:
    def test_values(self):
        assert mean_asymptotic_sd(1.0, 100) == pytest.approx(0.1)
        assert mean_asymptotic_sd(0.0, 7) == 0.0
        assert mean_asymptotic_sd(0.5, 200) == pytest.approx(0.05)

    def test_validation(self):
        with pytest.raises(ValueError):
            mean_asymptotic_sd(-1.0, 10)
        with pytest.raises(ValueError):
            mean_asymptotic_sd(1.0, 0)


class TestQuantileAsymptoticVar:
    def test_median_of_standard_normal_is_half_pi(self):
        f0 = float(stats.norm.pdf(0.0))
        assert quantile_asymptotic_var(0.5, f0) == pytest.approx(math.pi / 2,
                                                                 rel=1e-12)

    def test_symmetry_in_level(self):
        assert quantile_asymptotic_var(0.2, 0.3) == pytest.approx(
            quantile_asymptotic_var(0.8, 0.3), rel=1e-14)

    def test_upper_tail_value(self):
        z95 = float(stats.norm.ppf(0.95))
        f = float(stats.norm.pdf(z95))
        got = quantile_asymptotic_var(0.95, f)
        assert got == pytest.approx(0.95 * 0.05 / f**2, rel=1e-14)
        assert got == pytest.approx(4.4656, abs=5e-4)

    def test_zero_density_rejected(self):
        with pytest.raises(ValueError, match="Bahadur limit undefined"):
            quantile_asymptotic_var(0.5, 0.0)
