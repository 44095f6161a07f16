import math

import numpy as np
import pytest

from predbayes.engines import (BiasSchedule, GaussianEngine, QuadratureError,
                               QuadratureSpec,
                               advance_gaussian_paths, advance_polya_paths,
                               gaussian_draw, gaussian_init, gaussian_update,
                               polya_init, tv_probe, tv_scan)
from predbayes.measures import Sample
from predbayes.rng import path_noise, path_uniforms, substream

VAR_ONLY = frozenset({"variance"})


class TestBiasSchedule:
    def test_values(self):
        assert BiasSchedule("inv_t").value(4, 1.0) == 0.25
        assert BiasSchedule("inv_sqrt_t").value(4, 1.0) == 0.5
        assert BiasSchedule("const_over_N", 200).value(99, 1.0) == 0.005
        assert BiasSchedule("proportional", -0.5).value(10, 2.0) == -1.0
        assert BiasSchedule("none").value(10, 2.0) == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            BiasSchedule("quadratic")
        with pytest.raises(ValueError):
            BiasSchedule("proportional")
        with pytest.raises(ValueError):
            BiasSchedule("none", applies_to=frozenset())


class TestGaussianInit:
    def test_two_points(self):
        e = gaussian_init(Sample.of([0, 2]))
        assert (e.mu, e.sigma, e.t) == (1.0, 1.0, 2)

    def test_degenerate_constant_sample(self):
        e = gaussian_init(Sample.of([3.0, 3.0, 3.0]))
        assert (e.mu, e.sigma, e.t) == (3.0, 0.0, 3)

    def test_monte_carlo_sanity(self):
        rng = substream(123, 1)
        e = gaussian_init(Sample(rng.standard_normal(100)))
        assert abs(e.mu) < 0.3 and abs(e.sigma - 1.0) < 0.3

    def test_needs_two_observations(self):
        with pytest.raises(ValueError, match="need >= 2 observations"):
            gaussian_init(Sample.of([1.0]))


class TestGaussianDraw:
    def test_zero_variance_draw_is_mean(self):
        e = GaussianEngine(mu=2.5, sigma=0.0, t=5)
        assert gaussian_draw(e, substream(0)) == 2.5

    def test_proportional_half_negative(self):
        e = GaussianEngine(mu=0.0, sigma=1.0, t=10,
                           schedule_var=BiasSchedule("proportional", -0.5, VAR_ONLY))
        _, v, _ = e.draw_params()
        assert v == 0.5

    def test_inv_t_at_large_t(self):
        e = GaussianEngine(mu=0.0, sigma=1.0, t=1000,
                           schedule_var=BiasSchedule("inv_t", applies_to=VAR_ONLY))
        _, v, _ = e.draw_params()
        assert v == pytest.approx(1.001, abs=1e-12)

    def test_negative_variance_clamped_and_flagged(self):
        e = GaussianEngine(mu=0.0, sigma=1.0, t=10,
                           schedule_var=BiasSchedule("proportional", -2.0, VAR_ONLY))
        m, v, clamped = e.draw_params()
        assert v == 0.0 and clamped
        e2 = gaussian_update(e, gaussian_draw(e, substream(1)))
        assert e2.clamped


class TestGaussianUpdate:
    def test_center_draw(self):
        e2 = gaussian_update(GaussianEngine(0.0, 1.0, 1), 0.0)
        assert (e2.mu, e2.sigma, e2.t) == (0.0, 0.5, 2)

    def test_offset_draw(self):
        e2 = gaussian_update(GaussianEngine(0.0, 1.0, 1), 2.0)
        assert (e2.mu, e2.sigma, e2.t) == (1.0, 1.5, 2)

    def test_repeated_mean_draws_shrink_sigma_telescopically(self):
        e = GaussianEngine(mu=1.5, sigma=2.0, t=7)
        k = 13
        state = e
        for _ in range(k):
            state = gaussian_update(state, e.mu)
        assert state.sigma == pytest.approx(2.0 * 7 / (7 + k), rel=1e-12)
        assert state.mu == e.mu

    def test_conservation_recursion_equals_batch_moments(self):
        rng = substream(9)
        x = rng.standard_normal(50)
        state = gaussian_init(Sample(x))
        z = rng.standard_normal(200)
        for val in z:
            state = gaussian_update(state, val)
        both = np.concatenate([x, z])
        assert state.mu == pytest.approx(both.mean(), abs=1e-10)
        assert state.sigma == pytest.approx(both.var(), abs=1e-10)
        assert state.t == both.size


class TestVectorizedKernel:
    def test_matches_scalar_chain_exactly(self):
        state = gaussian_init(Sample.of([0.1, -0.4, 2.0, 1.1]),
                              BiasSchedule("proportional", -0.5, VAR_ONLY))
        eps = path_noise(77, (1,), 3, 25)
        mu, sigma, values, _ = advance_gaussian_paths(state, eps.copy(),
                                                      keep_values=True)
        for b in range(3):
            s = state
            for j in range(25):
                m, v, _ = s.draw_params()
                z = m + math.sqrt(v) * eps[b, j]
                assert values[b, j] == pytest.approx(z, rel=1e-15)
                s = gaussian_update(s, z)
            assert mu[b] == pytest.approx(s.mu, rel=1e-14)
            assert sigma[b] == pytest.approx(s.sigma, rel=1e-14)

    def test_clamp_flag_propagates(self):
        state = GaussianEngine(0.0, 1.0, 5,
                               schedule_var=BiasSchedule("proportional", -2.0, VAR_ONLY))
        eps = path_noise(3, (), 2, 4)
        *_, clamped = advance_gaussian_paths(state, eps)
        assert clamped

    def test_mu_martingale(self):
        data = Sample(substream(5).standard_normal(100))
        state = gaussian_init(data)
        eps = path_noise(6, (), 2000, 1000)
        mu, _, _, _ = advance_gaussian_paths(state, eps)
        bound = 4.0 * math.sqrt(state.sigma / state.t)
        assert abs(mu.mean() - state.mu) < bound

    def test_martingale_variance_flag_removes_sigma_drift(self):
        data = Sample(substream(15).standard_normal(200))
        eps = path_noise(16, (), 3000, 2000)
        plain = gaussian_init(data)
        fixed = gaussian_init(data, martingale_variance=True)
        sig_plain = advance_gaussian_paths(plain, eps.copy())[1].mean()
        sig_fixed = advance_gaussian_paths(fixed, eps.copy())[1].mean()
        n, m = 200, 2200
        drift_factor = n * (m + 1) / ((n + 1) * m)
        assert sig_plain / plain.sigma == pytest.approx(drift_factor, abs=2e-3)
        assert sig_fixed / plain.sigma == pytest.approx(1.0, abs=2e-3)

    def test_frozen_variance(self):
        state = GaussianEngine(0.0, 2.0, 10, frozen_variance=True)
        eps = path_noise(8, (), 4, 50)
        _, sigma, _, _ = advance_gaussian_paths(state, eps)
        assert np.all(sigma == 2.0)


class TestDeterminism:
    def test_identical_seed_identical_paths(self):
        state = gaussian_init(Sample.of([0.0, 1.0, 2.0]))
        a = advance_gaussian_paths(state, path_noise(42, (1, 2), 5, 30),
                                   keep_values=True)[2]
        b = advance_gaussian_paths(state, path_noise(42, (1, 2), 5, 30),
                                   keep_values=True)[2]
        assert np.array_equal(a, b)

    def test_scalar_draw_deterministic(self):
        e = GaussianEngine(0.0, 1.0, 3)
        assert gaussian_draw(e, substream(1, 2)) == gaussian_draw(e, substream(1, 2))


class TestPolyaUrn:
    def test_draws_come_from_pool(self):
        e = polya_init(Sample.of([1.0, 2.0, 3.0]))
        rng = substream(0)
        for _ in range(5):
            z = e.draw(rng)
            assert z in (1.0, 2.0, 3.0)
            e = e.update(z)
        assert e.t == 8

    def test_vectorized_paths_draw_from_history(self):
        x = np.array([5.0, -1.0])
        u = path_uniforms(11, (), 4, 30)
        values = advance_polya_paths(x, u)
        pool = set(x.tolist())
        for b in range(4):
            for j in range(30):
                assert values[b, j] in pool or values[b, j] in set(values[b, :j])

    def test_deterministic(self):
        x = np.array([0.0, 1.0, 2.0])
        a = advance_polya_paths(x, path_uniforms(3, (7,), 6, 40))
        b = advance_polya_paths(x, path_uniforms(3, (7,), 6, 40))
        assert np.array_equal(a, b)


class TestTvProbe:
    def test_identical_laws_give_zero(self):
        # enormous t: the one- and two-step laws coincide to double precision
        d = tv_probe(GaussianEngine(0.0, 1.0, 10**9), BiasSchedule("none"))
        assert d < 1e-10

    def test_unbiased_small_at_large_t(self):
        d = tv_probe(GaussianEngine(0.0, 1.0, 10**6), BiasSchedule("none"))
        assert d < 1e-5

    def test_unbiased_quadratic_decay(self):
        d1 = tv_probe(GaussianEngine(0.0, 1.0, 100), BiasSchedule("none"))
        d2 = tv_probe(GaussianEngine(0.0, 1.0, 200), BiasSchedule("none"))
        assert 0.15 < d2 / d1 < 0.4

    def test_inv_sqrt_bias_tracks_bound(self):
        sched = BiasSchedule("inv_sqrt_t")
        d_small = tv_probe(GaussianEngine(0.0, 1.0, 100), sched)
        d_large = tv_probe(GaussianEngine(0.0, 1.0, 10_000), sched)
        bound = lambda t: 1 / t**2 + (1 / math.sqrt(t)) / t + abs(
            1 / math.sqrt(t + 1) - 1 / math.sqrt(t))
        measured = d_large / d_small
        predicted = bound(10_000) / bound(100)
        assert predicted / 5 < measured < predicted * 5

    def test_positive_variance_required(self):
        with pytest.raises(ValueError):
            tv_probe(GaussianEngine(0.0, 0.0, 10), BiasSchedule("none"))

    def test_refinement_failure_raises_with_diagnostic(self):
        spec = QuadratureSpec(gh_order=2, grid_points=9, rel_tol=1e-12, abs_tol=0.0)
        with pytest.raises(QuadratureError, match="did not converge"):
            tv_probe(GaussianEngine(0.0, 1.0, 10), BiasSchedule("inv_sqrt_t"), spec)


class TestTvScan:
    def test_partial_sums_monotone_and_bound_terms(self):
        rows = tv_scan(BiasSchedule("const_over_N", 2.0), [100, 200, 400])
        sums = [r["partial_sum"] for r in rows]
        assert sums == sorted(sums)
        # constant c = 0.5: bound term is 1/t^2 + 0.5/t
        assert rows[0]["bound_term"] == pytest.approx(1 / 100**2 + 0.5 / 100)
