import math

import numpy as np
import pytest
from scipy import stats

from predbayes.engines import GaussianEngine, advance_gaussian_paths, gaussian_init
from predbayes.functionals import FunctionalSpec
from predbayes.measures import Sample
from predbayes.resampler import (Horizon, ResampleConfig, covers,
                                 credible_interval, pbp_sample, run_path)
from predbayes.rng import path_noise, substream


class TestHorizon:
    def test_power_rule(self):
        assert Horizon.power(1.5).total_for(100) == 1000
        assert Horizon.power(1.5).total_for(500) == 11181

    def test_fixed_rule(self):
        assert Horizon.fixed_total(400).total_for(100) == 400

    def test_must_exceed_sample_size(self):
        with pytest.raises(ValueError):
            Horizon.fixed_total(100).total_for(100)
        with pytest.raises(ValueError):
            Horizon.power(0.9).total_for(50)


class TestRunPath:
    def test_degenerate_engine_constant_path(self):
        state = GaussianEngine(mu=4.0, sigma=0.0, t=3)
        path, final = run_path(state, 20, substream(0))
        assert np.all(path.values == 4.0)
        assert final.t == 23

    def test_single_step_law(self):
        state = GaussianEngine(mu=1.0, sigma=4.0, t=10)
        draws = [run_path(state, 1, substream(1, i))[0].values[0]
                 for i in range(3000)]
        assert np.mean(draws) == pytest.approx(1.0, abs=0.15)
        assert np.var(draws) == pytest.approx(4.0, rel=0.1)

    def test_same_stream_same_path(self):
        state = gaussian_init(Sample.of([0.0, 1.0]))
        p1, _ = run_path(state, 50, substream(7, 1))
        p2, _ = run_path(state, 50, substream(7, 1))
        assert np.array_equal(p1.values, p2.values)

    def test_positive_steps_required(self):
        with pytest.raises(ValueError):
            run_path(GaussianEngine(0.0, 1.0, 2), 0, substream(0))


class TestPbpSample:
    def test_degenerate_data_constant_draws(self):
        x = Sample.of([2.0] * 10)
        cfg = ResampleConfig(n_paths=25, seed=3)
        draws = pbp_sample(x, gaussian_init, FunctionalSpec("mean"), cfg)
        assert np.all(draws.values == 2.0)

    def test_martingale_centering_and_spread(self):
        x = Sample(substream(11).standard_normal(100))
        cfg = ResampleConfig(n_paths=2000, seed=12)
        draws = pbp_sample(x, gaussian_init, FunctionalSpec("mean"), cfg)
        n = 100
        sd_x = math.sqrt(np.var(x.values))
        assert abs(draws.values.mean() - x.values.mean()) < 4 * sd_x / math.sqrt(n)
        # posterior variance approaches sigma_n / n
        assert draws.values.var() == pytest.approx(np.var(x.values) / n, rel=0.25)

    def test_draw_count_and_meta(self):
        x = Sample(substream(1).standard_normal(30))
        cfg = ResampleConfig(n_paths=40, seed=2)
        draws = pbp_sample(x, gaussian_init, FunctionalSpec("quantile", 0.5), cfg)
        assert draws.n_paths == 40
        assert draws.meta["N"] == Horizon.power(1.5).total_for(30)
        assert draws.meta["n"] == 30

    def test_vector_functional(self):
        x = Sample(substream(2).standard_normal(50))
        cfg = ResampleConfig(n_paths=30, seed=5)
        draws = pbp_sample(x, gaussian_init, FunctionalSpec("mean_and_variance"), cfg)
        assert draws.values.shape == (30, 2)

    def test_generic_engine_matches_fast_path_flatten(self):
        # quantile draws evaluated through the vectorized route equal a
        # manual flatten-and-select on the same innovations
        x = Sample(substream(21).standard_normal(25))
        cfg = ResampleConfig(n_paths=8, seed=22, stream=(4,))
        draws = pbp_sample(x, gaussian_init, FunctionalSpec("quantile", 0.7), cfg)
        total = Horizon.power(1.5).total_for(25)
        steps = total - 25
        eps = path_noise(22, (4,), 8, steps)
        _, _, values, _ = advance_gaussian_paths(gaussian_init(x), eps,
                                                 keep_values=True)
        k = math.ceil(0.7 * total)
        for b in range(8):
            flat = np.sort(np.concatenate([x.values, values[b]]))
            assert draws.values[b] == flat[k - 1]

    def test_path_relabelling_preserves_order_statistics(self):
        x = Sample(substream(31).standard_normal(40))
        cfg = ResampleConfig(n_paths=16, seed=33, stream=(2,))
        draws = pbp_sample(x, gaussian_init, FunctionalSpec("mean"), cfg)
        # recompute each path independently, in permuted order
        perm = np.random.default_rng(0).permutation(16)
        steps = cfg.horizon.total_for(40) - 40
        single = {}
        for b in perm:
            eps = path_noise(33, (2,), 1, steps, first_path=int(b))
            mu, *_ = advance_gaussian_paths(gaussian_init(x), eps)
            single[int(b)] = mu[0]
        permuted = np.array([single[int(b)] for b in perm])
        assert not np.array_equal(permuted, draws.values)  # order changed
        np.testing.assert_allclose(np.sort(permuted), np.sort(draws.values),
                                   rtol=1e-12)

    def test_spread_already_converged_in_horizon(self):
        x = Sample(substream(41).standard_normal(100))
        f = FunctionalSpec("mean")
        short = pbp_sample(x, gaussian_init, f,
                           ResampleConfig(800, 55, Horizon.fixed_total(1000)))
        long = pbp_sample(x, gaussian_init, f,
                          ResampleConfig(800, 55, Horizon.fixed_total(4000)))
        iqr_s = np.subtract(*np.percentile(short.values, [75, 25]))
        iqr_l = np.subtract(*np.percentile(long.values, [75, 25]))
        assert abs(iqr_l - iqr_s) / iqr_s < 0.15

    def test_draw_deviations_shrink_with_horizon(self):
        # same innovations continue each path: increments fall off as the
        # horizon grows
        x = Sample(substream(43).standard_normal(100))
        state = gaussian_init(x)
        eps = path_noise(44, (), 300, 16_000)
        mu1, *_ = advance_gaussian_paths(state, eps[:, :1000])
        mu2, *_ = advance_gaussian_paths(state, eps[:, :4000])
        mu3, *_ = advance_gaussian_paths(state, eps[:, :16_000])
        inc1 = np.mean(np.abs(mu2 - mu1))
        inc2 = np.mean(np.abs(mu3 - mu2))
        assert inc2 < 0.7 * inc1


class TestCredibleInterval:
    def test_constant_draws(self):
        ci = credible_interval(np.full(500, 3.25), 0.05)
        assert tuple(ci) == (3.25, 3.25)

    def test_order_statistic_rule_on_integers(self):
        ci = credible_interval(np.arange(1.0, 101.0), 0.05)
        assert tuple(ci) == (3.0, 98.0)

    def test_normal_draws_recover_z_quantiles(self):
        draws = substream(51).standard_normal(100_000)
        ci = credible_interval(draws, 0.05)
        z = float(stats.norm.ppf(0.975))
        assert ci[0] == pytest.approx(-z, abs=0.03)
        assert ci[1] == pytest.approx(z, abs=0.03)

    def test_insufficient_draws(self):
        with pytest.raises(ValueError, match="insufficient draws"):
            credible_interval(np.arange(30.0), 0.05)

    def test_width_monotone_in_alpha(self):
        draws = substream(52).standard_normal(5000)
        widths = []
        for alpha in (0.01, 0.02, 0.05, 0.1, 0.2, 0.5):
            lo, hi = credible_interval(draws, alpha)
            widths.append(hi - lo)
        assert all(w1 >= w2 for w1, w2 in zip(widths, widths[1:]))

    def test_vector_draws(self):
        draws = substream(53).standard_normal((2000, 2))
        ci = credible_interval(draws, 0.05)
        assert ci.shape == (2, 2)


class TestCovers:
    def test_inside(self):
        assert covers((0.0, 1.0), 0.5)

    def test_closed_endpoint(self):
        assert covers((0.0, 1.0), 1.0)

    def test_outside(self):
        assert not covers((0.0, 1.0), 1.0000001)

    def test_bad_interval(self):
        with pytest.raises(ValueError):
            covers((1.0, 0.0), 0.5)
