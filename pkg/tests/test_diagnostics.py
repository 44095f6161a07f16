import math
from dataclasses import dataclass

import numpy as np
import pytest
from scipy import stats

from predbayes.diagnostics import PpcReport, one_sided_p, ppc_replicates
from predbayes.diagnostics import test_stat as eval_stat
from predbayes.diagnostics import TestFunction as stat_fn
from predbayes.engines import gaussian_init
from predbayes.measures import Sample
from predbayes.rng import substream


class TestTestStat:
    def test_chi2_self_fitted_identity(self):
        # canary: with self-fitted ML moments the statistic is exactly n
        rng = substream(1)
        for n in (5, 57, 400):
            s = Sample(rng.standard_normal(n) * 13.7 + 4.0)
            assert eval_stat(stat_fn("chi2"), s) == pytest.approx(n, abs=1e-9)

    def test_chi2_with_supplied_fit(self):
        s = Sample.of([0.0, 1.0, 2.0])
        got = eval_stat(stat_fn("chi2"), s, fitted=(0.0, 1.0))
        assert got == pytest.approx(5.0)

    def test_skewness_symmetric_sample(self):
        assert eval_stat(stat_fn("sample_skewness"), Sample.of([-1, 0, 1])) == 0

    def test_skewness_gamma_monte_carlo(self):
        x = substream(2).gamma(2.0, 0.5, 100_000)
        got = eval_stat(stat_fn("sample_skewness"), Sample(x))
        assert got == pytest.approx(math.sqrt(2.0), abs=0.05)

    def test_skewness_needs_three_points(self):
        with pytest.raises(ValueError):
            eval_stat(stat_fn("sample_skewness"), Sample.of([1.0, 2.0]))

    def test_sample_variance_is_ml(self):
        assert eval_stat(stat_fn("sample_variance"), Sample.of([0, 2])) == 1.0

    def test_tail_abs_residual(self):
        s = Sample(np.linspace(-1, 1, 200))
        got = eval_stat(stat_fn("tail_abs_residual", q=0.5), s)
        assert got == np.sort(np.abs(s.values))[99]

    def test_mmd_identical_is_zero(self):
        s = Sample(substream(3).standard_normal(40))
        assert eval_stat(stat_fn("mmd"), s, reference=s) == 0.0

    def test_mmd_symmetric_nonnegative(self):
        a = Sample(substream(4).standard_normal(30))
        b = Sample(substream(5).standard_normal(35) + 1.0)
        d_ab = eval_stat(stat_fn("mmd"), a, reference=b)
        d_ba = eval_stat(stat_fn("mmd"), b, reference=a)
        assert d_ab == pytest.approx(d_ba, rel=1e-12)
        assert d_ab > 0

    def test_two_sample_requires_reference(self):
        with pytest.raises(ValueError, match="reference"):
            eval_stat(stat_fn("mmd"), Sample.of([1.0, 2.0]))

    def test_wasserstein_kind_delegates(self):
        a, b = Sample.of([0.0, 1.0]), Sample.of([1.0, 2.0])
        assert eval_stat(stat_fn("wasserstein1"), a, reference=b) == 1.0


@dataclass
class ReplayEngine:
    """Degenerate engine that replays the observed values verbatim."""

    values: np.ndarray
    pos: int = 0

    def draw(self, rng):
        v = self.values[self.pos % len(self.values)]
        return float(v)

    def update(self, z):
        return ReplayEngine(self.values, self.pos + 1)

    def label(self):
        return "replay"


class TestPpcReplicates:
    def test_well_specified_variance_stat_not_rejected(self):
        x = Sample(substream(6).standard_normal(200))
        rep = ppc_replicates(x, lambda s: gaussian_init(s, martingale_variance=True),
                             stat_fn("sample_variance"), 100, seed=60)
        assert rep.p > 0.05
        assert 0.0 <= rep.u <= 1.0
        assert rep.n_replicates == 100

    def test_gamma_skewness_detected(self):
        x = Sample(substream(7).gamma(2.0, 0.5, 200))
        rep = ppc_replicates(x, lambda s: gaussian_init(s, martingale_variance=True),
                             stat_fn("sample_skewness"), 100, seed=61)
        assert rep.p < 0.01
        assert np.mean(rep.deltas) < -5

    def test_degenerate_oracle_engine_tie_rules(self):
        x = Sample(substream(8).standard_normal(50))
        factory = lambda s: ReplayEngine(s.values)
        rep = ppc_replicates(x, factory, stat_fn("sample_variance"), 20,
                             seed=62, tie_rule="midrank")
        assert np.all(rep.s_rep == rep.s_obs)
        assert rep.u == 0.5 and rep.p == 1.0
        rep_ge = ppc_replicates(x, factory, stat_fn("sample_variance"), 20,
                                seed=62, tie_rule="ge")
        assert rep_ge.u == 1.0

    def test_p_in_unit_interval_and_two_sided_rule(self):
        x = Sample(substream(9).standard_normal(100))
        rep = ppc_replicates(x, gaussian_init, stat_fn("sample_skewness"),
                             40, seed=63)
        assert 0.0 <= rep.p <= 1.0
        assert rep.p == pytest.approx(2 * min(rep.u, 1 - rep.u))

    def test_two_sample_kind_runs(self):
        x = Sample(substream(10).standard_normal(60))
        rep = ppc_replicates(x, gaussian_init, stat_fn("mmd"), 25, seed=64,
                             reference_multiple=4)
        assert rep.sided == "one"
        assert 0.0 <= rep.p <= 0.5

    def test_deterministic(self):
        x = Sample(substream(11).standard_normal(80))
        r1 = ppc_replicates(x, gaussian_init, stat_fn("sample_variance"),
                            30, seed=65)
        r2 = ppc_replicates(x, gaussian_init, stat_fn("sample_variance"),
                            30, seed=65)
        assert np.array_equal(r1.s_rep, r2.s_rep)
        assert np.array_equal(r1.deltas, r2.deltas)

    def test_needs_enough_replicates(self):
        x = Sample(substream(12).standard_normal(50))
        with pytest.raises(ValueError):
            ppc_replicates(x, gaussian_init, stat_fn("sample_variance"),
                           10, seed=0)

    def test_u_near_uniform_when_well_specified(self):
        # two-sided skewness check on matched data: u over repeated datasets
        # should be close to uniform
        us = []
        for r in range(200):
            x = Sample(substream(66, r).standard_normal(100))
            rep = ppc_replicates(
                x, lambda s: gaussian_init(s, martingale_variance=True),
                stat_fn("sample_skewness"), 100, seed=67, stream=(r,))
            us.append(rep.u)
        ks = stats.kstest(us, "uniform").statistic
        assert ks < 0.12


class TestOneSidedP:
    def test_values(self):
        def rep(u):
            return PpcReport(s_obs=0.0, s_rep=np.zeros(20), u=u,
                             p=min(u, 1 - u), deltas=np.zeros(20), sided="one")

        assert one_sided_p(rep(0.5)) == 0.5
        assert one_sided_p(rep(0.01)) == pytest.approx(0.01)
        assert one_sided_p(rep(0.99)) == pytest.approx(0.01)

    def test_rejects_two_sided_report(self):
        r = PpcReport(s_obs=0.0, s_rep=np.zeros(20), u=0.5, p=1.0,
                      deltas=np.zeros(20), sided="two")
        with pytest.raises(ValueError):
            one_sided_p(r)
