"""Predictive-engine checks: test statistics, replicate generation, and
predictive p-values.

A fitted engine is asked to regenerate datasets of the observed size; where
the observed statistic falls inside the replicate distribution gives the
predictive p-value.  Each replicate path is also extended to a long horizon
and the scaled difference

    delta_b = sqrt(n) * (S(observed + path_b) - S(observed))

is recorded as a magnitude diagnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engines import GaussianEngine, advance_gaussian_paths
from .measures import Sample, empirical_quantile, w1_distance
from .resampler import run_path
from .rng import path_noise, substream

__all__ = [
    "TestFunction",
    "PpcReport",
    "test_stat",
    "ppc_replicates",
    "one_sided_p",
]

_ONE_SIDED_KINDS = frozenset({"chi2", "tail_abs_residual", "mmd", "wasserstein1"})
_TWO_SAMPLE_KINDS = frozenset({"mmd", "wasserstein1"})
_KINDS = frozenset({"sample_variance", "sample_skewness"}) | _ONE_SIDED_KINDS


@dataclass(frozen=True)
class TestFunction:
    """A scalar data summary used to probe the engine's replicates.

    ``tail_abs_residual`` takes the q-th empirical quantile of absolute
    values (default q = 0.995); ``mmd`` is the biased Gaussian-kernel
    V-statistic with a median-heuristic bandwidth unless one is given;
    ``mmd`` and ``wasserstein1`` compare against a reference sample, the
    others are one-sample statistics.
    """

    kind: str
    q: float = 0.995
    bandwidth: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown test function kind {self.kind!r}")
        if not (0.0 < self.q < 1.0):
            raise ValueError("tail level out of range")

    @property
    def two_sample(self) -> bool:
        return self.kind in _TWO_SAMPLE_KINDS

    @property
    def sided(self) -> str:
        return "one" if self.kind in _ONE_SIDED_KINDS else "two"

    def label(self) -> str:
        if self.kind == "tail_abs_residual":
            return f"tail_abs_residual({self.q:g})"
        return self.kind


def _skewness(values: np.ndarray) -> float:
    if values.size < 3:
        raise ValueError("skewness needs at least 3 observations")
    centered = values - values.mean()
    m2 = np.mean(centered**2)
    if m2 == 0.0:
        raise ValueError("skewness undefined for a constant sample")
    return float(np.mean(centered**3) / m2**1.5)


def _mmd(x: np.ndarray, y: np.ndarray, bandwidth: float | None) -> float:
    if bandwidth is None:
        pooled = np.concatenate([x, y])
        dist = np.abs(pooled[:, None] - pooled[None, :])
        med = np.median(dist[np.triu_indices_from(dist, k=1)])
        bandwidth = med if med > 0 else 1.0
    gamma = 0.5 / bandwidth**2

    def k_mean(a, b):
        return float(np.mean(np.exp(-gamma * (a[:, None] - b[None, :]) ** 2)))

    m2 = k_mean(x, x) + k_mean(y, y) - 2.0 * k_mean(x, y)
    return math.sqrt(max(m2, 0.0))


def test_stat(tf: TestFunction, s: Sample, reference: Sample | None = None,
              fitted: tuple[float, float] | None = None) -> float:
    """Evaluate a test function on a sample.

    ``fitted`` supplies an external (mean, variance) pair for the chi-square
    statistic; without it the sample's own ML moments are used, in which case
    the statistic is identically the sample size.
    """
    v = s.values
    if tf.kind == "sample_variance":
        return float(np.var(v))
    if tf.kind == "sample_skewness":
        return _skewness(v)
    if tf.kind == "chi2":
        if fitted is None:
            mu, sig2 = float(np.mean(v)), float(np.var(v))
        else:
            mu, sig2 = fitted
        if sig2 <= 0:
            raise ValueError("chi2 statistic needs positive variance")
        return float(np.sum((v - mu) ** 2) / sig2)
    if tf.kind == "tail_abs_residual":
        return empirical_quantile(Sample(np.abs(v)), tf.q)
    if reference is None:
        raise ValueError(f"{tf.kind} is two-sample and needs a reference sample")
    if tf.kind == "mmd":
        return _mmd(v, reference.values, tf.bandwidth)
    return w1_distance(s, reference)


@dataclass(frozen=True)
class PpcReport:
    """Observed statistic, replicate statistics, p-values, and differences."""

    s_obs: float
    s_rep: np.ndarray
    u: float
    p: float
    deltas: np.ndarray
    sided: str
    meta: dict = field(default_factory=dict)

    @property
    def n_replicates(self) -> int:
        return int(self.s_rep.size)


def _u_value(s_rep: np.ndarray, s_obs: float, tie_rule: str) -> float:
    if tie_rule == "ge":
        return float(np.mean(s_rep >= s_obs))
    if tie_rule == "midrank":
        return float((np.sum(s_rep > s_obs) + 0.5 * np.sum(s_rep == s_obs)) / s_rep.size)
    raise ValueError(f"unknown tie rule {tie_rule!r}")


def _p_value(u: float, sided: str) -> float:
    return 2.0 * min(u, 1.0 - u) if sided == "two" else min(u, 1.0 - u)


def ppc_replicates(x_obs: Sample, engine_factory, tf: TestFunction, B: int,
                   seed: int, stream: tuple[int, ...] = (),
                   delta_exponent: float = 1.5, reference_multiple: int = 10,
                   tie_rule: str = "ge") -> PpcReport:
    """Predictive check of an engine against the observed data.

    For each of B replicates a fresh engine is fit to ``x_obs`` and run
    forward; the first n simulated values form the size-n replicate scored
    by ``tf``, and the full path of ceil(n^delta_exponent) values joins the
    observed sample for the scaled difference statistics.  Two-sample test
    functions are scored against a long engine run of ``reference_multiple``
    times n values that stands in for the engine's stationary law.
    """
    if B < 20:
        raise ValueError("need at least 20 replicates")
    n = x_obs.size
    n_sim = math.ceil(n**delta_exponent)
    if n_sim < n:
        raise ValueError("delta horizon shorter than the observed size")

    reference = None
    if tf.two_sample:
        ref_path, _ = _simulate_paths(x_obs, engine_factory, 1,
                                      reference_multiple * n, seed, (*stream, 937))
        reference = Sample(ref_path[0])

    values, _ = _simulate_paths(x_obs, engine_factory, B, n_sim, seed, stream)

    def score(sample_values: np.ndarray) -> float:
        return test_stat(tf, Sample(sample_values), reference=reference)

    s_obs = score(x_obs.values)
    s_rep = np.array([score(values[b, :n]) for b in range(B)])
    pooled = np.concatenate([np.broadcast_to(x_obs.values, (B, n)), values], axis=1)
    deltas = np.array([math.sqrt(n) * (score(pooled[b]) - s_obs) for b in range(B)])

    u = _u_value(s_rep, s_obs, tie_rule)
    sided = tf.sided
    return PpcReport(
        s_obs=s_obs, s_rep=s_rep, u=u, p=_p_value(u, sided), deltas=deltas,
        sided=sided,
        meta={"n": n, "B": B, "n_sim": n_sim, "seed": seed, "stream": stream,
              "test_function": tf.label(), "tie_rule": tie_rule},
    )


def _simulate_paths(x_obs, engine_factory, B, n_steps, seed, stream):
    """(B, n_steps) matrix of simulated values, one engine restart per row."""
    engine = engine_factory(x_obs)
    if isinstance(engine, GaussianEngine):
        eps = path_noise(seed, stream, B, n_steps)
        _, _, values, _ = advance_gaussian_paths(engine, eps, keep_values=True)
        return values, engine
    values = np.empty((B, n_steps))
    for b in range(B):
        rng = substream(seed, *stream, b)
        path, _ = run_path(engine_factory(x_obs), n_steps, rng)
        values[b] = path.values
    return values, engine


def one_sided_p(report: PpcReport) -> float:
    """min(u, 1 - u) for statistics that only make sense one-sided."""
    if report.sided != "one":
        raise ValueError("report is not one-sided")
    return _p_value(report.u, "one")
