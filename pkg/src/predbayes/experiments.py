"""Monte Carlo studies: coverage calibration of resampling posteriors,
repeated-sample predictive checks, path fans, and limit-formula probes.

Every study fans out over independent replicate datasets, keyed by the
substream tree (seed, experiment id, cell index, replicate index, ...), so
results are reproducible bit-for-bit for any worker count.
"""

from __future__ import annotations

import math
import multiprocessing
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats as sps

from .diagnostics import PpcReport, TestFunction, ppc_replicates
from .engines import (BiasSchedule, GaussianEngine, advance_gaussian_paths,
                      gaussian_init, polya_init)
from .functionals import FunctionalSpec, coverage_limit, quantile_asymptotic_var
from .measures import Sample, empirical_quantile
from .regression import (CovariateResampler, TailCorrection,
                         estimate_tail_covariance, gauss_reg_init, hybrid_finalize,
                         reg_step, treg_init)
from .resampler import Horizon, ResampleConfig, covers, credible_interval, pbp_sample
from .rng import path_noise, substream

__all__ = [
    "Dgp",
    "ExperimentSummary",
    "PathFan",
    "bias_from_label",
    "run_mean_coverage",
    "run_quantile_coverage",
    "run_ppc_study",
    "run_path_fan",
    "run_coverage_formula_link",
    "run_bahadur_check",
    "run_regression_ppc",
    "synthetic_regression",
]

_EXP_PATH_FAN = 1
_EXP_MEAN_COVERAGE = 2
_EXP_QUANTILE = 3
_EXP_PPC = 4
_EXP_REGRESSION = 5
_EXP_LINK = 6
_EXP_BAHADUR = 7


# ---------------------------------------------------------------------------
# data-generating processes


@dataclass(frozen=True)
class Dgp:
    """Normal or Gamma data-generating process with exact truth accessors."""

    kind: str
    mu: float = 0.0
    var: float = 1.0
    shape: float = 2.0
    rate: float = 2.0

    @classmethod
    def normal(cls, mu: float = 0.0, var: float = 1.0) -> "Dgp":
        if var <= 0:
            raise ValueError("variance must be positive")
        return cls(kind="normal", mu=mu, var=var)

    @classmethod
    def gamma(cls, shape: float = 2.0, rate: float | None = None,
              scale: float | None = None) -> "Dgp":
        if rate is not None and scale is not None:
            raise ValueError("give rate or scale, not both")
        if rate is None:
            rate = 1.0 / scale if scale is not None else 2.0
        if shape <= 0 or rate <= 0:
            raise ValueError("shape and rate must be positive")
        return cls(kind="gamma", shape=shape, rate=rate)

    def _frozen(self):
        if self.kind == "normal":
            return sps.norm(loc=self.mu, scale=math.sqrt(self.var))
        return sps.gamma(a=self.shape, scale=1.0 / self.rate)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "normal":
            return self.mu + math.sqrt(self.var) * rng.standard_normal(size)
        return rng.gamma(self.shape, 1.0 / self.rate, size)

    @property
    def true_mean(self) -> float:
        return self.mu if self.kind == "normal" else self.shape / self.rate

    @property
    def true_variance(self) -> float:
        return self.var if self.kind == "normal" else self.shape / self.rate**2

    def true_quantile(self, q: float) -> float:
        return float(self._frozen().ppf(q))

    def true_density_at(self, x: float) -> float:
        return float(self._frozen().pdf(x))

    def label(self) -> str:
        if self.kind == "normal":
            return f"normal({self.mu:g},{self.var:g})"
        return f"gamma({self.shape:g},rate={self.rate:g})"


def bias_from_label(label: str) -> BiasSchedule:
    """Bias schedules by the names used in study configs.

    ``none``, ``half_neg`` (-sigma_t/2 on the variance), ``prop1``
    (+sigma_t on the variance), ``inv_t``, ``inv_sqrt_t``,
    ``const_over_N:<N>``, ``prop:<gamma>``.
    """
    if label == "none":
        return BiasSchedule("none")
    if label == "half_neg":
        return BiasSchedule("proportional", -0.5, frozenset({"variance"}))
    if label == "prop1":
        return BiasSchedule("proportional", 1.0, frozenset({"variance"}))
    if label in ("inv_t", "inv_sqrt_t"):
        return BiasSchedule(label)
    if label.startswith("const_over_N:"):
        return BiasSchedule("const_over_N", float(label.split(":", 1)[1]))
    if label.startswith("prop:"):
        return BiasSchedule("proportional", float(label.split(":", 1)[1]),
                            frozenset({"variance"}))
    raise ValueError(f"unknown bias label {label!r}")


# ---------------------------------------------------------------------------
# summaries and the replicate fan-out


@dataclass
class ExperimentSummary:
    """Table of per-cell results plus the config that produced them.

    ``runtime`` is wall-clock seconds and is never written to output files.
    """

    columns: list
    rows: list
    config: dict = field(default_factory=dict)
    runtime: float = 0.0


def _mc_se(p: float, reps: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / reps)


def _map_reps(worker, args_list, workers: int):
    if workers <= 1 or len(args_list) <= 1:
        return [worker(a) for a in args_list]
    method = "fork" if "fork" in multiprocessing.get_all_start_methods() else "spawn"
    ctx = multiprocessing.get_context(method)
    with ctx.Pool(min(workers, len(args_list))) as pool:
        return pool.map(worker, args_list, chunksize=1)


# ---------------------------------------------------------------------------
# mean-functional coverage


def _mean_coverage_rep(args):
    dgp, n, schedule, B, alpha, seed, cell, r, horizon = args
    data = Sample(dgp.sample(substream(seed, _EXP_MEAN_COVERAGE, cell, r, 0), n))
    cfg = ResampleConfig(n_paths=B, seed=seed, horizon=horizon,
                         stream=(_EXP_MEAN_COVERAGE, cell, r, 1))
    draws = pbp_sample(data, lambda s: gaussian_init(s, schedule),
                       FunctionalSpec("mean"), cfg)
    ci = credible_interval(draws, alpha)
    return covers(ci, dgp.true_mean), float(ci[1] - ci[0])


def run_mean_coverage(dgp: Dgp, n_list, bias_list, R: int, B: int,
                      alpha: float = 0.05, seed: int = 0,
                      horizon: Horizon = Horizon.power(1.5),
                      workers: int = 1) -> ExperimentSummary:
    """Monte Carlo coverage of equal-tailed mean intervals across bias settings."""
    t0 = time.perf_counter()
    rows = []
    cell = 0
    for n in n_list:
        for bias in bias_list:
            schedule = bias_from_label(bias) if isinstance(bias, str) else bias
            args = [(dgp, n, schedule, B, alpha, seed, cell, r, horizon)
                    for r in range(R)]
            results = _map_reps(_mean_coverage_rep, args, workers)
            cov = float(np.mean([c for c, _ in results]))
            width = float(np.mean([w for _, w in results]))
            rows.append({
                "dgp": dgp.label(), "n": n,
                "bias": bias if isinstance(bias, str) else bias.label(),
                "coverage": cov, "avg_width": width,
                "mc_se": _mc_se(cov, R), "R": R, "B": B,
            })
            cell += 1
    cols = ["dgp", "n", "bias", "coverage", "avg_width", "mc_se", "R", "B"]
    cfg = {"experiment": "mean_coverage", "dgp": dgp.label(), "n": list(n_list),
           "bias": [b if isinstance(b, str) else b.label() for b in bias_list],
           "R": R, "B": B, "alpha": alpha, "seed": seed,
           "horizon": horizon.label()}
    return ExperimentSummary(cols, rows, cfg, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# quantile-functional coverage


def _quantile_rep(args):
    dgp, n, q_list, B, alpha, seed, cell, r, horizon = args
    data = Sample(dgp.sample(substream(seed, _EXP_QUANTILE, cell, r, 0), n))
    total = horizon.total_for(n)
    steps = total - n
    # drift-free draw spread: keeps path variances centered on the fit, so
    # quantile bias reflects engine misspecification rather than the small-n
    # decay of the variance recursion
    engine = gaussian_init(data, martingale_variance=True)
    out = []
    # one set of paths serves every quantile level
    eps = path_noise(seed, (_EXP_QUANTILE, cell, r, 1), B, steps)
    _, _, values, _ = advance_gaussian_paths(engine, eps, keep_values=True)
    flat = np.concatenate([np.broadcast_to(data.values, (B, n)), values], axis=1)
    for q in q_list:
        k = math.ceil(q * total)
        draws = np.partition(flat, k - 1, axis=1)[:, k - 1]
        ci = credible_interval(draws, alpha)
        truth = dgp.true_quantile(q)
        out.append((covers(ci, truth), float(np.mean(draws)) - truth))
    return out


def run_quantile_coverage(dgp: Dgp, n_list, q_list, R: int, B: int,
                          alpha: float = 0.05, seed: int = 0,
                          horizon: Horizon = Horizon.power(1.5),
                          workers: int = 1) -> ExperimentSummary:
    """Coverage and bias of resampled quantile posteriors.

    Bias is the average over datasets of (mean posterior draw - true
    quantile).  Paths are shared across the requested quantile levels
    within each dataset.
    """
    t0 = time.perf_counter()
    rows = []
    for cell, n in enumerate(n_list):
        args = [(dgp, n, tuple(q_list), B, alpha, seed, cell, r, horizon)
                for r in range(R)]
        results = _map_reps(_quantile_rep, args, workers)
        for j, q in enumerate(q_list):
            cov = float(np.mean([res[j][0] for res in results]))
            bias = float(np.mean([res[j][1] for res in results]))
            rows.append({
                "dgp": dgp.label(), "q": q, "n": n, "coverage": cov,
                "bias": bias, "mc_se": _mc_se(cov, R), "R": R, "B": B,
            })
    cols = ["dgp", "q", "n", "coverage", "bias", "mc_se", "R", "B"]
    cfg = {"experiment": "quantile_coverage", "dgp": dgp.label(),
           "n": list(n_list), "q": list(q_list), "R": R, "B": B,
           "alpha": alpha, "seed": seed, "horizon": horizon.label()}
    return ExperimentSummary(cols, rows, cfg, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# repeated-sample predictive checks


def _ppc_rep(args):
    dgp, n, tf_list, B, seed, cell, r, delta_exponent = args
    data = Sample(dgp.sample(substream(seed, _EXP_PPC, cell, r, 0), n))

    def factory(s):
        # drift-free draw spread keeps replicate moments centered on the fit
        return gaussian_init(s, martingale_variance=True)

    out = []
    for tf in tf_list:
        rep = ppc_replicates(data, factory, tf, B, seed,
                             stream=(_EXP_PPC, cell, r, 1),
                             delta_exponent=delta_exponent)
        out.append((rep.p, float(np.mean(rep.deltas))))
    return out


def run_ppc_study(dgp: Dgp, n_list, tf_list, R: int, B: int, seed: int = 0,
                  delta_exponent: float = 1.5, level: float = 0.05,
                  workers: int = 1) -> ExperimentSummary:
    """Median p-value, rejection rate, and average scaled difference of the
    predictive check across repeated datasets."""
    t0 = time.perf_counter()
    tf_list = [TestFunction(tf) if isinstance(tf, str) else tf for tf in tf_list]
    rows = []
    for cell, n in enumerate(n_list):
        args = [(dgp, n, tuple(tf_list), B, seed, cell, r, delta_exponent)
                for r in range(R)]
        results = _map_reps(_ppc_rep, args, workers)
        for j, tf in enumerate(tf_list):
            ps = np.array([res[j][0] for res in results])
            avg_d = float(np.mean([res[j][1] for res in results]))
            rate = float(np.mean(ps < level))
            rows.append({
                "dgp": dgp.label(), "n": n, "stat": tf.label(),
                "median_p": float(np.median(ps)), "rejection_rate": rate,
                "avg_diff": avg_d, "mc_se": _mc_se(rate, R), "R": R, "B": B,
            })
    cols = ["dgp", "n", "stat", "median_p", "rejection_rate", "avg_diff",
            "mc_se", "R", "B"]
    cfg = {"experiment": "ppc_study", "dgp": dgp.label(), "n": list(n_list),
           "stat": [tf.label() for tf in tf_list], "R": R, "B": B,
           "level": level, "seed": seed, "delta_exponent": delta_exponent}
    return ExperimentSummary(cols, rows, cfg, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# path fans


@dataclass
class PathFan:
    """Per-step functional trajectories plus pointwise summaries.

    ``mean_paths`` and ``var_paths`` hold the retained trajectories, shape
    (keep, steps + 1) including the starting value.  Band columns are the
    pointwise quantiles over all simulated paths.
    """

    t_axis: np.ndarray
    mean_paths: np.ndarray
    var_paths: np.ndarray
    mean_summary: dict
    var_summary: dict
    observed_mean: float
    observed_var: float
    config: dict = field(default_factory=dict)
    runtime: float = 0.0


_BAND_QS = (0.025, 0.25, 0.5, 0.75, 0.975)


def _band_summary(paths: np.ndarray) -> dict:
    qs = np.quantile(paths, _BAND_QS, axis=0)
    return {"q025": qs[0], "q25": qs[1], "median": qs[2], "q75": qs[3],
            "q975": qs[4]}


def run_path_fan(data, schedule, steps: int, B: int, keep: int,
                 seed: int = 0, n_obs: int = 10,
                 martingale_variance: bool = False) -> PathFan:
    """Simulate forward trajectories of the running mean and variance.

    ``data`` is a :class:`Sample` or a :class:`Dgp` from which ``n_obs``
    points are drawn.  The first ``keep`` paths are retained for plotting;
    pointwise bands use all B paths.
    """
    t0 = time.perf_counter()
    if keep > B:
        raise ValueError("cannot retain more paths than were simulated")
    if isinstance(data, Dgp):
        obs = Sample(data.sample(substream(seed, _EXP_PATH_FAN, 0, 0, 0), n_obs))
    else:
        obs = data
    engine = gaussian_init(obs, schedule, martingale_variance=martingale_variance)
    n = obs.size
    mu_t = np.empty((B, steps + 1))
    sig_t = np.empty((B, steps + 1))
    mu_t[:, 0] = engine.mu
    sig_t[:, 0] = engine.sigma
    if steps > 0:
        eps = path_noise(seed, (_EXP_PATH_FAN, 0, 0, 1), B, steps)
        mu = np.full(B, engine.mu)
        sigma = np.full(B, engine.sigma)
        sm, sv = engine.schedule_mean, engine.schedule_var
        for j in range(steps):
            t = n + j
            v = np.maximum(sigma + sv.value(t, sigma), 0.0)
            if engine.martingale_variance:
                v = v * ((t + 1.0) / t)
            z = mu + sm.value(t, sigma) + np.sqrt(v) * eps[:, j]
            d = z - mu
            mu = mu + d / (t + 1.0)
            sigma = sigma * (t / (t + 1.0)) + d * d * (t / (t + 1.0) ** 2)
            mu_t[:, j + 1] = mu
            sig_t[:, j + 1] = sigma
    label = schedule.label() if isinstance(schedule, BiasSchedule) else str(schedule)
    cfg = {"experiment": "path_fan", "n_obs": n, "steps": steps, "B": B,
           "keep": keep, "seed": seed, "bias": label}
    return PathFan(
        t_axis=np.arange(n, n + steps + 1),
        mean_paths=mu_t[:keep].copy(),
        var_paths=sig_t[:keep].copy(),
        mean_summary=_band_summary(mu_t),
        var_summary=_band_summary(sig_t),
        observed_mean=engine.mu,
        observed_var=engine.sigma,
        config=cfg,
        runtime=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# limit-formula probes


def _link_rep(args):
    ratio, n, total, B, alpha, seed, cell, r = args
    rng = substream(seed, _EXP_LINK, cell, r, 0)
    data = Sample(rng.standard_normal(n))

    def factory(s):
        return GaussianEngine(mu=float(np.mean(s.values)), sigma=ratio,
                              t=s.size, frozen_variance=True)

    cfg = ResampleConfig(n_paths=B, seed=seed, horizon=Horizon.fixed_total(total),
                         stream=(_EXP_LINK, cell, r, 1))
    draws = pbp_sample(data, factory, FunctionalSpec("mean"), cfg)
    return covers(credible_interval(draws, alpha), 0.0)


def run_coverage_formula_link(r_list, n: int, total: int, R: int, B: int,
                              alpha: float = 0.05, seed: int = 0,
                              workers: int = 1) -> ExperimentSummary:
    """Coverage of a synthetic engine whose draw variance is a fixed multiple
    of the data variance, against the closed-form limit 2*Phi(z*sqrt(r)) - 1."""
    t0 = time.perf_counter()
    rows = []
    for cell, ratio in enumerate(r_list):
        args = [(ratio, n, total, B, alpha, seed, cell, r) for r in range(R)]
        mc = float(np.mean(_map_reps(_link_rep, args, workers)))
        formula = coverage_limit(ratio, alpha)
        rows.append({
            "variance_ratio": ratio, "mc_coverage": mc,
            "formula_coverage": formula, "abs_gap": abs(mc - formula),
            "mc_se": _mc_se(mc, R), "R": R, "B": B,
        })
    cols = ["variance_ratio", "mc_coverage", "formula_coverage", "abs_gap",
            "mc_se", "R", "B"]
    cfg = {"experiment": "coverage_formula_link", "r": list(r_list), "n": n,
           "N": total, "R": R, "B": B, "alpha": alpha, "seed": seed}
    return ExperimentSummary(cols, rows, cfg, time.perf_counter() - t0)


def _bahadur_rep(args):
    dgp, n, q, B, seed, r, horizon, engine = args
    data = Sample(dgp.sample(substream(seed, _EXP_BAHADUR, 0, r, 0), n))
    cfg = ResampleConfig(n_paths=B, seed=seed, horizon=horizon,
                         stream=(_EXP_BAHADUR, 0, r, 1))
    factory = polya_init if engine == "polya" else gaussian_init
    draws = pbp_sample(data, factory, FunctionalSpec("quantile", q), cfg)
    return n * float(np.var(draws.values))


def run_bahadur_check(q: float = 0.5, n: int = 500, B: int = 2000,
                      seed: int = 0, n_datasets: int = 30,
                      dgp: Dgp | None = None, engine: str = "polya",
                      horizon: Horizon = Horizon.power(1.5),
                      workers: int = 1) -> ExperimentSummary:
    """Scaled posterior variance of a quantile against the order-statistic
    limit q(1-q)/f(Q(q))^2.

    The limit is attained by the empirical (urn) engine, whose predictive
    law carries empirical-process fluctuations.  The Gaussian engine is
    offered for contrast: at the median its draws concentrate like the
    running mean, so n * Var approaches the fitted variance instead.
    ``n_var_draws`` is averaged over ``n_datasets`` independent datasets
    because the finite-n estimand wobbles noticeably across datasets.
    """
    t0 = time.perf_counter()
    dgp = dgp or Dgp.normal()
    if engine not in ("polya", "gaussian"):
        raise ValueError(f"unknown engine {engine!r}")
    args = [(dgp, n, q, B, seed, r, horizon, engine) for r in range(n_datasets)]
    nvars = _map_reps(_bahadur_rep, args, workers)
    target = quantile_asymptotic_var(q, dgp.true_density_at(dgp.true_quantile(q)))
    est = float(np.mean(nvars))
    rows = [{"engine": engine, "q": q, "n": n, "n_var_draws": est, "limit": target,
             "ratio": est / target,
             "mc_se": float(np.std(nvars) / math.sqrt(len(nvars)))
             if n_datasets > 1 else 0.0, "R": n_datasets, "B": B}]
    cols = ["engine", "q", "n", "n_var_draws", "limit", "ratio", "mc_se", "R", "B"]
    cfg_d = {"experiment": "bahadur_check", "engine": engine, "q": q, "n": n,
             "B": B, "seed": seed, "n_datasets": n_datasets, "dgp": dgp.label(),
             "horizon": horizon.label()}
    return ExperimentSummary(cols, rows, cfg_d, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# regression predictive checks


def synthetic_regression(n: int, seed: int, d: int = 3, beta=None, tau: float = 1.0,
                         residual_df: float = 5.0):
    """Synthetic linear-model data with Student-t residuals (df = inf for
    Gaussian).  Returns (X, y) with an intercept column in X."""
    rng = substream(seed, _EXP_REGRESSION, 99)
    X = np.column_stack([np.ones(n), rng.standard_normal((n, d - 1))])
    if beta is None:
        beta = np.linspace(1.0, 0.25, d)
    eps = rng.standard_normal(n) if math.isinf(residual_df) else rng.standard_t(residual_df, n)
    return X, X @ beta + tau * eps


def _regression_stats(resid_std: np.ndarray, tail_q: float):
    chi2 = float(np.sum(resid_std**2))
    tail = empirical_quantile(Sample(np.abs(resid_std)), tail_q)
    return chi2, tail


def run_regression_ppc(X: np.ndarray, y: np.ndarray, engine_kind: str,
                       B: int = 100, seed: int = 0, nu: float = 5.0,
                       horizon: int = 100, tail_q: float = 0.995,
                       correction: TailCorrection = TailCorrection(paths=50),
                       mle_starts: int = 10) -> dict:
    """Predictive check of a regression engine at the observed covariates.

    Fits the engine, then for each replicate advances it ``horizon``
    self-simulated steps, adds the Gaussian tail correction, and generates a
    replicate outcome vector at the observed covariates.  Both the observed
    and replicate outcomes are standardized by the fitted engine's
    per-observation mean and predictive standard deviation before scoring
    with the chi-square and tail statistics.

    Both statistics grow when the engine misses spread or tail mass, so the
    reported p-value is the upper-tail predictive probability
    u = Pr(S_rep >= S_obs): an engine too light for the data drives it to 0.

    Returns ``{"chi2": PpcReport, "tail": PpcReport}``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    n = y.size
    if engine_kind == "gaussian":
        state0 = gauss_reg_init(X, y)
    elif engine_kind == "student_t":
        state0 = treg_init(X, y, nu=nu, starts=mle_starts, seed=seed)
    else:
        raise ValueError(f"unknown engine kind {engine_kind!r}")

    resampler = CovariateResampler(X)
    mu_hat = X @ state0.beta
    s_hat = state0.predictive_sd()

    # tail covariance estimated once, at the truncation point
    rng_ref = substream(seed, _EXP_REGRESSION, 0)
    state_ref = state0
    for _ in range(horizon):
        state_ref = reg_step(state_ref, resampler, rng_ref)
    spec = correction if correction.length is not None else replace(correction, length=n)
    cov = estimate_tail_covariance(state_ref, resampler, spec, rng_ref)

    s_obs = _regression_stats((y - mu_hat) / s_hat, tail_q)
    chi2_rep = np.empty(B)
    tail_rep = np.empty(B)
    for b in range(B):
        rng = substream(seed, _EXP_REGRESSION, 1, b)
        state = state0
        for _ in range(horizon):
            state = reg_step(state, resampler, rng)
        theta, _ = hybrid_finalize(state, cov, rng)
        beta_b = theta[:-1]
        tau2_b = max(theta[-1], state.tau2_floor)
        resid = math.sqrt(tau2_b) * state0.draw_residual(rng, n)
        y_rep = X @ beta_b + resid
        chi2_rep[b], tail_rep[b] = _regression_stats((y_rep - mu_hat) / s_hat, tail_q)

    reports = {}
    for name, obs, reps in (("chi2", s_obs[0], chi2_rep), ("tail", s_obs[1], tail_rep)):
        u = float(np.mean(reps >= obs))
        reports[name] = PpcReport(
            s_obs=obs, s_rep=reps, u=u, p=u,
            deltas=math.sqrt(n) * (reps - obs), sided="one",
            meta={"engine": engine_kind, "n": n, "B": B, "seed": seed,
                  "nu": None if math.isinf(state0.nu) else state0.nu,
                  "horizon": horizon, "tail_q": tail_q,
                  "stat": name},
        )
    return reports
