"""Forward predictive resampling: simulate continuation paths, push the
augmented empirical measure through a functional, and summarize the draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engines import (GaussianEngine, PolyaUrnEngine, advance_gaussian_paths,
                      advance_polya_paths)
from .functionals import FunctionalSpec, evaluate
from .measures import MixtureMeasure, Sample, empirical_quantile
from .rng import path_noise, path_uniforms, substream

__all__ = [
    "Horizon",
    "ResampleConfig",
    "PbpDraws",
    "run_path",
    "pbp_sample",
    "credible_interval",
    "covers",
]

# cap on the innovation buffer (entries) when advancing paths in blocks
_BLOCK_BUDGET = 16_000_000


@dataclass(frozen=True)
class Horizon:
    """Total augmented-sample size N, either fixed or a power of n."""

    rule: str = "power"
    exponent: float = 1.5
    fixed: int | None = None

    @classmethod
    def power(cls, exponent: float = 1.5) -> "Horizon":
        return cls(rule="power", exponent=exponent)

    @classmethod
    def fixed_total(cls, total: int) -> "Horizon":
        return cls(rule="fixed", fixed=int(total))

    def total_for(self, n: int) -> int:
        if self.rule == "fixed":
            total = self.fixed
        else:
            total = math.ceil(n**self.exponent)
        if total < n + 1:
            raise ValueError(f"horizon N={total} must exceed the sample size n={n}")
        return int(total)

    def label(self) -> str:
        return f"fixed({self.fixed})" if self.rule == "fixed" else f"power({self.exponent:g})"


@dataclass(frozen=True)
class ResampleConfig:
    """How many paths to run, how far, and under which seed.

    ``stream`` is an optional tuple of ids placed between the seed and the
    path index, letting outer loops (experiment, cell, replicate) nest
    deterministic substreams.
    """

    n_paths: int
    seed: int
    horizon: Horizon = Horizon.power(1.5)
    stream: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.n_paths < 1:
            raise ValueError("need at least one path")


@dataclass(frozen=True)
class PbpDraws:
    """Functional evaluations across simulated continuation paths."""

    values: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    def column(self, i: int = 0) -> np.ndarray:
        return self.values if self.values.ndim == 1 else self.values[:, i]


def run_path(state, n_steps: int, rng: np.random.Generator):
    """Alternate draw/update ``n_steps`` times from any engine state.

    Returns ``(sample_of_simulated_values, final_state)``.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    values = np.empty(n_steps)
    for i in range(n_steps):
        z = state.draw(rng)
        state = state.update(z)
        values[i] = z
    return Sample(values), state


def _functional_from_paths(f: FunctionalSpec, x_obs, mu, sigma, values):
    """Evaluate the functional on each flattened (observed + path) sample.

    Running moments are the batch moments of the flattened sample, so the
    mean and variance functionals read off (mu, sigma) directly; quantiles
    select an order statistic from the concatenated values.
    """
    if f.kind == "mean":
        return mu.copy()
    if f.kind == "variance":
        return sigma.copy()
    if f.kind == "mean_and_variance":
        return np.column_stack([mu, sigma])
    B, T = values.shape
    n = x_obs.size
    k = math.ceil(f.q * (n + T))
    flat = np.concatenate([np.broadcast_to(x_obs.values, (B, n)), values], axis=1)
    part = np.partition(flat, k - 1, axis=1)
    return part[:, k - 1]


def pbp_sample(x_obs: Sample, engine_factory, f: FunctionalSpec,
               cfg: ResampleConfig) -> PbpDraws:
    """Posterior draws of a functional by predictive resampling.

    For each of ``cfg.n_paths`` paths a fresh engine is fit to ``x_obs``,
    run forward to total size N, and the functional is evaluated on the
    flattened observed-plus-simulated sample.  Gaussian-family engines take
    a vectorized route; any object with ``draw``/``update`` works through
    the generic per-path loop.
    """
    if x_obs.size < 2:
        raise ValueError("need >= 2 observations")
    n = x_obs.size
    total = cfg.horizon.total_for(n)
    steps = total - n
    engine = engine_factory(x_obs)
    meta = {
        "n": n,
        "N": total,
        "B": cfg.n_paths,
        "seed": cfg.seed,
        "stream": cfg.stream,
        "engine": engine.label() if hasattr(engine, "label") else repr(engine),
        "functional": f.label(),
    }

    if isinstance(engine, (GaussianEngine, PolyaUrnEngine)):
        gaussian = isinstance(engine, GaussianEngine)
        need_values = f.kind == "quantile" or not gaussian
        block = max(1, min(cfg.n_paths, _BLOCK_BUDGET // max(steps, 1)))
        out = np.empty((cfg.n_paths, f.dim)) if f.dim > 1 else np.empty(cfg.n_paths)
        for start in range(0, cfg.n_paths, block):
            stop = min(start + block, cfg.n_paths)
            if gaussian:
                eps = path_noise(cfg.seed, cfg.stream, stop - start, steps,
                                 first_path=start)
                mu, sigma, values, _ = advance_gaussian_paths(engine, eps,
                                                              keep_values=need_values)
            else:
                u = path_uniforms(cfg.seed, cfg.stream, stop - start, steps,
                                  first_path=start)
                values = advance_polya_paths(x_obs.values, u)
                mu = sigma = None
                if f.kind != "quantile":
                    flat = np.concatenate(
                        [np.broadcast_to(x_obs.values, (values.shape[0], n)), values],
                        axis=1)
                    mu = flat.mean(axis=1)
                    sigma = flat.var(axis=1)
            out[start:stop] = _functional_from_paths(f, x_obs, mu, sigma, values)
        return PbpDraws(values=out, meta=meta)

    rows = []
    for b in range(cfg.n_paths):
        rng = substream(cfg.seed, *cfg.stream, b)
        path, _ = run_path(engine_factory(x_obs), steps, rng)
        rows.append(evaluate(f, MixtureMeasure(x_obs, path).flatten()))
    return PbpDraws(values=np.asarray(rows), meta=meta)


def credible_interval(draws, alpha: float):
    """Equal-tailed empirical interval at level 1 - alpha.

    Endpoints follow the order-statistic quantile rule.  Returns a (2,)
    array for scalar draws and a (k, 2) array for vector draws.  Requires
    enough draws for the tail order statistics to be interior (B >= 2/alpha);
    B >= 20/alpha is recommended before the endpoints stabilize.
    """
    values = draws.values if isinstance(draws, PbpDraws) else np.asarray(draws)
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha out of range")
    B = values.shape[0]
    if B < 2.0 / alpha:
        raise ValueError("insufficient draws for requested level")
    if values.ndim == 1:
        s = Sample(values)
        return np.array([empirical_quantile(s, alpha / 2.0),
                         empirical_quantile(s, 1.0 - alpha / 2.0)])
    return np.stack([credible_interval(values[:, j], alpha)
                     for j in range(values.shape[1])])


def covers(ci, truth: float) -> bool:
    """Closed-interval membership check."""
    lo, hi = float(ci[0]), float(ci[1])
    if lo > hi:
        raise ValueError("interval endpoints out of order")
    return lo <= truth <= hi
