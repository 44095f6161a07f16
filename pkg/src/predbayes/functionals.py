"""Population functionals and the closed-form limits used to calibrate them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .measures import Sample, empirical_quantile, mean, variance

__all__ = [
    "FunctionalSpec",
    "evaluate",
    "mean_asymptotic_sd",
    "coverage_limit",
    "quantile_asymptotic_var",
    "normal_cdf",
    "normal_quantile",
]

_KINDS = ("mean", "variance", "mean_and_variance", "quantile")


@dataclass(frozen=True)
class FunctionalSpec:
    """Functional of an empirical measure: mean, variance, both, or a quantile."""

    kind: str
    q: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown functional kind {self.kind!r}")
        if self.kind == "quantile":
            if self.q is None or not (0.0 < self.q < 1.0):
                raise ValueError("quantile level must lie strictly inside (0, 1)")
        elif self.q is not None:
            raise ValueError(f"{self.kind} takes no quantile level")

    @property
    def dim(self) -> int:
        return 2 if self.kind == "mean_and_variance" else 1

    def label(self) -> str:
        return f"quantile({self.q:g})" if self.kind == "quantile" else self.kind


def evaluate(f: FunctionalSpec, s: Sample):
    """Evaluate the functional on a sample; 2-vector for mean_and_variance."""
    if f.kind == "mean":
        return mean(s)
    if f.kind == "variance":
        if s.size < 2:
            raise ValueError("variance functional needs at least 2 observations")
        return variance(s)
    if f.kind == "mean_and_variance":
        if s.size < 2:
            raise ValueError("variance functional needs at least 2 observations")
        return np.array([mean(s), variance(s)])
    return empirical_quantile(s, f.q)


def normal_cdf(x: float) -> float:
    """Standard normal CDF via erfc; relative error below 1e-12 everywhere."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def normal_quantile(p: float) -> float:
    if not (0.0 < p < 1.0):
        raise ValueError("probability out of range")
    return float(ndtri(p))


def mean_asymptotic_sd(engine_variance: float, n: int) -> float:
    """Large-sample posterior sd of the mean functional, sqrt(var / n)."""
    if engine_variance < 0:
        raise ValueError("variance must be nonnegative")
    if n < 1:
        raise ValueError("n must be positive")
    return math.sqrt(engine_variance / n)


def coverage_limit(variance_ratio: float, alpha: float) -> float:
    """Limiting coverage 2 * Phi(z_{1-alpha/2} * sqrt(r)) - 1 of nominal
    (1 - alpha) credible intervals when the engine's stationary variance is
    ``r`` times the data-generating variance."""
    if variance_ratio < 0:
        raise ValueError("variance ratio must be nonnegative")
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha out of range")
    z = normal_quantile(1.0 - alpha / 2.0)
    return 2.0 * normal_cdf(z * math.sqrt(variance_ratio)) - 1.0


def quantile_asymptotic_var(q: float, density_at_quantile: float) -> float:
    """Limit of n * Var for the q-th quantile: q(1-q) / f(Q(q))^2."""
    if not (0.0 < q < 1.0):
        raise ValueError("quantile level out of range")
    if density_at_quantile <= 0.0:
        raise ValueError("Bahadur limit undefined: zero density at quantile")
    return q * (1.0 - q) / density_at_quantile**2
