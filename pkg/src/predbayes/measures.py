"""Empirical measures on the real line and the metrics between them.

A :class:`Sample` carries an ordered batch of observations together with a
cached sorted view; a :class:`MixtureMeasure` is the convex combination of an
observed and a simulated sample, weighted by the observed fraction.  All
quantiles follow the order-statistic rule ``Q(q) = y_(ceil(q*m))`` and all
variances use the maximum-likelihood denominator ``m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

__all__ = [
    "Sample",
    "MixtureMeasure",
    "ecdf_eval",
    "empirical_quantile",
    "mean",
    "variance",
    "w1_distance",
    "winf_distance",
    "mixture_eval",
]


def _as_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    return arr


@dataclass(frozen=True)
class Sample:
    """Finite, equally weighted batch of real observations.

    Immutable after construction; ``values`` keeps insertion order and
    ``sorted_values`` is the cached nondecreasing view.
    """

    values: np.ndarray
    sorted_values: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        arr = _as_array(self.values)
        if arr.size == 0:
            raise ValueError("empty sample")
        if not np.all(np.isfinite(arr)):
            raise ValueError("sample values must be finite")
        arr.flags.writeable = False
        srt = np.sort(arr)
        srt.flags.writeable = False
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "sorted_values", srt)

    @classmethod
    def of(cls, values: Iterable[float]) -> "Sample":
        return cls(_as_array(list(values)))

    @property
    def size(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.size


def ecdf_eval(s: Sample, x: float) -> float:
    """Right-continuous empirical CDF: fraction of values <= x."""
    return float(np.searchsorted(s.sorted_values, x, side="right")) / s.size


def empirical_quantile(s: Sample, q: float) -> float:
    """Order statistic ``y_(k)`` with ``k = ceil(q * m)``, for ``0 < q <= 1``."""
    if not (0.0 < q <= 1.0):
        raise ValueError("quantile level out of range")
    m = s.size
    k = math.ceil(q * m)
    return float(s.sorted_values[k - 1])


def mean(s: Sample) -> float:
    return float(np.mean(s.values))


def variance(s: Sample) -> float:
    """Maximum-likelihood variance (denominator m, not m-1).

    Exactly zero for constant samples (the mean round-trip can otherwise
    leave a denormal-scale residue).
    """
    if s.sorted_values[0] == s.sorted_values[-1]:
        return 0.0
    return float(np.var(s.values))


def _quantile_index_walk(a: np.ndarray, b: np.ndarray):
    """Yield (weight, a_val, b_val) over the union grid of quantile levels.

    Works on integer level comparisons (ia/ma vs ib/mb cross-multiplied), so
    unequal sizes never suffer float-level ties.
    """
    ma, mb = a.size, b.size
    ia = ib = 1
    u_prev = 0.0
    while ia <= ma and ib <= mb:
        lhs, rhs = ia * mb, ib * ma
        u_next = ia / ma if lhs <= rhs else ib / mb
        yield u_next - u_prev, a[ia - 1], b[ib - 1]
        if lhs <= rhs:
            ia += 1
        if lhs >= rhs:
            ib += 1
        u_prev = u_next


def w1_distance(a: Sample, b: Sample) -> float:
    """Exact 1-D Wasserstein-1 distance between two empirical measures.

    Computed as the integral of |F_a^{-1} - F_b^{-1}| over the merged grid of
    quantile levels; for equal sizes this is the mean absolute difference of
    paired order statistics, which is returned directly in that case.
    """
    sa, sb = a.sorted_values, b.sorted_values
    if sa.size == sb.size:
        return float(np.mean(np.abs(sa - sb)))
    return float(sum(w * abs(x - y) for w, x, y in _quantile_index_walk(sa, sb)))


def winf_distance(a: Sample, b: Sample) -> float:
    """Sup-norm distance between the two empirical quantile functions."""
    sa, sb = a.sorted_values, b.sorted_values
    if sa.size == sb.size:
        return float(np.max(np.abs(sa - sb)))
    return float(max(abs(x - y) for _, x, y in _quantile_index_walk(sa, sb)))


@dataclass(frozen=True)
class MixtureMeasure:
    """Convex mixture of an observed and a simulated empirical measure.

    The weight on the observed part is exactly ``n / (n + n_sim)``, i.e. the
    mixture CDF agrees with the plain ECDF of the concatenated values.
    """

    observed: Sample
    simulated: Sample

    @property
    def alpha(self) -> float:
        n = self.observed.size
        return n / (n + self.simulated.size)

    def flatten(self) -> Sample:
        return Sample(np.concatenate([self.observed.values, self.simulated.values]))


def mixture_eval(m: MixtureMeasure, x: float) -> float:
    """Mixture CDF ``alpha * F_obs(x) + (1 - alpha) * F_sim(x)``."""
    a = m.alpha
    return a * ecdf_eval(m.observed, x) + (1.0 - a) * ecdf_eval(m.simulated, x)
