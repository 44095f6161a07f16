"""Deterministic RNG substreams for nested Monte Carlo loops.

Every random quantity in the library is drawn from a generator keyed by
``(master_seed, *ids)``, where the ids walk the tree

    master -> experiment -> cell -> replicate -> path

so reruns with the same master seed are bit-identical regardless of
execution order, chunking, or the number of worker processes.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream", "path_noise", "path_uniforms"]


def substream(master_seed: int, *ids: int) -> np.random.Generator:
    """Independent generator for the stream keyed by ``(master_seed, *ids)``."""
    ss = np.random.SeedSequence([int(master_seed), *[int(i) for i in ids]])
    return np.random.Generator(np.random.PCG64(ss))


def path_noise(master_seed: int, ids: tuple[int, ...], n_paths: int, n_steps: int,
               first_path: int = 0) -> np.ndarray:
    """Standard-normal innovations for a block of paths, one substream per path.

    Row ``b`` holds the draw sequence of path ``first_path + b`` under the key
    ``(master_seed, *ids, path_index)``, so relabelling paths permutes rows
    without changing any row's content.
    """
    eps = np.empty((n_paths, n_steps))
    for b in range(n_paths):
        eps[b] = substream(master_seed, *ids, first_path + b).standard_normal(n_steps)
    return eps


def path_uniforms(master_seed: int, ids: tuple[int, ...], n_paths: int, n_steps: int,
                  first_path: int = 0) -> np.ndarray:
    """Uniform(0,1) innovations laid out exactly like :func:`path_noise`."""
    u = np.empty((n_paths, n_steps))
    for b in range(n_paths):
        u[b] = substream(master_seed, *ids, first_path + b).random(n_steps)
    return u
