"""Reproducible simulation of observation streams.

Every stream is drawn from numpy's Philox4x64 counter-based generator keyed by
a 64-bit seed. Per-trial seeds are derived from a master seed with SplitMix64
applied to the trial counter, so trial ``i`` gets the same stream no matter
how trials are scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Hmc

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def trial_seed(master_seed: int, trial: int) -> int:
    """Seed of trial ``trial``: the ``trial``-th SplitMix64 output from ``master_seed``."""
    return splitmix64((master_seed + trial * GOLDEN) & MASK64)


def generator(seed: int) -> np.random.Generator:
    if not 0 <= seed <= MASK64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return np.random.Generator(np.random.Philox(key=seed))


@dataclass(frozen=True)
class Run:
    symbols: tuple[str, ...]
    seed: int
    states: tuple[str, ...] | None = None

    def __len__(self) -> int:
        return len(self.symbols)


def _cumulative(h: Hmc) -> np.ndarray:
    cum = np.cumsum(h.float_matrix, axis=1)
    cum[:, -1] = 1.0
    return cum


class PathSampler:
    """Draws state paths block by block, one independent generator per row.

    Concatenated blocks equal a single :func:`sample_paths` call of the total
    length, so memory stays bounded for long horizons.
    """

    def __init__(self, h: Hmc, seeds: Sequence[int]):
        self.cum = _cumulative(h)
        self.gens = [generator(int(s)) for s in seeds]
        self.cur = np.full(len(seeds), h.index[h.init], dtype=np.int64)
        self.started = False

    def next(self, k: int) -> np.ndarray:
        """The next ``k`` states of every row, shape ``(rows, k)``."""
        B = len(self.gens)
        out = np.empty((B, k), dtype=np.int64)
        if k == 0 or B == 0:
            return out
        j = 0
        if not self.started:
            out[:, 0] = self.cur
            self.started = True
            j = 1
        if j < k:
            u = np.stack([g.random(k - j) for g in self.gens])
            cur = self.cur
            for t in range(k - j):
                cur = (self.cum[cur] <= u[:, t, None]).sum(axis=1)
                out[:, j + t] = cur
            self.cur = cur
        return out


def sample_paths(h: Hmc, length: int, seeds: Sequence[int]) -> np.ndarray:
    """State-index paths of ``length`` steps, one row per seed.

    Row ``i`` depends only on ``seeds[i]``: each trial draws its ``length - 1``
    uniforms from its own generator.
    """
    if length < 1:
        raise ValueError("length must be at least 1")
    return PathSampler(h, seeds).next(length)


def observation_indices(h: Hmc, paths: np.ndarray) -> np.ndarray:
    """Map state-index paths to alphabet indices."""
    return np.asarray(h.obs_index)[paths]


def sample_run(h: Hmc, length: int, seed: int) -> Run:
    """Simulate ``length`` observations of ``h`` from its initial state."""
    path = sample_paths(h, length, [seed])[0]
    states = tuple(h.states[i] for i in path)
    return Run(symbols=tuple(h.obs[s] for s in states), seed=seed, states=states)
