"""Deterministic random-stream derivation.

Every stochastic routine in the package consumes a numpy Generator.  Campaign
code derives one independent stream per (master seed, point index, sample
index) through SeedSequence spawn keys, so results are reproducible bit for
bit and independent of how samples are distributed over workers.
"""

from __future__ import annotations

import numpy as np


def master_sequence(seed: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed))


def sample_stream(seed: int, point_index: int, sample_index: int) -> np.random.Generator:
    """Generator for one sample of one campaign point."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(point_index), int(sample_index)))
    return np.random.default_rng(ss)


def point_stream(seed: int, point_index: int) -> np.random.Generator:
    """Generator for point-level randomness (e.g. a shared random source)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(point_index),))
    return np.random.default_rng(ss)
