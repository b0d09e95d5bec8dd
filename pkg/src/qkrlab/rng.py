"""Seeded, splittable random streams.

Each stream is a Philox (counter-based) generator keyed by the master seed,
the trial index and a named draw purpose, so a trial's randomness does not
depend on how trials are scheduled across workers.
"""

from __future__ import annotations

import numpy as np

PURPOSES = (
    "message",
    "keys",
    "alice_bits",
    "alice_bases",
    "bob_bases",
    "channel",
    "measure",
    "pa_seed",
    "sample",
)


def stream(master_seed: int, trial_index: int, purpose: str) -> np.random.Generator:
    if purpose not in PURPOSES:
        raise ValueError(f"unknown stream purpose {purpose!r}")
    if master_seed < 0 or trial_index < 0:
        raise ValueError("seed and trial index must be non-negative")
    ss = np.random.SeedSequence(
        entropy=int(master_seed), spawn_key=(int(trial_index), PURPOSES.index(purpose))
    )
    return np.random.Generator(np.random.Philox(ss))


def random_bits(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(0, 2, size=n, dtype=np.uint8)
