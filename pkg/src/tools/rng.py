"""
Seeded generators for reproducible sampling.

The generator is numpy's PCG64. Per-trial seeds are split from a parent seed
with SeedSequence: child i of SeedSequence(seed).spawn(n) supplies the first
64-bit word of its state as the seed of trial i.
"""
import numpy as np

GENERATOR_NAME = "PCG64"


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def spawn_seeds(seed: int, n: int) -> list[int]:
    children = np.random.SeedSequence(seed).spawn(n)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]


def fresh_seed() -> int:
    """An OS-entropy seed, for callers that did not pick one; echo it back."""
    return int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0] >> 1)

