"""Seed derivation.

All randomness flows through ``numpy.random.Generator(PCG64(seed))`` and its
``standard_normal`` (ziggurat) transform, so a given seed produces the same
bits on every platform for a given numpy version.

Derived seeds are produced by ``numpy.random.SeedSequence`` hashing of a
tuple of nonnegative integers and reading one 64-bit word of its state. Text
labels are mapped to integers through their UTF-8 bytes so the derivation is
stable across processes (no reliance on ``hash()``).
"""

from typing import NamedTuple

import numpy as np


def _word(part):
    if isinstance(part, str):
        return int.from_bytes(part.encode("utf-8"), "little")
    part = int(part)
    if part < 0:
        # fold negative integers into the nonnegative range SeedSequence needs
        return (1 << 64) + part
    return part


def derive_seed(*parts):
    """Hash integers and labels into one 64-bit seed."""
    seq = np.random.SeedSequence([_word(p) for p in parts])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def generator(seed):
    return np.random.Generator(np.random.PCG64(seed))


class SubSeeds(NamedTuple):
    """Independent seeds for the four random draws of one acquisition."""

    noise1: int
    noise2: int
    mask1: int
    mask2: int


def split_seed(seed):
    return SubSeeds(
        derive_seed(seed, "noise1"),
        derive_seed(seed, "noise2"),
        derive_seed(seed, "mask1"),
        derive_seed(seed, "mask2"),
    )
