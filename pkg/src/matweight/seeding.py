"""Seed handling: 64-bit user seeds and labelled sub-streams."""
from __future__ import annotations

import os
import zlib

import numpy as np

SEED_ENV = "MATWEIGHT_SEED"
MAX_SEED = 2**64 - 1


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def default_seed(fallback: int = 0) -> int:
    value = os.environ.get(SEED_ENV)
    return check_seed(value) if value not in (None, "") else fallback


def _label_word(label) -> int:
    if isinstance(label, str):
        return zlib.crc32(label.encode("utf-8"))
    return int(label)


def substream(seed: int, *labels) -> np.random.Generator:
    """Generator for the sub-stream keyed by ``(seed, *labels)``.

    Labels may be strings (hashed with CRC-32) or non-negative integers, so
    that e.g. per-edge streams do not depend on the order edges are visited.
    """
    words = [check_seed(seed) & 0xFFFFFFFF, check_seed(seed) >> 32]
    words += [_label_word(lab) for lab in labels]
    return np.random.default_rng(np.random.SeedSequence(words))
