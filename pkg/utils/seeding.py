# utils/seeding.py
import numpy as np


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic child seed for substream ``keys`` of ``seed``"""
    entropy = [int(seed)] + [int(k) for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for substream ``keys`` of ``seed``"""
    return np.random.default_rng(derive_seed(seed, *keys))
