"""
Utility helper functions
"""

import os
from typing import List, Optional

import numpy as np
import psutil

from src.utils.errors import ValidationError


def ensure_dir(directory):
    """Ensure a directory exists, create if it doesn't."""
    if directory and not os.path.exists(directory):
        os.makedirs(directory, exist_ok=True)
    return directory


def split_names(value: Optional[str]) -> List[str]:
    """Split a comma separated column list ("a, b,c") into names."""
    if not value:
        return []
    if isinstance(value, (list, tuple)):
        return [str(v).strip() for v in value if str(v).strip()]
    return [part.strip() for part in str(value).split(",") if part.strip()]


def replicate_seed_sequence(base_seed: int, rep_index: int) -> np.random.SeedSequence:
    """
    Seed sequence for one Monte Carlo replicate.

    The (base_seed, rep_index) pair is hashed by numpy's SeedSequence, so every
    replicate gets an independent stream no matter which worker runs it.
    """
    return np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(rep_index),))


def seed_to_int(seed_sequence: np.random.SeedSequence) -> int:
    """Collapse a seed sequence into a 63-bit integer seed (for networkx)."""
    state = seed_sequence.generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def resolve_threads(threads: int) -> int:
    """Worker count: 0 means one per physical core."""
    threads = int(threads)
    if threads < 0:
        raise ValidationError(f"threads must be >= 0, got {threads}")
    if threads == 0:
        threads = psutil.cpu_count(logical=False) or psutil.cpu_count() or 1
    return threads
