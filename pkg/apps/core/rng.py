"""
Deterministic random substreams.

Every random draw comes from a numpy Generator derived from a root seed plus an
integer key path. Two draws with different key paths are independent, and a
key path always replays the same numbers, so results never depend on the order
in which experiments, replicates or chunks are processed.
"""
import hashlib

import numpy as np

from .exceptions import InvalidConfig

SEED_LIMIT = 2 ** 64

# Purpose tags: the first element of every key path.
STREAM = 1
MIXTURE = 2
PPOS_MC = 3
REPLICATE = 4


def validate_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise InvalidConfig(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed < SEED_LIMIT:
        raise InvalidConfig(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def key_for(label: str) -> int:
    """Stable 64-bit key for a text identifier such as an experiment id."""
    digest = hashlib.sha256(str(label).encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'big', signed=False)


def _sequence(seed: int, key) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=validate_seed(seed), spawn_key=tuple(int(k) for k in key))


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(_sequence(seed, key))


def derive_seed(seed: int, *key: int) -> int:
    """A child root seed, for handing a whole subsystem its own seed."""
    return int(_sequence(seed, key).generate_state(1, dtype=np.uint64)[0])
