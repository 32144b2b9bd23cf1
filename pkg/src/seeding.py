"""
Named random streams derived from one per-run seed.

Every consumer of randomness asks for its own stream by name, so adding
draws in one place never shifts the sequence seen by another.
"""
import zlib

import numpy as np

CHRONICS = "chronics"
INIT = "init"
ACTION_SAMPLING = "action_sampling"
REPLAY = "replay"
MINIBATCH = "minibatch"
MID_POLICY = "mid_policy"
EPISODES = "episodes"


def stream(seed: int, name: str, *sub_keys: int) -> np.random.Generator:
    """Independent generator for ``name`` (and optional integer sub-keys) under ``seed``."""
    key = (zlib.crc32(name.encode("utf-8")), *sub_keys)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))
