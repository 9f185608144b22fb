#!/usr/bin/env python3
"""
Stable integer mixing and seed derivation.

splitmix64 is the single mixing primitive of the simulator. It backs the
Dandelion++ role hash and the derivation of replication and tuning-trial seeds, so both
are identical across runs, Python versions and platforms (PYTHONHASHSEED never
enters the picture).
"""

import hashlib
from typing import Any, List

import numpy as np

MASK_64 = (1 << 64) - 1
MASK_63 = (1 << 63) - 1

# Stream order is part of the determinism contract: never reorder.
STREAM_NAMES = ("graph", "dynamics", "epochs", "protocol")


def splitmix64(value: int) -> int:
    """One round of the splitmix64 finaliser over a 64-bit unsigned integer"""
    z = (value + 0x9E3779B97F4A7C15) & MASK_64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK_64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK_64
    return z ^ (z >> 31)


def stable_hash(node_id: int, role_epoch: int) -> int:
    """64-bit hash of (node_id, role_epoch): splitmix64(splitmix64(node_id) ^ role_epoch)"""
    return splitmix64(splitmix64(node_id & MASK_64) ^ (role_epoch & MASK_64))


def derive_seed(base_seed: int, *parts: Any) -> int:
    """
    Derive a child seed from a base seed and any hashable description.

    child = base XOR splitmix64(blake2b-64(repr(parts))), masked to 63 bits.
    """
    digest = hashlib.blake2b(repr(parts).encode("utf-8"), digest_size=8).digest()
    return (base_seed ^ splitmix64(int.from_bytes(digest, "big"))) & MASK_63


def spawn_streams(seed: int) -> List[np.random.Generator]:
    """Independent generators, in STREAM_NAMES order, for one experiment"""
    children = np.random.SeedSequence(seed).spawn(len(STREAM_NAMES))
    return [np.random.default_rng(child) for child in children]
