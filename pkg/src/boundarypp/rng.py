"""Reproducible random streams.

Every task seed is a hash of ``(master_seed, label, index)`` so results do
not depend on how replicates are scheduled across workers.
"""
import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(master, label="", index=0):
    """Return a 64-bit seed derived from a master seed, a label and an index.

    Examples
    --------
    >>> derive_seed(7, "rep", 0) == derive_seed(7, "rep", 0)
    True
    >>> derive_seed(7, "rep", 0) != derive_seed(7, "rep", 1)
    True
    """
    payload = f"{int(master) & _MASK64}|{label}|{int(index)}".encode()
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return int.from_bytes(digest, "little")


def make_rng(seed):
    """Generator on a PCG64 stream for a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK64))


def child_seeds(master, label, count):
    """List of ``count`` derived seeds sharing a label."""
    return [derive_seed(master, label, i) for i in range(count)]
