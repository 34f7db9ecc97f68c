"""Shared helpers: seed derivation, worker resolution, bit packing.

Every stochastic routine in the package takes an explicit 64-bit seed and
derives per-task child seeds through :func:`derive_seed`, so any sub-run can
be reproduced in isolation from (master seed, label, index) alone.
"""

from __future__ import annotations

import hashlib
import os

import numpy as np

__all__ = [
    "derive_seed",
    "resolve_workers",
    "pack_rows",
    "unpack_rows",
    "popcount_words",
]

_SEED_DOMAIN = b"qfab-seed"


def derive_seed(master: int, *parts: object) -> int:
    """Derive a child seed from a master seed and a label path.

    Hashes the domain tag, the master seed, and the stringified parts with
    SHA-256 and keeps 64 bits. Stable across platforms and sessions.
    """
    h = hashlib.sha256(_SEED_DOMAIN)
    h.update(str(int(master)).encode())
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode())
    return int.from_bytes(h.digest()[:8], "little")


def resolve_workers(requested: int | None = None) -> int:
    """Resolve a worker count: explicit argument, QF_WORKERS, then cpu count."""
    if requested is not None and requested > 0:
        return int(requested)
    env = os.environ.get("QF_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def pack_rows(dense: np.ndarray) -> np.ndarray:
    """Pack a 2-D 0/1 array into uint64 words, little-endian bit order.

    Bit ``c`` of row ``i`` lands in word ``c // 64`` at position ``c % 64``.
    Returns shape ``(nrows, ceil(ncols / 64))``.
    """
    dense = np.atleast_2d(np.asarray(dense, dtype=np.uint8)) & 1
    nrows, ncols = dense.shape
    nwords = (ncols + 63) // 64
    padded = np.zeros((nrows, nwords * 64), dtype=np.uint8)
    padded[:, :ncols] = dense
    return np.packbits(padded, axis=1, bitorder="little").view(np.uint64)


def unpack_rows(words: np.ndarray, ncols: int) -> np.ndarray:
    """Inverse of :func:`pack_rows`; returns uint8 of shape (nrows, ncols)."""
    words = np.atleast_2d(words)
    bits = np.unpackbits(words.view(np.uint8), axis=1, bitorder="little")
    return bits[:, :ncols]


def popcount_words(words: np.ndarray) -> np.ndarray:
    """Per-row set-bit count of a packed array."""
    return np.bitwise_count(words).sum(axis=1, dtype=np.int64)
