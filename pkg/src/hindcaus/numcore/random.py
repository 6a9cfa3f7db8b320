"""Named counter-based RNG streams.

Every random draw in the package comes from a stream addressed by a tuple of
ids (ints and strings), hashed into a Philox key. Streams are stateless to
construct, so results never depend on draw ordering, worker counts, or how a
workload is partitioned: the same name always yields the same sequence.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["stream", "stream_key"]


def stream_key(*ids) -> int:
    """128-bit key derived from a tuple of ints/strings, stable across runs."""
    h = hashlib.blake2s(digest_size=16)
    for x in ids:
        if isinstance(x, (bool, np.bool_)):
            raise TypeError("bool stream ids are ambiguous; use int or str")
        if isinstance(x, (int, np.integer)):
            h.update(b"i")
            h.update(int(x).to_bytes(16, "little", signed=True))
        elif isinstance(x, str):
            h.update(b"s")
            h.update(x.encode("utf-8"))
            h.update(b"\x00")
        else:
            raise TypeError(f"stream ids must be int or str, got {type(x).__name__}")
    return int.from_bytes(h.digest(), "little")


def stream(*ids) -> np.random.Generator:
    """Fresh generator for the named stream."""
    return np.random.Generator(np.random.Philox(key=stream_key(*ids)))
