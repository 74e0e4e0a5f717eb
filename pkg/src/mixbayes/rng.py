"""Seeded random streams.

Every random draw in the package goes through :func:`make_rng`, which builds a
Philox (counter-based) generator keyed by a 64-bit seed and a tuple of stream
identifiers. Identical (seed, stream) pairs give identical draws on every
platform numpy supports.
"""
from __future__ import annotations

import zlib

import numpy as np

ALGORITHM = "philox4x64"


def _stream_word(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFFFFFFFFFF
    return zlib.crc32(str(part).encode("utf-8"))


def make_rng(seed: int, *stream) -> np.random.Generator:
    """Return an independent generator for ``(seed, *stream)``.

    Stream parts may be ints or strings (strings are hashed with CRC32, which is
    stable across interpreter runs, unlike ``hash``).
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_stream_word(p) for p in stream]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
