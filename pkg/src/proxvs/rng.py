"""Seeded random streams.

All randomness flows through :func:`make_rng`, which builds a Philox
(counter-based, 64-bit) generator keyed by a seed and an optional tuple of
stream labels. Distinct labels give statistically independent streams, so
adding a draw for one purpose never shifts the draws of another.
"""

import zlib

import numpy as np

__all__ = ["make_rng", "stream_key"]


def stream_key(label):
    """Map a stream label (int or str) to a non-negative integer."""
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError("stream labels must be non-negative")
        return int(label)
    return zlib.crc32(str(label).encode("utf-8"))


def make_rng(seed, *streams):
    """Return a ``numpy.random.Generator`` for ``(seed, *streams)``.

    An existing ``Generator`` is passed through unchanged when no streams are
    requested.
    """
    if isinstance(seed, np.random.Generator):
        if streams:
            raise TypeError("cannot derive labelled streams from a live Generator")
        return seed
    if seed is None:
        raise TypeError("an explicit seed is required")
    ss = np.random.SeedSequence(
        entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
        spawn_key=tuple(stream_key(s) for s in streams),
    )
    return np.random.Generator(np.random.Philox(ss))
