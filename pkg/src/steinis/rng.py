"""Named, independent random streams from a single 64-bit seed.

Built on numpy's counter-based Philox generator.  Each stream is
addressed by a label path, e.g. ``stream(seed, "chain", "noise")`` or
``stream(seed, "kernel-subsample", 17)``.  Distinct label paths yield
statistically independent streams, which is how the sampler's
randomness is kept structurally separate from the kernel-subsample
randomness.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_words(label: object) -> tuple[int, ...]:
    # Two 32-bit words per label, derived from a stable hash of its repr.
    digest = hashlib.sha256(repr(label).encode("utf-8")).digest()
    return (
        int.from_bytes(digest[0:4], "little"),
        int.from_bytes(digest[4:8], "little"),
    )


def stream_key(*labels: object) -> tuple[int, ...]:
    """Spawn key identifying a named stream; stable across runs."""
    words: list[int] = []
    for lab in labels:
        words.extend(_label_words(lab))
    return tuple(words)


def stream(seed: int, *labels: object) -> np.random.Generator:
    """Return the generator for the stream named by ``labels``.

    The same (seed, labels) always yields a generator producing the
    identical sequence; different label paths never collide.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=stream_key(*labels))
    return np.random.Generator(np.random.Philox(ss))
