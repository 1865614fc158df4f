"""Deterministic random-stream plumbing shared by samplers and the harness.

Every random draw in the package flows through a counter-based (Philox)
generator keyed by ``(master seed, *path)``.  Two distinct key tuples give
statistically independent streams, and the same tuple always reproduces the
same draws, no matter how many worker processes are running or in what order
streams are created.  Replicate indices occupy the low integer range, so
purpose sentinels live above 2**48 and can never collide with them.
"""

from __future__ import annotations

import numpy as np

# Purpose sentinels for stream paths (all >= 2**48, above any replicate index).
CONFIG_STREAM = 2**48 + 1  # instance-generator draws
KMEANS_STREAM = 2**48 + 2  # k-means seeding derived from estimate provenance
KNN_STREAM = 2**48 + 3  # fixed-design regression noise

_MASK = (1 << 64) - 1


def substream(seed, *path):
    """Return an independent ``numpy.random.Generator`` keyed by (seed, \\*path)."""
    entropy = [int(seed) & _MASK] + [int(p) & _MASK for p in path]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed, *path):
    """Collapse (seed, \\*path) into a single reproducible 64-bit integer."""
    entropy = [int(seed) & _MASK] + [int(p) & _MASK for p in path]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])
