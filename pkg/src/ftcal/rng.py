"""Deterministic random-number streams.

All randomness in the package flows through counter-based Philox generators
keyed by ``numpy.random.SeedSequence``. One master seed plus an integer
stream path fully determines every draw, so re-ordered or concurrent
execution cannot change results. The derivation scheme is: stream
``(a, b, ...)`` under master seed ``s`` is
``Philox(SeedSequence(s, spawn_key=(a, b, ...)))``.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

_U64 = 2**64


def check_seed(seed) -> int:
    """Validate and return an unsigned 64-bit seed as a plain int."""
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ValidationError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed < _U64:
        raise ValidationError(f"seed must be in [0, 2**64), got {seed}")
    return seed


def derive_rng(seed, *stream: int) -> np.random.Generator:
    """Generator for the given stream path under the master seed."""
    key = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(key))


def derive_seed(seed, *stream: int) -> int:
    """Collapse a stream path into a fresh unsigned 64-bit master seed."""
    key = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(s) for s in stream))
    return int(key.generate_state(1, dtype=np.uint64)[0])
