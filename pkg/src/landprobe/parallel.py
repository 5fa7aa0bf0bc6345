"""Order-preserving parallel map and deterministic per-task RNG streams."""

from __future__ import annotations

import numpy as np
from joblib import Parallel, delayed

# Domain tags keep training, evaluation and probing streams disjoint.
TRAIN, EVAL, PROBE, NOISE_BAND, LIMITS = 0, 1, 2, 3, 4


def seed_stream(*keys: int) -> np.random.Generator:
    """Independent generator for a tuple of non-negative integer keys."""
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))


def derive_seed(*keys: int) -> int:
    """A 63-bit integer seed derived from ``keys``."""
    lo, hi = (int(w) for w in np.random.SeedSequence([int(k) for k in keys]).generate_state(2, dtype=np.uint32))
    return (lo | (hi << 32)) >> 1


def parallel_map(fn, items, jobs: int = 1) -> list:
    """``[fn(x) for x in items]``, optionally spread over ``jobs`` threads.

    Output order always follows ``items``; callers keep ``fn`` pure so the
    result is independent of ``jobs``.
    """
    items = list(items)
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    return Parallel(n_jobs=min(jobs, len(items)), prefer="threads")(delayed(fn)(x) for x in items)
