"""Counter-based random streams keyed by (seed, stream labels).

Every Monte-Carlo consumer asks for a generator by an explicit key, e.g.
``stream(seed, stratum, batch)``. Streams are Philox generators seeded
through ``SeedSequence(seed, spawn_key=key)``, so the numbers a batch sees
depend only on its key and never on how many workers run or in what order.
"""

from __future__ import annotations

import numpy as np

__all__ = ["stream"]


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for ``key`` under ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))

