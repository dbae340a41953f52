"""Named counter-based random streams.

Every random draw in the package comes from a Philox generator keyed by
(master seed, purpose string, index), so batch sampling, interpolation
draws and weight init stay independently reproducible no matter how the
surrounding loops are restructured.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["stream"]


def _purpose_key(purpose: str) -> int:
    digest = hashlib.sha256(purpose.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def stream(master_seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(
        entropy=int(master_seed), spawn_key=(_purpose_key(purpose), int(index))
    )
    return np.random.Generator(np.random.Philox(ss))
