"""Deterministic random-stream derivation shared by all pipeline stages.

Every stage (and every per-stop draw inside a stage) gets its own
generator derived from the single top-level seed plus a name path, so
results do not depend on evaluation order and stages can run in parallel.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key_words(key: str) -> list[int]:
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return [int.from_bytes(digest[i : i + 4], "big") for i in range(0, 16, 4)]


def substream(seed: int, *names: object) -> np.random.Generator:
    """Return a generator keyed by ``(seed, *names)``.

    Identical arguments always yield an identical stream; the stream is
    independent of the order in which other substreams are consumed.
    """
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    entropy: list[int] = [int(seed)]
    for name in names:
        entropy.extend(_key_words(str(name)))
    return np.random.default_rng(np.random.SeedSequence(entropy))


def choose_weighted(rng: np.random.Generator, items: list, weights: list[float]):
    """Pick one item by cumulative-weight inversion (stable across platforms)."""
    total = float(sum(weights))
    if total <= 0:
        raise ValueError("weights must have positive sum")
    u = rng.random() * total
    acc = 0.0
    for item, w in zip(items, weights):
        acc += w
        if u < acc:
            return item
    return items[-1]
