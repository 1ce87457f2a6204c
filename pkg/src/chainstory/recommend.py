"""Recommendation lists: deterministic top-k and vote-weighted sampling.

Sampling weight is ``chain score + smoothing`` (default smoothing 1), so a
higher-voted chain is proportionally more likely at every draw while
zero-vote chains stay reachable. The generator is Python's ``random.Random``
(MT19937), fixed project-wide so a seed reproduces the same list on any
build.
"""

from __future__ import annotations

import random
from typing import TYPE_CHECKING

from .chains import ImageChain
from .stories import StoryText

if TYPE_CHECKING:
    from .store import PlatformStore


def recommend_top(
    store: "PlatformStore", k: int
) -> list[tuple[ImageChain, StoryText | None]]:
    """Top-k chains by score (ties: earlier creation first), each paired
    with its highest-voted story, or None when the chain has no stories."""
    rows = store.recommendation_view()  # creation order = created_at ascending
    rows.sort(key=lambda row: -row[1])  # stable, so ties keep creation order
    return [(chain, top) for chain, _, top in rows[: max(k, 0)]]


def recommend_sampled(
    store: "PlatformStore", k: int, seed: int, *, smoothing: int = 1
) -> list[ImageChain]:
    """Sample k chains without replacement, draw probability proportional
    to ``score + smoothing``. Deterministic for a given seed and state."""
    rows = store.recommendation_view()
    pool = [(chain, score + smoothing) for chain, score, _ in rows]
    rng = random.Random(seed)
    picked: list[ImageChain] = []
    while pool and len(picked) < k:
        total = sum(weight for _, weight in pool)
        point = rng.random() * total
        cumulative = 0.0
        index = len(pool) - 1  # float edge: fall back to the last candidate
        for n, (_, weight) in enumerate(pool):
            cumulative += weight
            if point < cumulative:
                index = n
                break
        picked.append(pool.pop(index)[0])
    return picked
