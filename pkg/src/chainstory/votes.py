"""Explicit story votes and leaderboard scoring.

A worker keeps one active vote per chain: voting again on the same chain
supersedes the previous record (which is retained, flagged) rather than
stacking. Leaderboard scores are a weighted count of a worker's uploads,
chains, stories, and the active votes their stories hold.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from typing import Sequence


@dataclass
class VoteRecord:
    voter: str
    chain_id: str
    story_id: str
    cast_at: datetime
    superseded: bool = False


@dataclass(frozen=True)
class LeaderboardEntry:
    worker: str
    score: int
    rank: int


@dataclass(frozen=True)
class LeaderboardWeights:
    """Per-activity score weights; votes received weigh double by default."""

    image: int = 1
    chain: int = 1
    story: int = 1
    vote: int = 2


@dataclass(frozen=True)
class WorkerActivity:
    worker: str
    images_uploaded: int
    chains_created: int
    stories_submitted: int
    votes_received: int

    def score(self, weights: LeaderboardWeights) -> int:
        return (
            weights.image * self.images_uploaded
            + weights.chain * self.chains_created
            + weights.story * self.stories_submitted
            + weights.vote * self.votes_received
        )


def rank_activities(
    activities: Sequence[WorkerActivity],
    k: int,
    weights: LeaderboardWeights = LeaderboardWeights(),
) -> list[LeaderboardEntry]:
    """Top-k workers by score, competition-ranked.

    ``activities`` must arrive in registration order; it is the tie-break
    for equal scores. Workers with zero score never appear (an empty store
    yields an empty board). Tied scores share the smaller rank.
    """
    scored = [(a.worker, a.score(weights)) for a in activities]
    scored = [(w, s) for w, s in scored if s > 0]
    scored.sort(key=lambda ws: -ws[1])  # stable: registration order within ties

    entries: list[LeaderboardEntry] = []
    prev_score: int | None = None
    prev_rank = 0
    for position, (worker, score) in enumerate(scored[: max(k, 0)], start=1):
        rank = prev_rank if score == prev_score else position
        entries.append(LeaderboardEntry(worker=worker, score=score, rank=rank))
        prev_score, prev_rank = score, rank
    return entries
