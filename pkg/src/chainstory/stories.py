"""Versioned story texts attached to image chains.

Stories are append-only: editing means submitting the next version, never
rewriting a stored one, so every author's every draft stays retrievable.
Versions count per (chain, author) starting at 1 with no gaps.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from enum import Enum

MAX_BODY_BYTES = 64 * 1024


class StoryOrdering(Enum):
    BY_VOTES_DESC = "by_votes_desc"
    BY_TIME_ASC = "by_time_asc"


@dataclass(frozen=True)
class StoryText:
    story_id: str
    chain_id: str
    author: str
    version: int
    body: str
    derived_from: str | None
    created_at: datetime
