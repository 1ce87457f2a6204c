"""Collaborative story writing over ordered image chains.

Workers grow stories by linking images into chains, attach versioned
story texts, and vote; recreating an existing chain converts into a vote
for it. State is event-sourced and append-only. See the README for the
service API, log format, and simulator usage.
"""

from .analytics import (
    AnalyticsReport,
    CohortSplit,
    LengthSummary,
    TTestResult,
    TTestVariant,
    build_report,
    group_vote_means,
    length_summary,
    report_table,
    split_by_length,
    two_sample_t_test,
)
from .chains import (
    BranchOf,
    ChainOutcome,
    Fresh,
    ImageChain,
    ImageOrigin,
    ImageRecord,
    MergeOf,
    OutcomeKind,
)
from .errors import ChainStoryError
from .ids import canonical_chain_id, content_hash
from .recommend import recommend_sampled, recommend_top
from .stories import StoryOrdering, StoryText
from .store import PlatformStore, WorkerRecord
from .votes import LeaderboardEntry, LeaderboardWeights, VoteRecord

__all__ = [
    "AnalyticsReport",
    "BranchOf",
    "ChainOutcome",
    "ChainStoryError",
    "CohortSplit",
    "Fresh",
    "ImageChain",
    "ImageOrigin",
    "ImageRecord",
    "LeaderboardEntry",
    "LeaderboardWeights",
    "LengthSummary",
    "MergeOf",
    "OutcomeKind",
    "PlatformStore",
    "StoryOrdering",
    "StoryText",
    "TTestResult",
    "TTestVariant",
    "VoteRecord",
    "WorkerRecord",
    "build_report",
    "canonical_chain_id",
    "content_hash",
    "group_vote_means",
    "length_summary",
    "recommend_sampled",
    "recommend_top",
    "report_table",
    "split_by_length",
    "two_sample_t_test",
]
