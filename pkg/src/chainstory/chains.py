"""Domain types for the image pool and image chains.

An image chain is an ordered sequence of image ids with a canonical,
content-derived identity. Chains are immutable once stored: continuing a
story never rewrites the parent, it creates a new chain whose provenance
points back at the prefix it grew from. Attempting to recreate a sequence
that already exists is converted into an implicit vote for the existing
chain instead of storing a redundant copy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Sequence


class ImageOrigin(Enum):
    BASE_POOL = "base_pool"
    WORKER_UPLOAD = "worker_upload"


@dataclass(frozen=True)
class ImageRecord:
    """One image in the shared pool, addressed by the hash of its bytes."""

    image_id: str
    description: str
    uploader: str
    uploaded_at: datetime
    origin: ImageOrigin


@dataclass(frozen=True)
class Fresh:
    """Chain started directly from a base image."""

    kind: str = field(default="fresh", init=False)


@dataclass(frozen=True)
class BranchOf:
    """Chain built from a prefix of ``parent`` (full prefix = plain extension)."""

    parent: str
    prefix_len: int
    kind: str = field(default="branch", init=False)


@dataclass(frozen=True)
class MergeOf:
    """Chain built by concatenating two existing chains."""

    first: str
    second: str
    kind: str = field(default="merge", init=False)


Provenance = Fresh | BranchOf | MergeOf


def provenance_to_dict(p: Provenance) -> dict:
    if isinstance(p, Fresh):
        return {"kind": "fresh"}
    if isinstance(p, BranchOf):
        return {"kind": "branch", "parent": p.parent, "prefix_len": p.prefix_len}
    return {"kind": "merge", "first": p.first, "second": p.second}


def provenance_from_dict(d: dict) -> Provenance:
    kind = d["kind"]
    if kind == "fresh":
        return Fresh()
    if kind == "branch":
        return BranchOf(parent=d["parent"], prefix_len=int(d["prefix_len"]))
    if kind == "merge":
        return MergeOf(first=d["first"], second=d["second"])
    raise ValueError(f"unknown provenance kind {kind!r}")


@dataclass
class ImageChain:
    """An ordered image sequence with its vote count and provenance.

    ``implicit_votes`` is the only field that ever changes after creation,
    and it only increases (each increment records one deduplicated
    re-creation attempt).
    """

    chain_id: str
    sequence: tuple[str, ...]
    creator: str
    contributors: frozenset[str]
    implicit_votes: int
    created_at: datetime
    provenance: Provenance

    def __len__(self) -> int:
        return len(self.sequence)


class OutcomeKind(Enum):
    CREATED = "created"
    DUPLICATE_VOTED = "duplicate_voted"


@dataclass(frozen=True)
class ChainOutcome:
    """Result of a chain-producing operation.

    ``chain`` is the newly stored chain for CREATED, or the pre-existing
    chain (with its incremented vote count) for DUPLICATE_VOTED.
    """

    kind: OutcomeKind
    chain: ImageChain

    @property
    def created(self) -> bool:
        return self.kind is OutcomeKind.CREATED


def merged_sequence(first: Sequence[str], second: Sequence[str]) -> tuple[str, ...]:
    """Concatenate two sequences, collapsing a duplicated image at the seam.

    Only the immediately adjacent pair at the junction collapses; repeats
    elsewhere in either sequence are preserved.
    """
    if first and second and first[-1] == second[0]:
        return tuple(first) + tuple(second[1:])
    return tuple(first) + tuple(second)
