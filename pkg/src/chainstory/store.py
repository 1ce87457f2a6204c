"""The platform store: one commit point, event-sourced, append-only.

Every mutation is validated, turned into exactly one event, appended to
the log (durably, when a data directory is attached), and then applied to
in-memory state by a pure transition function. Replaying the log from
scratch rebuilds the identical state, field by field, which is what makes
kill-and-restart safe and auditable.

Nothing here deletes or rewrites: the pool, the chain set, the story set,
and the vote history only grow. The check-for-duplicate-then-insert-or-vote
step runs under the store lock, so no interleaving of concurrent creators
can ever produce two chains with the same sequence.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence

from . import events as ev
from .chains import (
    BranchOf,
    ChainOutcome,
    Fresh,
    ImageChain,
    ImageOrigin,
    ImageRecord,
    MergeOf,
    OutcomeKind,
    Provenance,
    merged_sequence,
    provenance_from_dict,
    provenance_to_dict,
)
from .errors import (
    BodyTooLarge,
    CrossChainDerivation,
    EmptyBlob,
    EmptyBody,
    EmptyDescription,
    EmptyDisplayName,
    EmptyExtension,
    PrefixOutOfRange,
    UnknownChain,
    UnknownImage,
    UnknownStory,
    UnknownWorker,
)
from .ids import HASH_ALGORITHM, canonical_chain_id, content_hash
from .stories import MAX_BODY_BYTES, StoryOrdering, StoryText
from .votes import (
    LeaderboardEntry,
    LeaderboardWeights,
    VoteRecord,
    WorkerActivity,
    rank_activities,
)

EVENTS_FILENAME = "events.log"
BLOBS_DIRNAME = "blobs"


@dataclass(frozen=True)
class WorkerRecord:
    """A registered worker. Only the token's hash is ever stored."""

    worker_id: str
    display_name: str
    registered_at: datetime
    token_hash: str | None = None


def _utc_now() -> datetime:
    return datetime.now(timezone.utc)


class PlatformStore:
    """In-memory state machine over an optional durable event log.

    With ``data_dir`` set, events land in ``<data_dir>/events.log`` and
    image bytes in ``<data_dir>/blobs/<content-hash>``; reopening the same
    directory replays the log and serves the identical state. Without it
    the store is purely in-memory (tests, simulation).

    ``clock`` injects timestamps; the simulator passes a deterministic one
    so that equal seeds produce byte-identical logs.
    """

    def __init__(
        self,
        data_dir: str | Path | None = None,
        *,
        clock: Callable[[], datetime] | None = None,
    ):
        self._lock = threading.RLock()
        self._clock = clock or _utc_now

        self._workers: dict[str, WorkerRecord] = {}
        self._worker_order: list[str] = []
        self._token_index: dict[str, str] = {}

        self._images: dict[str, ImageRecord] = {}
        self._image_order: list[str] = []
        self._memory_blobs: dict[str, bytes] = {}

        self._chains: dict[str, ImageChain] = {}
        self._chain_order: list[str] = []
        self._sequence_index: dict[tuple[str, ...], str] = {}

        self._stories: dict[str, StoryText] = {}
        self._story_order: list[str] = []
        self._chain_stories: dict[str, list[str]] = {}
        self._version_high: dict[tuple[str, str], int] = {}

        self._votes: list[VoteRecord] = []
        self._active_votes: dict[tuple[str, str], VoteRecord] = {}
        self._tallies: dict[str, int] = {}

        self._events: list[ev.EventRecord] = []

        self._data_dir = Path(data_dir) if data_dir is not None else None
        self._log: ev.EventLog | None = None
        if self._data_dir is not None:
            self._data_dir.mkdir(parents=True, exist_ok=True)
            (self._data_dir / BLOBS_DIRNAME).mkdir(exist_ok=True)
            log_path = self._data_dir / EVENTS_FILENAME
            if log_path.exists() and log_path.stat().st_size > 0:
                for record in ev.read_log(log_path, HASH_ALGORITHM):
                    self._events.append(record)
                    self._apply(record)
            self._log = ev.EventLog(log_path, HASH_ALGORITHM)

    # ------------------------------------------------------------------
    # commit & replay

    def _commit(self, kind: str, payload: dict) -> ev.EventRecord:
        record = ev.EventRecord(
            seq=len(self._events) + 1,
            kind=kind,
            at=self._clock(),
            payload=payload,
        )
        if self._log is not None:
            self._log.append(record)
        self._events.append(record)
        self._apply(record)
        return record

    def _apply(self, record: ev.EventRecord) -> None:
        p = record.payload
        if record.kind == ev.KIND_REGISTER_WORKER:
            worker = WorkerRecord(
                worker_id=p["worker_id"],
                display_name=p["display_name"],
                registered_at=record.at,
                token_hash=p.get("token_hash"),
            )
            self._workers[worker.worker_id] = worker
            self._worker_order.append(worker.worker_id)
            if worker.token_hash:
                self._token_index[worker.token_hash] = worker.worker_id
        elif record.kind == ev.KIND_ADD_IMAGE:
            image = ImageRecord(
                image_id=p["image_id"],
                description=p["description"],
                uploader=p["uploader"],
                uploaded_at=record.at,
                origin=ImageOrigin(p["origin"]),
            )
            self._images[image.image_id] = image
            self._image_order.append(image.image_id)
        elif record.kind == ev.KIND_CREATE_CHAIN:
            chain = ImageChain(
                chain_id=p["chain_id"],
                sequence=tuple(p["sequence"]),
                creator=p["creator"],
                contributors=frozenset(p["contributors"]),
                implicit_votes=0,
                created_at=record.at,
                provenance=provenance_from_dict(p["provenance"]),
            )
            self._chains[chain.chain_id] = chain
            self._chain_order.append(chain.chain_id)
            self._sequence_index[chain.sequence] = chain.chain_id
            self._chain_stories.setdefault(chain.chain_id, [])
        elif record.kind == ev.KIND_IMPLICIT_VOTE:
            self._chains[p["chain_id"]].implicit_votes += 1
        elif record.kind == ev.KIND_SUBMIT_STORY:
            story = StoryText(
                story_id=p["story_id"],
                chain_id=p["chain_id"],
                author=p["author"],
                version=p["version"],
                body=p["body"],
                derived_from=p.get("derived_from"),
                created_at=record.at,
            )
            self._stories[story.story_id] = story
            self._story_order.append(story.story_id)
            self._chain_stories.setdefault(story.chain_id, []).append(story.story_id)
            self._version_high[(story.chain_id, story.author)] = story.version
            self._tallies[story.story_id] = 0
        elif record.kind == ev.KIND_CAST_VOTE:
            key = (p["voter"], p["chain_id"])
            previous = self._active_votes.get(key)
            if previous is not None:
                previous.superseded = True
                self._tallies[previous.story_id] -= 1
            vote = VoteRecord(
                voter=p["voter"],
                chain_id=p["chain_id"],
                story_id=p["story_id"],
                cast_at=record.at,
            )
            self._votes.append(vote)
            self._active_votes[key] = vote
            self._tallies[vote.story_id] += 1
        else:
            raise ValueError(f"unknown event kind {record.kind!r}")

    # ------------------------------------------------------------------
    # workers

    def register_worker(
        self, display_name: str, *, token_hash: str | None = None
    ) -> WorkerRecord:
        if not display_name or not display_name.strip():
            raise EmptyDisplayName("display_name must be non-empty")
        with self._lock:
            worker_id = f"w{len(self._workers) + 1:05d}"
            payload = {"worker_id": worker_id, "display_name": display_name}
            if token_hash is not None:
                payload["token_hash"] = token_hash
            self._commit(ev.KIND_REGISTER_WORKER, payload)
            return self._workers[worker_id]

    def get_worker(self, worker_id: str) -> WorkerRecord:
        with self._lock:
            try:
                return self._workers[worker_id]
            except KeyError:
                raise UnknownWorker(f"no worker {worker_id!r}") from None

    def worker_by_token_hash(self, token_hash: str) -> WorkerRecord | None:
        with self._lock:
            worker_id = self._token_index.get(token_hash)
            return self._workers[worker_id] if worker_id else None

    def _require_worker(self, worker: str) -> None:
        if worker not in self._workers:
            raise UnknownWorker(f"no worker {worker!r}")

    # ------------------------------------------------------------------
    # image pool

    def add_image(
        self,
        blob: bytes,
        description: str,
        worker: str,
        *,
        origin: ImageOrigin = ImageOrigin.WORKER_UPLOAD,
    ) -> ImageRecord:
        """Add image bytes to the pool; idempotent by content hash.

        Re-uploading identical bytes returns the original record unchanged
        (no event is appended: nothing mutated).
        """
        if not blob:
            raise EmptyBlob("image blob must be non-empty")
        if not description or not description.strip():
            raise EmptyDescription("image description must be non-empty")
        with self._lock:
            self._require_worker(worker)
            image_id = content_hash(blob)
            existing = self._images.get(image_id)
            if existing is not None:
                return existing
            self._store_blob(image_id, blob)
            self._commit(
                ev.KIND_ADD_IMAGE,
                {
                    "image_id": image_id,
                    "description": description,
                    "uploader": worker,
                    "origin": origin.value,
                },
            )
            return self._images[image_id]

    def _store_blob(self, image_id: str, blob: bytes) -> None:
        # Blob lands before the event: a log entry always implies its bytes.
        if self._data_dir is None:
            self._memory_blobs[image_id] = blob
            return
        final = self._data_dir / BLOBS_DIRNAME / image_id
        if final.exists():
            return
        tmp = final.with_name(final.name + ".tmp")
        tmp.write_bytes(blob)
        tmp.replace(final)

    def get_image(self, image_id: str) -> ImageRecord:
        with self._lock:
            try:
                return self._images[image_id]
            except KeyError:
                raise UnknownImage(f"no image {image_id!r}") from None

    def get_blob(self, image_id: str) -> bytes:
        with self._lock:
            if image_id not in self._images:
                raise UnknownImage(f"no image {image_id!r}")
        if self._data_dir is None:
            return self._memory_blobs[image_id]
        return (self._data_dir / BLOBS_DIRNAME / image_id).read_bytes()

    def list_images(self) -> list[ImageRecord]:
        with self._lock:
            return [self._images[i] for i in self._image_order]

    @property
    def image_count(self) -> int:
        with self._lock:
            return len(self._images)

    # ------------------------------------------------------------------
    # chains

    def _store_candidate(
        self, sequence: tuple[str, ...], worker: str, provenance: Provenance,
        inherited: frozenset[str],
    ) -> ChainOutcome:
        """Atomic dedup-or-create; callers hold the lock."""
        existing_id = self._sequence_index.get(sequence)
        if existing_id is not None:
            self._commit(
                ev.KIND_IMPLICIT_VOTE, {"chain_id": existing_id, "worker": worker}
            )
            return ChainOutcome(OutcomeKind.DUPLICATE_VOTED, self._chains[existing_id])
        chain_id = canonical_chain_id(sequence)
        self._commit(
            ev.KIND_CREATE_CHAIN,
            {
                "chain_id": chain_id,
                "sequence": list(sequence),
                "creator": worker,
                "contributors": sorted(inherited | {worker}),
                "provenance": provenance_to_dict(provenance),
            },
        )
        return ChainOutcome(OutcomeKind.CREATED, self._chains[chain_id])

    def start_chain(self, base_image_id: str, worker: str) -> ChainOutcome:
        with self._lock:
            self._require_worker(worker)
            if base_image_id not in self._images:
                raise UnknownImage(f"no image {base_image_id!r}")
            return self._store_candidate(
                (base_image_id,), worker, Fresh(), frozenset()
            )

    def _get_chain_locked(self, chain_id: str) -> ImageChain:
        try:
            return self._chains[chain_id]
        except KeyError:
            raise UnknownChain(f"no chain {chain_id!r}") from None

    def _check_appended(self, appended: Sequence[str]) -> tuple[str, ...]:
        if not appended:
            raise EmptyExtension("extension must append at least one image")
        for image_id in appended:
            if image_id not in self._images:
                raise UnknownImage(f"no image {image_id!r}")
        return tuple(appended)

    def extend_chain(
        self, parent: str, appended: Sequence[str], worker: str
    ) -> ChainOutcome:
        """Continue a chain; the parent is preserved, a new chain is stored."""
        with self._lock:
            self._require_worker(worker)
            parent_chain = self._get_chain_locked(parent)
            tail = self._check_appended(appended)
            candidate = parent_chain.sequence + tail
            provenance = BranchOf(parent=parent, prefix_len=len(parent_chain.sequence))
            return self._store_candidate(
                candidate, worker, provenance, parent_chain.contributors
            )

    def branch_chain(
        self, parent: str, prefix_len: int, appended: Sequence[str], worker: str
    ) -> ChainOutcome:
        with self._lock:
            self._require_worker(worker)
            parent_chain = self._get_chain_locked(parent)
            if not 1 <= prefix_len <= len(parent_chain.sequence):
                raise PrefixOutOfRange(
                    f"prefix_len {prefix_len} outside 1..{len(parent_chain.sequence)}"
                )
            tail = self._check_appended(appended)
            candidate = parent_chain.sequence[:prefix_len] + tail
            provenance = BranchOf(parent=parent, prefix_len=prefix_len)
            return self._store_candidate(
                candidate, worker, provenance, parent_chain.contributors
            )

    def merge_chains(self, first: str, second: str, worker: str) -> ChainOutcome:
        with self._lock:
            self._require_worker(worker)
            first_chain = self._get_chain_locked(first)
            second_chain = self._get_chain_locked(second)
            candidate = merged_sequence(first_chain.sequence, second_chain.sequence)
            provenance = MergeOf(first=first, second=second)
            inherited = first_chain.contributors | second_chain.contributors
            return self._store_candidate(candidate, worker, provenance, inherited)

    def get_chain(self, chain_id: str) -> ImageChain:
        with self._lock:
            return self._get_chain_locked(chain_id)

    def list_chains(
        self,
        *,
        min_len: int | None = None,
        max_len: int | None = None,
        containing_image: str | None = None,
    ) -> list[ImageChain]:
        """All matching chains in creation order (creation order is
        created_at order: timestamps are assigned under the commit lock)."""
        with self._lock:
            result = []
            for chain_id in self._chain_order:
                chain = self._chains[chain_id]
                if min_len is not None and len(chain.sequence) < min_len:
                    continue
                if max_len is not None and len(chain.sequence) > max_len:
                    continue
                if containing_image is not None and containing_image not in chain.sequence:
                    continue
                result.append(chain)
            return result

    @property
    def chain_count(self) -> int:
        with self._lock:
            return len(self._chains)

    def chain_lengths(self) -> dict[str, int]:
        with self._lock:
            return {cid: len(self._chains[cid].sequence) for cid in self._chain_order}

    # ------------------------------------------------------------------
    # stories

    def submit_story(
        self,
        chain_id: str,
        worker: str,
        body: str,
        derived_from: str | None = None,
    ) -> StoryText:
        if not body or not body.strip():
            raise EmptyBody("story body must be non-empty")
        if len(body.encode("utf-8")) > MAX_BODY_BYTES:
            raise BodyTooLarge(f"story body exceeds {MAX_BODY_BYTES} bytes")
        with self._lock:
            self._require_worker(worker)
            self._get_chain_locked(chain_id)
            if derived_from is not None:
                source = self._stories.get(derived_from)
                if source is None:
                    raise UnknownStory(f"no story {derived_from!r}")
                if source.chain_id != chain_id:
                    raise CrossChainDerivation(
                        "derived_from must reference a story on the same chain"
                    )
            story_id = f"s{len(self._stories) + 1:06d}"
            version = self._version_high.get((chain_id, worker), 0) + 1
            payload = {
                "story_id": story_id,
                "chain_id": chain_id,
                "author": worker,
                "version": version,
                "body": body,
            }
            if derived_from is not None:
                payload["derived_from"] = derived_from
            self._commit(ev.KIND_SUBMIT_STORY, payload)
            return self._stories[story_id]

    def get_story(self, story_id: str) -> StoryText:
        with self._lock:
            try:
                return self._stories[story_id]
            except KeyError:
                raise UnknownStory(f"no story {story_id!r}") from None

    def list_stories(
        self, chain_id: str, ordering: StoryOrdering = StoryOrdering.BY_TIME_ASC
    ) -> list[StoryText]:
        with self._lock:
            self._get_chain_locked(chain_id)
            ids = self._chain_stories.get(chain_id, [])
            stories = [self._stories[s] for s in ids]  # submission order
            if ordering is StoryOrdering.BY_VOTES_DESC:
                order = {sid: n for n, sid in enumerate(ids)}
                stories.sort(
                    key=lambda s: (-self._tallies[s.story_id], order[s.story_id])
                )
            return stories

    def story_count(self) -> int:
        with self._lock:
            return len(self._stories)

    # ------------------------------------------------------------------
    # votes & scores

    def vote_story(self, story_id: str, worker: str) -> VoteRecord:
        """Cast or move this worker's single active vote on the story's chain.

        Re-voting the story already held is a no-op and returns the
        existing active record.
        """
        with self._lock:
            self._require_worker(worker)
            story = self.get_story(story_id)
            active = self._active_votes.get((worker, story.chain_id))
            if active is not None and active.story_id == story_id:
                return active
            self._commit(
                ev.KIND_CAST_VOTE,
                {"voter": worker, "chain_id": story.chain_id, "story_id": story_id},
            )
            return self._active_votes[(worker, story.chain_id)]

    def story_vote_tally(self, story_id: str) -> int:
        with self._lock:
            if story_id not in self._stories:
                raise UnknownStory(f"no story {story_id!r}")
            return self._tallies[story_id]

    def chain_score(self, chain_id: str) -> int:
        """Implicit (dedup) votes plus all active story votes on the chain."""
        with self._lock:
            chain = self._get_chain_locked(chain_id)
            story_votes = sum(
                self._tallies[s] for s in self._chain_stories.get(chain_id, [])
            )
            return chain.implicit_votes + story_votes

    def vote_records(self) -> list[VoteRecord]:
        with self._lock:
            return list(self._votes)

    def story_tallies_by_chain(self) -> dict[str, list[int]]:
        """Per chain, the active tally of each of its stories (creation order)."""
        with self._lock:
            return {
                cid: [self._tallies[s] for s in self._chain_stories.get(cid, [])]
                for cid in self._chain_order
            }

    def worker_activities(self) -> list[WorkerActivity]:
        """Per-worker contribution counts, in registration order."""
        with self._lock:
            uploads: dict[str, int] = {}
            for image in self._images.values():
                if image.origin is ImageOrigin.WORKER_UPLOAD:
                    uploads[image.uploader] = uploads.get(image.uploader, 0) + 1
            chains: dict[str, int] = {}
            for chain in self._chains.values():
                chains[chain.creator] = chains.get(chain.creator, 0) + 1
            stories: dict[str, int] = {}
            received: dict[str, int] = {}
            for story in self._stories.values():
                stories[story.author] = stories.get(story.author, 0) + 1
                received[story.author] = (
                    received.get(story.author, 0) + self._tallies[story.story_id]
                )
            return [
                WorkerActivity(
                    worker=w,
                    images_uploaded=uploads.get(w, 0),
                    chains_created=chains.get(w, 0),
                    stories_submitted=stories.get(w, 0),
                    votes_received=received.get(w, 0),
                )
                for w in self._worker_order
            ]

    def leaderboard(
        self, k: int, weights: LeaderboardWeights = LeaderboardWeights()
    ) -> list[LeaderboardEntry]:
        return rank_activities(self.worker_activities(), k, weights)

    # ------------------------------------------------------------------
    # consistent read views

    def recommendation_view(self) -> list[tuple[ImageChain, int, StoryText | None]]:
        """(chain, score, top story) rows under a single lock acquisition."""
        with self._lock:
            rows = []
            for chain_id in self._chain_order:
                chain = self._chains[chain_id]
                ids = self._chain_stories.get(chain_id, [])
                top = None
                if ids:
                    order = {sid: n for n, sid in enumerate(ids)}
                    best = min(ids, key=lambda s: (-self._tallies[s], order[s]))
                    top = self._stories[best]
                score = chain.implicit_votes + sum(self._tallies[s] for s in ids)
                rows.append((chain, score, top))
            return rows

    # ------------------------------------------------------------------
    # events, snapshots, invariant scans

    @property
    def events(self) -> list[ev.EventRecord]:
        with self._lock:
            return list(self._events)

    @property
    def event_count(self) -> int:
        with self._lock:
            return len(self._events)

    def snapshot(self) -> dict:
        """Plain-data dump of the full state for field-by-field comparison."""
        with self._lock:
            return {
                "workers": [
                    {
                        "worker_id": w.worker_id,
                        "display_name": w.display_name,
                        "registered_at": ev.rfc3339(w.registered_at),
                        "token_hash": w.token_hash,
                    }
                    for w in (self._workers[i] for i in self._worker_order)
                ],
                "images": [
                    {
                        "image_id": i.image_id,
                        "description": i.description,
                        "uploader": i.uploader,
                        "uploaded_at": ev.rfc3339(i.uploaded_at),
                        "origin": i.origin.value,
                    }
                    for i in (self._images[x] for x in self._image_order)
                ],
                "chains": [
                    {
                        "chain_id": c.chain_id,
                        "sequence": list(c.sequence),
                        "creator": c.creator,
                        "contributors": sorted(c.contributors),
                        "implicit_votes": c.implicit_votes,
                        "created_at": ev.rfc3339(c.created_at),
                        "provenance": provenance_to_dict(c.provenance),
                    }
                    for c in (self._chains[x] for x in self._chain_order)
                ],
                "stories": [
                    {
                        "story_id": s.story_id,
                        "chain_id": s.chain_id,
                        "author": s.author,
                        "version": s.version,
                        "body": s.body,
                        "derived_from": s.derived_from,
                        "created_at": ev.rfc3339(s.created_at),
                    }
                    for s in (self._stories[x] for x in self._story_order)
                ],
                "votes": [
                    {
                        "voter": v.voter,
                        "chain_id": v.chain_id,
                        "story_id": v.story_id,
                        "cast_at": ev.rfc3339(v.cast_at),
                        "superseded": v.superseded,
                    }
                    for v in self._votes
                ],
                "event_count": len(self._events),
            }

    def check_invariants(self) -> list[str]:
        """Scan for violations; an empty list means the store is consistent."""
        with self._lock:
            problems: list[str] = []

            seen: dict[tuple[str, ...], str] = {}
            for chain in self._chains.values():
                other = seen.get(chain.sequence)
                if other is not None:
                    problems.append(
                        f"duplicate sequences: {other} and {chain.chain_id}"
                    )
                seen[chain.sequence] = chain.chain_id
                if chain.chain_id != canonical_chain_id(chain.sequence):
                    problems.append(f"chain id mismatch for {chain.chain_id}")
                if chain.implicit_votes < 0:
                    problems.append(f"negative votes on {chain.chain_id}")

            created = sum(1 for e in self._events if e.kind == ev.KIND_CREATE_CHAIN)
            if created != len(self._chains):
                problems.append(
                    f"created-event count {created} != chain count {len(self._chains)}"
                )
            implicit = sum(1 for e in self._events if e.kind == ev.KIND_IMPLICIT_VOTE)
            total_votes = sum(c.implicit_votes for c in self._chains.values())
            if implicit != total_votes:
                problems.append(
                    f"implicit-vote events {implicit} != vote total {total_votes}"
                )

            per_author: dict[tuple[str, str], list[int]] = {}
            for story in self._stories.values():
                per_author.setdefault((story.chain_id, story.author), []).append(
                    story.version
                )
                if story.derived_from is not None:
                    source = self._stories.get(story.derived_from)
                    if source is None or source.chain_id != story.chain_id:
                        problems.append(f"bad derivation on {story.story_id}")
                    elif source.created_at > story.created_at:
                        problems.append(f"derivation cycle risk on {story.story_id}")
            for key, versions in per_author.items():
                if sorted(versions) != list(range(1, len(versions) + 1)):
                    problems.append(f"version gap for {key}")

            active_keys = set()
            active_count = 0
            for vote in self._votes:
                if not vote.superseded:
                    active_count += 1
                    key = (vote.voter, vote.chain_id)
                    if key in active_keys:
                        problems.append(f"two active votes for {key}")
                    active_keys.add(key)
            if active_count + sum(v.superseded for v in self._votes) != len(self._votes):
                problems.append("vote conservation broken")
            if sum(self._tallies.values()) != active_count:
                problems.append("tally total != active vote count")

            for n, record in enumerate(self._events, start=1):
                if record.seq != n:
                    problems.append(f"event seq gap at {n}")
                    break

            return problems

    def close(self) -> None:
        if self._log is not None:
            self._log.close()
