"""Append-only event log: line-delimited, checksum-chained, replayable.

Wire format (documented here and in the README; this is the bit-exact
contract):

* Every line is ``<body>\\t<checksum>\\n`` where ``body`` is compact JSON
  with sorted keys and ``checksum`` is the hex sha256 of
  ``<previous line's checksum> + "\\n" + <body>`` (the header uses the
  empty string as its previous checksum). The chain makes both tampering
  and reordering detectable.
* Line 1 is the header: ``{"format": 1, "hash": "sha256"}``.
* Every further line is one event:
  ``{"at": <RFC 3339 UTC>, "kind": <kind>, "payload": {...}, "seq": <n>}``
  with ``seq`` gapless from 1.

A log that fails any check (bad checksum, gap, torn or unterminated last
line, unknown header) raises ``CorruptLog``; no partial state is ever
served from a damaged log.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .errors import CorruptLog

LOG_FORMAT_VERSION = 1

KIND_REGISTER_WORKER = "register_worker"
KIND_ADD_IMAGE = "add_image"
KIND_CREATE_CHAIN = "create_chain"
KIND_IMPLICIT_VOTE = "implicit_vote"
KIND_SUBMIT_STORY = "submit_story"
KIND_CAST_VOTE = "cast_vote"

EVENT_KINDS = (
    KIND_REGISTER_WORKER,
    KIND_ADD_IMAGE,
    KIND_CREATE_CHAIN,
    KIND_IMPLICIT_VOTE,
    KIND_SUBMIT_STORY,
    KIND_CAST_VOTE,
)


def rfc3339(dt: datetime) -> str:
    """Format an aware UTC datetime as RFC 3339 with a Z suffix."""
    return dt.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def parse_rfc3339(text: str) -> datetime:
    return datetime.fromisoformat(text.replace("Z", "+00:00"))


@dataclass(frozen=True)
class EventRecord:
    seq: int
    kind: str
    at: datetime
    payload: dict

    def to_body(self) -> str:
        return json.dumps(
            {
                "at": rfc3339(self.at),
                "kind": self.kind,
                "payload": self.payload,
                "seq": self.seq,
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    @staticmethod
    def from_body(body: str) -> "EventRecord":
        try:
            obj = json.loads(body)
            return EventRecord(
                seq=int(obj["seq"]),
                kind=str(obj["kind"]),
                at=parse_rfc3339(obj["at"]),
                payload=dict(obj["payload"]),
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise CorruptLog(f"undecodable event line: {exc}") from exc


def _chain_checksum(prev: str, body: str) -> str:
    return hashlib.sha256((prev + "\n" + body).encode("utf-8")).hexdigest()


def _header_body(hash_algorithm: str) -> str:
    return json.dumps(
        {"format": LOG_FORMAT_VERSION, "hash": hash_algorithm},
        sort_keys=True,
        separators=(",", ":"),
    )


def read_log(path: Path, hash_algorithm: str) -> list[EventRecord]:
    """Read and fully validate a log file. Raises ``CorruptLog`` on any defect."""
    raw = path.read_bytes()
    if not raw:
        raise CorruptLog("log file is empty (missing header)")
    text = raw.decode("utf-8")
    if not text.endswith("\n"):
        raise CorruptLog("last log line is truncated")
    lines = text.split("\n")[:-1]

    def split_line(line: str, what: str) -> tuple[str, str]:
        body, sep, checksum = line.rpartition("\t")
        if not sep:
            raise CorruptLog(f"{what} has no checksum field")
        return body, checksum

    header_body, header_sum = split_line(lines[0], "header")
    if _chain_checksum("", header_body) != header_sum:
        raise CorruptLog("header checksum mismatch")
    try:
        header = json.loads(header_body)
    except ValueError as exc:
        raise CorruptLog("undecodable header") from exc
    if header.get("format") != LOG_FORMAT_VERSION:
        raise CorruptLog(f"unsupported log format {header.get('format')!r}")
    if header.get("hash") != hash_algorithm:
        raise CorruptLog(
            f"log hash algorithm {header.get('hash')!r} does not match {hash_algorithm!r}"
        )

    records: list[EventRecord] = []
    prev_sum = header_sum
    for n, line in enumerate(lines[1:], start=1):
        body, checksum = split_line(line, f"event line {n}")
        if _chain_checksum(prev_sum, body) != checksum:
            raise CorruptLog(f"checksum chain broken at event line {n}")
        record = EventRecord.from_body(body)
        if record.seq != n:
            raise CorruptLog(f"sequence gap: expected seq {n}, found {record.seq}")
        if record.kind not in EVENT_KINDS:
            raise CorruptLog(f"unknown event kind {record.kind!r} at seq {record.seq}")
        records.append(record)
        prev_sum = checksum
    return records


class EventLog:
    """Writer handle for one log file; every append is flushed and fsynced."""

    def __init__(self, path: Path, hash_algorithm: str):
        self.path = Path(path)
        self._hash_algorithm = hash_algorithm
        self._last_checksum = ""
        self._next_seq = 1
        if self.path.exists() and self.path.stat().st_size > 0:
            records = read_log(self.path, hash_algorithm)
            self._next_seq = len(records) + 1
            self._last_checksum = self._tail_checksum()
            self._fh = open(self.path, "a", encoding="utf-8")
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "w", encoding="utf-8")
            body = _header_body(hash_algorithm)
            self._write_line(body)

    def _tail_checksum(self) -> str:
        last = self.path.read_text(encoding="utf-8").rstrip("\n").rsplit("\n", 1)[-1]
        return last.rpartition("\t")[2]

    def _write_line(self, body: str) -> None:
        checksum = _chain_checksum(self._last_checksum, body)
        self._fh.write(f"{body}\t{checksum}\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())
        self._last_checksum = checksum

    @property
    def next_seq(self) -> int:
        return self._next_seq

    def append(self, record: EventRecord) -> None:
        if record.seq != self._next_seq:
            raise ValueError(f"expected seq {self._next_seq}, got {record.seq}")
        self._write_line(record.to_body())
        self._next_seq += 1

    def close(self) -> None:
        self._fh.close()
