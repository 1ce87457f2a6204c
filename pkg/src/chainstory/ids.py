"""Content addressing for images and canonical identities for chains.

The hash algorithm is fixed project-wide (it is recorded in the event log
header) so that ids reproduce across runs and machines.
"""

from __future__ import annotations

import hashlib
from typing import Sequence

from .errors import EmptySequence

HASH_ALGORITHM = "sha256"

# Image ids are hex digests, so a newline can never occur inside one and the
# joined encoding below is unambiguous.
_SEPARATOR = "\n"


def content_hash(blob: bytes) -> str:
    """Hex digest of raw blob bytes. Same bytes, same id."""
    return hashlib.sha256(blob).hexdigest()


def canonical_chain_id(sequence: Sequence[str]) -> str:
    """Deterministic id of an ordered image-id sequence.

    Order-sensitive: permutations of the same ids hash differently.
    """
    if not sequence:
        raise EmptySequence("a chain sequence must contain at least one image")
    joined = _SEPARATOR.join(sequence)
    return hashlib.sha256(joined.encode("utf-8")).hexdigest()
