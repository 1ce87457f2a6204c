import hashlib

import pytest
from hypothesis import given
from hypothesis import strategies as st

from chainstory.errors import EmptySequence
from chainstory.ids import canonical_chain_id, content_hash


def test_content_hash_is_sha256_of_bytes():
    assert content_hash(b"abc") == hashlib.sha256(b"abc").hexdigest()


def test_content_hash_same_bytes_same_id():
    assert content_hash(b"\x00\x01") == content_hash(b"\x00\x01")
    assert content_hash(b"\x00\x01") != content_hash(b"\x01\x00")


def test_single_element_chain_id_hashes_the_id_itself():
    assert canonical_chain_id(["a"]) == hashlib.sha256(b"a").hexdigest()


def test_order_sensitivity():
    assert canonical_chain_id(["a", "b"]) != canonical_chain_id(["b", "a"])


def test_determinism():
    assert canonical_chain_id(["a", "b", "c"]) == canonical_chain_id(["a", "b", "c"])


def test_empty_sequence_rejected():
    with pytest.raises(EmptySequence):
        canonical_chain_id([])


@given(
    st.lists(
        st.lists(st.text(alphabet="0123456789abcdef", min_size=1, max_size=8),
                 min_size=1, max_size=6).map(tuple),
        min_size=2, max_size=30, unique=True,
    )
)
def test_no_collisions_on_distinct_sequences(sequences):
    ids = [canonical_chain_id(list(s)) for s in sequences]
    assert len(set(ids)) == len(sequences)
