import random

import pytest

from chainstory.errors import CorruptLog
from chainstory.store import PlatformStore
from support import FlatOracle, make_pool, run_random_ops


def _mutate_a_bit(store, n_workers=4, n_images=8):
    workers = [store.register_worker(f"w{n}").worker_id for n in range(n_workers)]
    images = make_pool(store, n_images, workers[0])
    chain = store.start_chain(images[0], workers[1]).chain
    store.start_chain(images[0], workers[2])
    grown = store.extend_chain(chain.chain_id, images[1:3], workers[1]).chain
    story = store.submit_story(grown.chain_id, workers[3], "a tale of two images")
    store.vote_story(story.story_id, workers[0])
    store.vote_story(story.story_id, workers[2])
    return grown


def test_restart_replays_identical_state(tmp_path):
    store = PlatformStore(tmp_path)
    _mutate_a_bit(store)
    expected = store.snapshot()
    store.close()

    reopened = PlatformStore(tmp_path)
    assert reopened.snapshot() == expected
    assert reopened.check_invariants() == []
    reopened.close()


def test_restarted_store_accepts_further_mutations(tmp_path):
    store = PlatformStore(tmp_path)
    grown = _mutate_a_bit(store)
    store.close()

    reopened = PlatformStore(tmp_path)
    worker = reopened.register_worker("late").worker_id
    outcome = reopened.extend_chain(
        grown.chain_id, [reopened.list_images()[3].image_id], worker
    )
    assert outcome.created
    assert reopened.check_invariants() == []
    seqs = [e.seq for e in reopened.events]
    assert seqs == list(range(1, len(seqs) + 1))
    reopened.close()


def test_blobs_survive_restart(tmp_path):
    store = PlatformStore(tmp_path)
    worker = store.register_worker("w").worker_id
    record = store.add_image(b"pixel-data", "dot", worker)
    store.close()

    reopened = PlatformStore(tmp_path)
    assert reopened.get_blob(record.image_id) == b"pixel-data"
    reopened.close()


def test_token_hash_survives_restart(tmp_path):
    store = PlatformStore(tmp_path)
    store.register_worker("alice", token_hash="ab" * 32)
    store.close()

    reopened = PlatformStore(tmp_path)
    found = reopened.worker_by_token_hash("ab" * 32)
    assert found is not None and found.display_name == "alice"
    reopened.close()


def test_corrupt_log_refuses_to_open(tmp_path):
    store = PlatformStore(tmp_path)
    _mutate_a_bit(store)
    store.close()
    log = tmp_path / "events.log"
    log.write_bytes(log.read_bytes()[:-5])
    with pytest.raises(CorruptLog):
        PlatformStore(tmp_path)


def test_replay_at_every_prefix_matches_live_state(tmp_path):
    """Simulated kill points: after each mutation, a fresh store opened on
    the same directory must equal the live one field by field."""
    rng = random.Random(7)
    live = PlatformStore(tmp_path)
    workers = [live.register_worker(f"w{n}").worker_id for n in range(3)]
    images = make_pool(live, 6, workers[0])
    oracle = FlatOracle()
    for _ in range(12):
        run_random_ops(live, oracle, rng, 2, images, workers)
        # a second handle replays the same log; the live writer is append-only
        replica = PlatformStore(tmp_path)
        assert replica.snapshot() == live.snapshot()
        replica.close()
    live.close()


def test_event_accounting_one_event_per_state_change(store, worker, pool):
    base = store.event_count  # registration + pool uploads
    chain = store.start_chain(pool[0], worker).chain
    assert store.event_count == base + 1  # create_chain
    store.start_chain(pool[0], worker)
    assert store.event_count == base + 2  # implicit_vote only
    store.add_image(b"img-0", "same bytes as pool image 0", worker)
    assert store.event_count == base + 2  # idempotent re-upload: no event
    story = store.submit_story(chain.chain_id, worker, "tale")
    assert store.event_count == base + 3
    store.vote_story(story.story_id, worker)
    assert store.event_count == base + 4
    store.vote_story(story.story_id, worker)  # idempotent re-vote
    assert store.event_count == base + 4
