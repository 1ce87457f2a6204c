#!/usr/bin/env python3
"""Seed a data directory with a small demo world (base pool, a few chains,
stories, and votes) so the service and web client have something to show.

    python scripts/seed_demo.py --data-dir ./data
"""

import argparse
from pathlib import Path

from chainstory.chains import ImageOrigin
from chainstory.store import PlatformStore

SCENES = [
    ("a red lighthouse at dusk", b"demo-lighthouse"),
    ("two travelers on a ridge", b"demo-travelers"),
    ("an empty harbor", b"demo-harbor"),
    ("a letter left on a table", b"demo-letter"),
    ("rain over rooftops", b"demo-rain"),
    ("a door ajar onto dark stairs", b"demo-door"),
]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--data-dir", type=Path, default=Path("./data"))
    args = parser.parse_args()

    store = PlatformStore(args.data_dir)
    if store.chain_count:
        print(f"{args.data_dir} already has data; leaving it alone")
        return 0

    curator = store.register_worker("curator").worker_id
    images = [
        store.add_image(blob, description, curator, origin=ImageOrigin.BASE_POOL).image_id
        for description, blob in SCENES
    ]
    alice = store.register_worker("alice").worker_id
    bob = store.register_worker("bob").worker_id

    ridge = store.start_chain(images[1], alice).chain
    journey = store.extend_chain(ridge.chain_id, [images[2], images[0]], alice).chain
    detour = store.branch_chain(journey.chain_id, 2, [images[4]], bob).chain
    store.merge_chains(detour.chain_id, ridge.chain_id, bob)

    first = store.submit_story(
        journey.chain_id, alice,
        "They crested the ridge at noon and saw the harbor empty below, "
        "the lighthouse already burning against the early dark.",
    )
    second = store.submit_story(
        journey.chain_id, bob,
        "The harbor was empty because everyone knew what the light meant.",
        derived_from=first.story_id,
    )
    store.vote_story(second.story_id, alice)
    store.vote_story(second.story_id, bob)

    print(
        f"seeded {store.image_count} images, {store.chain_count} chains, "
        f"{store.story_count()} stories into {args.data_dir}"
    )
    store.close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
