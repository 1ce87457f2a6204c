from __future__ import annotations

import random

import pytest

from chainstory.store import PlatformStore


@pytest.fixture
def store():
    return PlatformStore()


@pytest.fixture
def worker(store):
    return store.register_worker("alice").worker_id


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)


@pytest.fixture
def pool(store, worker):
    """Six pool images, enough for small chain scenarios."""
    return [
        store.add_image(f"img-{n}".encode(), f"scene {n}", worker).image_id
        for n in range(6)
    ]
