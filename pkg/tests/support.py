"""Shared test helpers: fixture builders and independent oracles.

The oracles here deliberately re-derive results by the dumbest route
available (flat lists, linear scans, quadrature) so they stay independent
of the code paths they check.
"""

from __future__ import annotations

import os
import random
import signal
import socket
import subprocess
import sys
import time
from math import exp, lgamma, log, pi

from chainstory.store import PlatformStore


class FlatOracle:
    """Brute-force chain store: every proposed sequence in a flat list,
    duplicate detection by linear scan over whole sequences."""

    def __init__(self):
        self.rows: list[list] = []  # [sequence, votes]

    def _find(self, sequence: list[str]):
        for row in self.rows:
            if row[0] == sequence:
                return row
        return None

    def _propose(self, sequence: list[str]) -> bool:
        row = self._find(sequence)
        if row is not None:
            row[1] += 1
            return False
        self.rows.append([list(sequence), 0])
        return True

    def start(self, image_id: str) -> bool:
        return self._propose([image_id])

    def extend(self, parent_sequence, appended) -> bool:
        return self._propose(list(parent_sequence) + list(appended))

    def branch(self, parent_sequence, prefix_len, appended) -> bool:
        return self._propose(list(parent_sequence)[:prefix_len] + list(appended))

    def merge(self, first_sequence, second_sequence) -> bool:
        first, second = list(first_sequence), list(second_sequence)
        if first and second and first[-1] == second[0]:
            joined = first + second[1:]
        else:
            joined = first + second
        return self._propose(joined)

    def state(self) -> dict[tuple, int]:
        return {tuple(seq): votes for seq, votes in self.rows}


def store_state(store: PlatformStore) -> dict[tuple, int]:
    return {c.sequence: c.implicit_votes for c in store.list_chains()}


def make_pool(store: PlatformStore, n_images: int, worker: str) -> list[str]:
    return [
        store.add_image(f"pool-{i:04d}".encode(), f"scene {i}", worker).image_id
        for i in range(n_images)
    ]


def apply_op(store: PlatformStore, oracle: FlatOracle, op: tuple,
             images: list[str], workers: list[str]) -> bool:
    """Apply one symbolic op to both the store and the oracle.

    Ops are (kind, a, b, size) with the integers mapped modulo the live
    counts, so any integer tuple is a valid op. Returns the store's
    created/duplicated outcome after asserting both sides agree.
    """
    kind, a, b, size = op
    worker = workers[a % len(workers)]
    chains = store.list_chains()
    if kind != "start" and not chains:
        kind = "start"
    if kind == "start":
        image = images[b % len(images)]
        outcome = store.start_chain(image, worker)
        expected = oracle.start(image)
    elif kind == "extend":
        parent = chains[b % len(chains)]
        appended = [images[(a + b + i) % len(images)] for i in range(size)]
        outcome = store.extend_chain(parent.chain_id, appended, worker)
        expected = oracle.extend(parent.sequence, appended)
    elif kind == "branch":
        parent = chains[b % len(chains)]
        prefix_len = 1 + a % len(parent.sequence)
        appended = [images[(a + b + i) % len(images)] for i in range(size)]
        outcome = store.branch_chain(parent.chain_id, prefix_len, appended, worker)
        expected = oracle.branch(parent.sequence, prefix_len, appended)
    else:
        first = chains[a % len(chains)]
        second = chains[b % len(chains)]
        outcome = store.merge_chains(first.chain_id, second.chain_id, worker)
        expected = oracle.merge(first.sequence, second.sequence)
    assert outcome.created == expected, f"outcome mismatch on {op}"
    return outcome.created


def run_random_ops(store: PlatformStore, oracle: FlatOracle, rng: random.Random,
                   n_ops: int, images: list[str], workers: list[str]) -> None:
    kinds = ["start", "extend", "extend", "branch", "merge"]
    for _ in range(n_ops):
        op = (
            rng.choice(kinds),
            rng.randrange(1_000_000),
            rng.randrange(1_000_000),
            rng.randint(1, 3),
        )
        apply_op(store, oracle, op, images, workers)


# ----------------------------------------------------------------------
# live service process

def free_port() -> int:
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()
    return port


class ServiceProcess:
    """A real service subprocess bound to a private data dir and port."""

    def __init__(self, data_dir, port: int | None = None):
        self.data_dir = str(data_dir)
        self.port = port or free_port()
        self.url = f"http://127.0.0.1:{self.port}"
        self.process: subprocess.Popen | None = None

    def start(self, timeout: float = 15.0) -> "ServiceProcess":
        import requests

        self.process = subprocess.Popen(
            [
                sys.executable, "-m", "chainstory.service",
                "--data-dir", self.data_dir,
                "--port", str(self.port),
            ],
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
        )
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if self.process.poll() is not None:
                output = self.process.stdout.read().decode(errors="replace")
                raise RuntimeError(f"service exited early:\n{output}")
            try:
                requests.get(f"{self.url}/", timeout=0.5)
                return self
            except requests.RequestException:
                time.sleep(0.05)
        raise RuntimeError("service did not come up in time")

    def kill(self) -> None:
        if self.process and self.process.poll() is None:
            os.kill(self.process.pid, signal.SIGKILL)
            self.process.wait()

    def __enter__(self) -> "ServiceProcess":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.kill()


# ----------------------------------------------------------------------
# t-distribution oracle: direct numerical integration of the density

def t_density(x: float, df: float) -> float:
    return exp(
        lgamma((df + 1.0) / 2.0)
        - lgamma(df / 2.0)
        - 0.5 * log(df * pi)
        - ((df + 1.0) / 2.0) * log(1.0 + x * x / df)
    )


def p_two_sided_by_quadrature(t: float, df: float) -> float:
    """Two-sided p by integrating the t density over the upper tail."""
    from scipy import integrate

    tail, _ = integrate.quad(
        t_density, abs(t), float("inf"), args=(df,), epsabs=1e-14, epsrel=1e-13
    )
    return 2.0 * tail
