"""Seeded crowd simulator driving the store or a live service.

Synthetic workers take one action per step: start a chain, grow one
(extend, and occasionally branch or merge), write a story version, or
vote. Choices follow a ``BehaviorProfile``: growth prefers shorter chains
and voting prefers longer ones, the two aggregate tendencies observed in
deployment. Against the in-process target the run is fully deterministic
for a fixed seed (deterministic clock, deterministic ids), so two runs
with equal parameters produce byte-identical event logs.

CLI:
    python -m chainstory.sim --workers 25 --steps 500 --seed 7 \
        [--profile FILE] [--target inproc|http://HOST:PORT] [--out DIR]

Exit status: 0 on success, 2 when a post-run invariant scan fails,
1 on other errors (bad profile, unreachable target).
"""

from __future__ import annotations

import argparse
import json
import random
import sys
import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

import requests

from . import analytics
from .chains import ImageOrigin
from .errors import ChainStoryError, InvalidProfile, TargetUnreachable
from .stories import StoryOrdering
from .store import PlatformStore

DEFAULT_SEED = 7
DEFAULT_WORKERS = 25
DEFAULT_STEPS = 500
DEFAULT_BASE_IMAGES = 30
DEFAULT_UPLOADS_PER_WORKER = 1

# Fractions of a "grow" action resolved as branch / merge instead of a
# plain extension; the remainder extends the full chain.
BRANCH_FRACTION = 0.15
MERGE_FRACTION = 0.10
DERIVE_FRACTION = 0.30

SIM_EPOCH = datetime(2024, 1, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class BehaviorProfile:
    """Per-step action mix and selection biases for a synthetic worker.

    ``extend_length_bias`` weights chain choice when growing by
    length**(-bias): larger means a stronger pull toward short chains.
    ``vote_length_bias`` weights chain choice when voting by
    length**(+bias): larger favors long chains. ``extension_size`` is the
    distribution of how many images one growth step appends.
    """

    p_start: float = 0.12
    p_extend: float = 0.46
    p_write: float = 0.22
    p_vote: float = 0.20
    extend_length_bias: float = 1.4
    vote_length_bias: float = 2.2
    extension_size: dict[int, float] = field(
        default_factory=lambda: {1: 0.35, 2: 0.40, 3: 0.25}
    )

    def validate(self) -> None:
        probs = (self.p_start, self.p_extend, self.p_write, self.p_vote)
        if any(p < 0 for p in probs):
            raise InvalidProfile("action probabilities must be non-negative")
        if abs(sum(probs) - 1.0) > 1e-9:
            raise InvalidProfile("action probabilities must sum to 1 within 1e-9")
        for bias in (self.extend_length_bias, self.vote_length_bias):
            if not (bias >= 0 and bias == bias and bias != float("inf")):
                raise InvalidProfile("biases must be finite and non-negative")
        sizes = self.extension_size
        if not sizes or not set(sizes) <= {1, 2, 3}:
            raise InvalidProfile("extension_size must be a distribution over {1,2,3}")
        if any(w < 0 for w in sizes.values()):
            raise InvalidProfile("extension_size weights must be non-negative")
        if abs(sum(sizes.values()) - 1.0) > 1e-9:
            raise InvalidProfile("extension_size must sum to 1 within 1e-9")

    @staticmethod
    def from_file(path: str | Path) -> "BehaviorProfile":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        sizes = {int(k): float(v) for k, v in raw.get("extension_size", {}).items()}
        profile = BehaviorProfile(
            p_start=float(raw["p_start"]),
            p_extend=float(raw["p_extend"]),
            p_write=float(raw["p_write"]),
            p_vote=float(raw["p_vote"]),
            extend_length_bias=float(raw["extend_length_bias"]),
            vote_length_bias=float(raw["vote_length_bias"]),
            extension_size=sizes or {1: 0.35, 2: 0.40, 3: 0.25},
        )
        profile.validate()
        return profile

    def to_dict(self) -> dict:
        return {
            "p_start": self.p_start,
            "p_extend": self.p_extend,
            "p_write": self.p_write,
            "p_vote": self.p_vote,
            "extend_length_bias": self.extend_length_bias,
            "vote_length_bias": self.vote_length_bias,
            "extension_size": {str(k): v for k, v in self.extension_size.items()},
        }


DEFAULT_PROFILE = BehaviorProfile()


class TickClock:
    """One-second ticks from a fixed epoch; keeps replayed logs byte-stable."""

    def __init__(self, start: datetime = SIM_EPOCH):
        self._next = start

    def __call__(self) -> datetime:
        now = self._next
        self._next = now + timedelta(seconds=1)
        return now


def _weighted_index(rng: random.Random, weights: list[float]) -> int:
    total = sum(weights)
    point = rng.random() * total
    cumulative = 0.0
    for n, weight in enumerate(weights):
        cumulative += weight
        if point < cumulative:
            return n
    return len(weights) - 1


# ----------------------------------------------------------------------
# targets

class InProcessTarget:
    """Direct store calls; single-threaded and deterministic."""

    def __init__(self, store: PlatformStore):
        self.store = store

    def register(self, name: str) -> str:
        return self.store.register_worker(name).worker_id

    def add_image(self, blob: bytes, description: str, worker: str, base: bool) -> str:
        origin = ImageOrigin.BASE_POOL if base else ImageOrigin.WORKER_UPLOAD
        return self.store.add_image(blob, description, worker, origin=origin).image_id

    def image_ids(self) -> list[str]:
        return [i.image_id for i in self.store.list_images()]

    def chains(self) -> list[tuple[str, int]]:
        return [(c.chain_id, len(c.sequence)) for c in self.store.list_chains()]

    def story_ids(self, chain_id: str) -> list[str]:
        return [
            s.story_id
            for s in self.store.list_stories(chain_id, StoryOrdering.BY_TIME_ASC)
        ]

    def start(self, image_id: str, worker: str) -> bool:
        return self.store.start_chain(image_id, worker).created

    def extend(self, chain_id: str, appended: list[str], worker: str) -> bool:
        return self.store.extend_chain(chain_id, appended, worker).created

    def branch(self, chain_id: str, prefix_len: int, appended: list[str], worker: str) -> bool:
        return self.store.branch_chain(chain_id, prefix_len, appended, worker).created

    def merge(self, first: str, second: str, worker: str) -> bool:
        return self.store.merge_chains(first, second, worker).created

    def submit(self, chain_id: str, worker: str, body: str, derived_from: str | None) -> str:
        return self.store.submit_story(chain_id, worker, body, derived_from).story_id

    def vote(self, story_id: str, worker: str) -> None:
        self.store.vote_story(story_id, worker)

    def report_dict(self, threshold: int) -> dict:
        report = analytics.build_report(
            self.store.chain_lengths(), self.store.story_tallies_by_chain(), threshold
        )
        return analytics.report_to_dict(report)

    def report(self, threshold: int) -> analytics.AnalyticsReport:
        return analytics.build_report(
            self.store.chain_lengths(), self.store.story_tallies_by_chain(), threshold
        )


class ServiceTarget:
    """Same surface over HTTP; tokens held per worker, safe across threads."""

    def __init__(self, base_url: str):
        self.base = base_url.rstrip("/")
        self.tokens: dict[str, str] = {}
        self._register_lock = threading.Lock()
        try:
            response = requests.get(f"{self.base}/", timeout=5)
            response.raise_for_status()
        except requests.RequestException as exc:
            raise TargetUnreachable(f"cannot reach {self.base}: {exc}") from exc

    def _auth(self, worker: str) -> dict:
        return {"Authorization": f"Bearer {self.tokens[worker]}"}

    def _check(self, response: requests.Response) -> dict:
        if response.status_code >= 400:
            raise TargetUnreachable(
                f"{response.request.method} {response.request.url} -> "
                f"{response.status_code}: {response.text[:200]}"
            )
        return response.json()

    def register(self, name: str) -> str:
        data = self._check(
            requests.post(f"{self.base}/workers", json={"display_name": name})
        )
        with self._register_lock:
            self.tokens[data["worker_id"]] = data["token"]
        return data["worker_id"]

    def add_image(self, blob: bytes, description: str, worker: str, base: bool) -> str:
        data = self._check(
            requests.post(
                f"{self.base}/images",
                files={"blob": ("blob.bin", blob)},
                data={"description": description},
                headers=self._auth(worker),
            )
        )
        return data["image_id"]

    def image_ids(self) -> list[str]:
        data = self._check(requests.get(f"{self.base}/images", params={"limit": 100000}))
        return [i["image_id"] for i in data["items"]]

    def chains(self) -> list[tuple[str, int]]:
        data = self._check(requests.get(f"{self.base}/chains", params={"limit": 100000}))
        return [(c["chain_id"], c["length"]) for c in data["items"]]

    def story_ids(self, chain_id: str) -> list[str]:
        data = self._check(
            requests.get(
                f"{self.base}/chains/{chain_id}/stories", params={"limit": 100000}
            )
        )
        return [s["story_id"] for s in data["items"]]

    def start(self, image_id: str, worker: str) -> bool:
        data = self._check(
            requests.post(
                f"{self.base}/chains",
                json={"base_image_id": image_id},
                headers=self._auth(worker),
            )
        )
        return data["outcome"] == "created"

    def extend(self, chain_id: str, appended: list[str], worker: str) -> bool:
        data = self._check(
            requests.post(
                f"{self.base}/chains/{chain_id}/extend",
                json={"appended": appended},
                headers=self._auth(worker),
            )
        )
        return data["outcome"] == "created"

    def branch(self, chain_id: str, prefix_len: int, appended: list[str], worker: str) -> bool:
        data = self._check(
            requests.post(
                f"{self.base}/chains/{chain_id}/branch",
                json={"prefix_len": prefix_len, "appended": appended},
                headers=self._auth(worker),
            )
        )
        return data["outcome"] == "created"

    def merge(self, first: str, second: str, worker: str) -> bool:
        data = self._check(
            requests.post(
                f"{self.base}/chains/merge",
                json={"first": first, "second": second},
                headers=self._auth(worker),
            )
        )
        return data["outcome"] == "created"

    def submit(self, chain_id: str, worker: str, body: str, derived_from: str | None) -> str:
        payload: dict = {"body": body}
        if derived_from is not None:
            payload["derived_from"] = derived_from
        data = self._check(
            requests.post(
                f"{self.base}/chains/{chain_id}/stories",
                json=payload,
                headers=self._auth(worker),
            )
        )
        return data["story_id"]

    def vote(self, story_id: str, worker: str) -> None:
        self._check(
            requests.post(
                f"{self.base}/stories/{story_id}/vote", headers=self._auth(worker)
            )
        )

    def report_dict(self, threshold: int) -> dict:
        return self._check(
            requests.get(
                f"{self.base}/analytics/summary",
                params={"format": "json", "threshold": threshold},
            )
        )


# ----------------------------------------------------------------------
# the simulation proper

@dataclass
class SimulationResult:
    seed: int
    workers: list[str]
    created_chains: int
    duplicate_votes: int
    stories_submitted: int
    votes_cast: int
    report_dict: dict
    violations: list[str]
    store: PlatformStore | None = None
    report: analytics.AnalyticsReport | None = None

    @property
    def ok(self) -> bool:
        return not self.violations


class _WorkerBrain:
    """Action logic for one simulated worker; owns its RNG in service mode."""

    def __init__(self, target, worker_id: str, rng: random.Random,
                 profile: BehaviorProfile, counters: "_Counters"):
        self.target = target
        self.worker = worker_id
        self.rng = rng
        self.profile = profile
        self.counters = counters
        self.active_vote: dict[str, str] = {}  # chain_id -> story_id held

    def step(self, step_no: int) -> None:
        p = self.profile
        roll = _weighted_index(
            self.rng, [p.p_start, p.p_extend, p.p_write, p.p_vote]
        )
        action = ("start", "grow", "write", "vote")[roll]

        if action == "vote":
            if self._try_vote():
                return
            action = "write"
        if action == "write":
            if self._try_write(step_no):
                return
            action = "start"
        if action == "grow":
            if self._try_grow():
                return
        self._start()

    # -- individual moves ------------------------------------------------

    def _record_outcome(self, created: bool) -> None:
        if created:
            self.counters.created += 1
        else:
            self.counters.duplicated += 1

    def _start(self) -> None:
        images = self.target.image_ids()
        image_id = images[self.rng.randrange(len(images))]
        self._record_outcome(self.target.start(image_id, self.worker))

    def _pick_chain(self, chains: list[tuple[str, int]], bias: float) -> str:
        weights = [length ** bias for _, length in chains]
        return chains[_weighted_index(self.rng, weights)][0]

    def _extension(self) -> list[str]:
        sizes = sorted(self.profile.extension_size.items())
        count = sizes[_weighted_index(self.rng, [w for _, w in sizes])][0]
        images = self.target.image_ids()
        return [images[self.rng.randrange(len(images))] for _ in range(count)]

    def _try_grow(self) -> bool:
        chains = self.target.chains()
        if not chains:
            return False
        shape = self.rng.random()
        if shape < MERGE_FRACTION and len(chains) >= 2:
            first = chains[self.rng.randrange(len(chains))][0]
            second = chains[self.rng.randrange(len(chains))][0]
            self._record_outcome(self.target.merge(first, second, self.worker))
            return True
        parent = self._pick_chain(chains, -self.profile.extend_length_bias)
        appended = self._extension()
        if shape < MERGE_FRACTION + BRANCH_FRACTION:
            length = dict(chains)[parent]
            prefix_len = self.rng.randint(1, length)
            self._record_outcome(
                self.target.branch(parent, prefix_len, appended, self.worker)
            )
            return True
        self._record_outcome(self.target.extend(parent, appended, self.worker))
        return True

    def _try_write(self, step_no: int) -> bool:
        chains = self.target.chains()
        if not chains:
            return False
        chain_id = chains[self.rng.randrange(len(chains))][0]
        derived_from = None
        existing = self.target.story_ids(chain_id)
        if existing and self.rng.random() < DERIVE_FRACTION:
            derived_from = existing[self.rng.randrange(len(existing))]
        body = (
            f"Step {step_no}: {self.worker} carries the tale of "
            f"{chain_id[:10]} another scene forward."
        )
        self.target.submit(chain_id, self.worker, body, derived_from)
        self.counters.stories += 1
        return True

    def _try_vote(self) -> bool:
        chains = self.target.chains()
        candidates: list[tuple[str, int, list[str]]] = []
        for chain_id, length in chains:
            stories = [
                s
                for s in self.target.story_ids(chain_id)
                if s != self.active_vote.get(chain_id)
            ]
            if stories:
                candidates.append((chain_id, length, stories))
        if not candidates:
            return False
        weights = [length ** self.profile.vote_length_bias for _, length, _ in candidates]
        chain_id, _, stories = candidates[_weighted_index(self.rng, weights)]
        story_id = stories[self.rng.randrange(len(stories))]
        self.target.vote(story_id, self.worker)
        self.active_vote[chain_id] = story_id
        self.counters.votes += 1
        return True


@dataclass
class _Counters:
    created: int = 0
    duplicated: int = 0
    stories: int = 0
    votes: int = 0


def _seed_world(target, workers: int, base_images: int,
                uploads_per_worker: int) -> list[str]:
    curator = target.register("curator")
    worker_ids = [target.register(f"sim-worker-{n:03d}") for n in range(1, workers + 1)]
    for n in range(base_images):
        target.add_image(
            f"base-image-{n:03d}".encode(), f"base scene {n}", curator, base=True
        )
    for worker_id in worker_ids:
        for j in range(uploads_per_worker):
            target.add_image(
                f"upload-{worker_id}-{j}".encode(),
                f"scene offered by {worker_id} #{j}",
                worker_id,
                base=False,
            )
    return worker_ids


def run_simulation(
    workers: int,
    steps: int,
    seed: int,
    profile: BehaviorProfile = DEFAULT_PROFILE,
    target: str = "inproc",
    out_dir: str | Path | None = None,
    *,
    base_images: int = DEFAULT_BASE_IMAGES,
    uploads_per_worker: int = DEFAULT_UPLOADS_PER_WORKER,
    threshold: int = analytics.DEFAULT_LENGTH_THRESHOLD,
) -> SimulationResult:
    """Run the simulation and return the analytics report plus scan results.

    ``target`` is "inproc" for the deterministic single-threaded store
    target, or a service base URL, in which case each worker issues its
    requests from its own thread.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    profile.validate()

    counters = _Counters()
    rng = random.Random(seed)

    if target == "inproc":
        store = PlatformStore(out_dir, clock=TickClock())
        world = InProcessTarget(store)
        worker_ids = _seed_world(world, workers, base_images, uploads_per_worker)
        brains = {
            w: _WorkerBrain(world, w, rng, profile, counters) for w in worker_ids
        }
        for step_no in range(1, steps + 1):
            worker_id = worker_ids[rng.randrange(len(worker_ids))]
            brains[worker_id].step(step_no)
        violations = store.check_invariants()
        violations += _conservation_scan(world.chains(), counters, store)
        report = world.report(threshold)
        result = SimulationResult(
            seed=seed,
            workers=worker_ids,
            created_chains=counters.created,
            duplicate_votes=counters.duplicated,
            stories_submitted=counters.stories,
            votes_cast=counters.votes,
            report_dict=analytics.report_to_dict(report),
            violations=violations,
            store=store,
            report=report,
        )
    else:
        world = ServiceTarget(target)
        chains_before = len(world.chains())
        votes_before = _implicit_vote_total(world)
        worker_ids = _seed_world(world, workers, base_images, uploads_per_worker)
        brains = [
            _WorkerBrain(
                world, w, random.Random(seed * 1_000_003 + n), profile, counters
            )
            for n, w in enumerate(worker_ids)
        ]
        share = [steps // workers + (1 if n < steps % workers else 0)
                 for n in range(workers)]
        threads = [
            threading.Thread(target=_run_share, args=(brain, count), daemon=True)
            for brain, count in zip(brains, share)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        violations = _service_scan(world, counters, chains_before, votes_before)
        result = SimulationResult(
            seed=seed,
            workers=worker_ids,
            created_chains=counters.created,
            duplicate_votes=counters.duplicated,
            stories_submitted=counters.stories,
            votes_cast=counters.votes,
            report_dict=world.report_dict(threshold),
            violations=violations,
        )

    if out_dir is not None:
        _write_outputs(Path(out_dir), result, profile, workers, steps)
    return result


def _run_share(brain: _WorkerBrain, count: int) -> None:
    for step_no in range(1, count + 1):
        brain.step(step_no)


def _conservation_scan(chains, counters: _Counters, store: PlatformStore) -> list[str]:
    problems = []
    if counters.created != len(chains):
        problems.append(
            f"created outcomes {counters.created} != stored chains {len(chains)}"
        )
    total_votes = sum(c.implicit_votes for c in store.list_chains())
    if counters.duplicated != total_votes:
        problems.append(
            f"duplicate outcomes {counters.duplicated} != implicit votes {total_votes}"
        )
    return problems


def _implicit_vote_total(world: ServiceTarget) -> int:
    data = world._check(
        requests.get(f"{world.base}/chains", params={"limit": 100000})
    )
    return sum(c["implicit_votes"] for c in data["items"])


def _service_scan(world: ServiceTarget, counters: _Counters,
                  chains_before: int, votes_before: int) -> list[str]:
    problems = []
    data = world._check(
        requests.get(f"{world.base}/chains", params={"limit": 100000})
    )
    sequences = [tuple(c["sequence"]) for c in data["items"]]
    if len(sequences) != len(set(sequences)):
        problems.append("duplicate sequences visible through the service")
    if len(sequences) - chains_before != counters.created:
        problems.append(
            f"created outcomes {counters.created} != new chains "
            f"{len(sequences) - chains_before}"
        )
    votes_now = sum(c["implicit_votes"] for c in data["items"])
    if votes_now - votes_before != counters.duplicated:
        problems.append(
            f"duplicate outcomes {counters.duplicated} != new implicit votes "
            f"{votes_now - votes_before}"
        )
    return problems


def _write_outputs(out_dir: Path, result: SimulationResult,
                   profile: BehaviorProfile, workers: int, steps: int) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    if result.report is not None:
        (out_dir / "summary.txt").write_text(
            analytics.report_table(result.report), encoding="utf-8"
        )
    meta = {
        "seed": result.seed,
        "workers": workers,
        "steps": steps,
        "profile": profile.to_dict(),
        "created_chains": result.created_chains,
        "duplicate_votes": result.duplicate_votes,
        "stories_submitted": result.stories_submitted,
        "votes_cast": result.votes_cast,
        "violations": result.violations,
        "report": result.report_dict,
    }
    (out_dir / "summary.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _format_test_line(name: str, test_dict: dict) -> str:
    if "error" in test_dict:
        return f"{name}: not computable ({test_dict['error']})"
    return (
        f"{name}: t = {test_dict['t_statistic']:.4f}, "
        f"df = {test_dict['degrees_of_freedom']:.2f}, "
        f"p = {test_dict['p_value']:.4g}"
    )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="chainstory-sim", description=__doc__.splitlines()[0]
    )
    parser.add_argument("--workers", type=int, default=DEFAULT_WORKERS)
    parser.add_argument("--steps", type=int, default=DEFAULT_STEPS)
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument("--profile", type=Path, default=None,
                        help="JSON file with BehaviorProfile fields")
    parser.add_argument("--target", default="inproc",
                        help='"inproc" or a service base URL')
    parser.add_argument("--out", type=Path, default=None,
                        help="directory for events.log (inproc), summary.txt, summary.json")
    parser.add_argument("--base-images", type=int, default=DEFAULT_BASE_IMAGES)
    parser.add_argument("--uploads-per-worker", type=int,
                        default=DEFAULT_UPLOADS_PER_WORKER)
    parser.add_argument("--threshold", type=int,
                        default=analytics.DEFAULT_LENGTH_THRESHOLD)
    args = parser.parse_args(argv)

    if args.steps < 1 or args.workers < 1:
        print("error: --workers and --steps must be >= 1", file=sys.stderr)
        return 1

    try:
        profile = (
            BehaviorProfile.from_file(args.profile) if args.profile else DEFAULT_PROFILE
        )
        result = run_simulation(
            args.workers,
            args.steps,
            args.seed,
            profile=profile,
            target=args.target,
            out_dir=args.out,
            base_images=args.base_images,
            uploads_per_worker=args.uploads_per_worker,
            threshold=args.threshold,
        )
    except (ChainStoryError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    report = result.report_dict
    print(
        f"chains={report['count']} mean_length={report['mean_length']:.3f} "
        f"max_length={report['max_length']} stories={result.stories_submitted} "
        f"votes={result.votes_cast} dedup_votes={result.duplicate_votes}"
    )
    print(
        f"bucket means: low={report['low_mean_bucket_count']} "
        f"high={report['high_mean_bucket_count']}  "
        f"vote means: low={report['low_vote_mean']} high={report['high_vote_mean']}"
    )
    print(_format_test_line("length t-test", report["length_t_test"]))
    print(_format_test_line("votes t-test", report["votes_t_test"]))
    if result.violations:
        for problem in result.violations:
            print(f"INVARIANT VIOLATION: {problem}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
