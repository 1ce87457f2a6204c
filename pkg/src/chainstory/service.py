"""HTTP service exposing the platform over a documented JSON surface.

Run with ``python -m chainstory.service --data-dir DIR [--host H --port P]``.
Configuration fields are overridable through CHAINSTORY_* environment
variables (see ``ServiceConfig``). On startup the service replays the
event log in the data directory and refuses to start if the log fails
validation. There is deliberately no endpoint that deletes or rewrites
anything.

Mutating endpoints require ``Authorization: Bearer <token>`` with the
token issued at registration; the token itself is returned once and only
its hash is stored. Errors come back as
``{"error": {"code": ..., "message": ...}}``.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import secrets
import socket
import sys
from dataclasses import dataclass, field
from pathlib import Path

import uvicorn
from fastapi import Depends, FastAPI, File, Form, Header, Request, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse, Response
from fastapi.staticfiles import StaticFiles

from . import analytics, recommend
from .chains import ImageChain, ImageRecord, provenance_to_dict
from .errors import ChainStoryError, PortInUse, Unauthorized
from .events import rfc3339
from .stories import StoryOrdering, StoryText
from .store import PlatformStore, WorkerRecord
from .votes import LeaderboardWeights, VoteRecord

ENV_PREFIX = "CHAINSTORY_"


@dataclass
class ServiceConfig:
    """Service settings; every field maps to CHAINSTORY_<UPPER_NAME>."""

    data_dir: Path = Path("./data")
    host: str = "127.0.0.1"
    port: int = 8787
    weights: LeaderboardWeights = field(default_factory=LeaderboardWeights)
    smoothing: int = 1
    threshold: int = analytics.DEFAULT_LENGTH_THRESHOLD
    page_limit: int = 50
    static_dir: Path | None = None

    @classmethod
    def from_env(cls, env=os.environ) -> "ServiceConfig":
        def get(name: str, default):
            return env.get(ENV_PREFIX + name, default)

        static = get("STATIC_DIR", None)
        return cls(
            data_dir=Path(get("DATA_DIR", "./data")),
            host=get("HOST", "127.0.0.1"),
            port=int(get("PORT", 8787)),
            weights=LeaderboardWeights(
                image=int(get("WEIGHT_IMAGE", 1)),
                chain=int(get("WEIGHT_CHAIN", 1)),
                story=int(get("WEIGHT_STORY", 1)),
                vote=int(get("WEIGHT_VOTE", 2)),
            ),
            smoothing=int(get("SMOOTHING", 1)),
            threshold=int(get("THRESHOLD", analytics.DEFAULT_LENGTH_THRESHOLD)),
            page_limit=int(get("PAGE_LIMIT", 50)),
            static_dir=Path(static) if static else None,
        )


# ----------------------------------------------------------------------
# wire shapes

def worker_json(w: WorkerRecord, *, token: str | None = None) -> dict:
    data = {
        "worker_id": w.worker_id,
        "display_name": w.display_name,
        "registered_at": rfc3339(w.registered_at),
    }
    if token is not None:
        data["token"] = token
    return data


def image_json(i: ImageRecord) -> dict:
    return {
        "image_id": i.image_id,
        "description": i.description,
        "uploader": i.uploader,
        "uploaded_at": rfc3339(i.uploaded_at),
        "origin": i.origin.value,
    }


def chain_json(c: ImageChain) -> dict:
    return {
        "chain_id": c.chain_id,
        "sequence": list(c.sequence),
        "length": len(c.sequence),
        "creator": c.creator,
        "contributors": sorted(c.contributors),
        "implicit_votes": c.implicit_votes,
        "created_at": rfc3339(c.created_at),
        "provenance": provenance_to_dict(c.provenance),
    }


def story_json(s: StoryText, tally: int) -> dict:
    return {
        "story_id": s.story_id,
        "chain_id": s.chain_id,
        "author": s.author,
        "version": s.version,
        "body": s.body,
        "derived_from": s.derived_from,
        "created_at": rfc3339(s.created_at),
        "votes": tally,
    }


def vote_json(v: VoteRecord) -> dict:
    return {
        "voter": v.voter,
        "chain_id": v.chain_id,
        "story_id": v.story_id,
        "cast_at": rfc3339(v.cast_at),
        "superseded": v.superseded,
    }


def _token_hash(token: str) -> str:
    return hashlib.sha256(token.encode("utf-8")).hexdigest()


def _page(items: list, offset: int, limit: int) -> list:
    offset = max(offset, 0)
    limit = max(limit, 0)
    return items[offset : offset + limit]


# ----------------------------------------------------------------------
# app factory

def create_app(store: PlatformStore, config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="chainstory", docs_url=None, redoc_url=None)
    app.state.store = store
    app.state.config = config

    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["GET", "POST"],
        allow_headers=["Authorization", "Content-Type"],
    )

    @app.exception_handler(ChainStoryError)
    def domain_error(_request: Request, exc: ChainStoryError):
        return JSONResponse(
            status_code=exc.http_status,
            content={"error": {"code": exc.code, "message": str(exc)}},
        )

    def current_worker(authorization: str | None = Header(default=None)) -> str:
        if not authorization or not authorization.startswith("Bearer "):
            raise Unauthorized("missing bearer token")
        token = authorization.removeprefix("Bearer ").strip()
        worker = store.worker_by_token_hash(_token_hash(token))
        if worker is None:
            raise Unauthorized("unrecognized token")
        return worker.worker_id

    # -- meta ----------------------------------------------------------

    @app.get("/")
    def service_info():
        return {
            "service": "chainstory",
            "images": store.image_count,
            "chains": store.chain_count,
            "stories": store.story_count(),
        }

    # -- workers -------------------------------------------------------

    @app.post("/workers", status_code=201)
    def register_worker(body: dict):
        display_name = str(body.get("display_name", ""))
        token = secrets.token_hex(16)
        worker = store.register_worker(display_name, token_hash=_token_hash(token))
        return worker_json(worker, token=token)

    # -- images --------------------------------------------------------

    @app.post("/images")
    def upload_image(
        blob: UploadFile = File(...),
        description: str = Form(""),
        worker: str = Depends(current_worker),
    ):
        data = blob.file.read()
        before = store.image_count
        record = store.add_image(data, description, worker)
        status = 201 if store.image_count > before else 200
        return JSONResponse(status_code=status, content=image_json(record))

    @app.get("/images")
    def list_images(offset: int = 0, limit: int | None = None):
        items = [image_json(i) for i in store.list_images()]
        return {
            "total": len(items),
            "items": _page(items, offset, limit if limit is not None else config.page_limit),
        }

    @app.get("/images/{image_id}")
    def get_image(image_id: str):
        return image_json(store.get_image(image_id))

    @app.get("/images/{image_id}/blob")
    def get_blob(image_id: str):
        return Response(
            content=store.get_blob(image_id), media_type="application/octet-stream"
        )

    # -- chains --------------------------------------------------------

    def outcome_response(outcome):
        return JSONResponse(
            status_code=201 if outcome.created else 200,
            content={"outcome": outcome.kind.value, "chain": chain_json(outcome.chain)},
        )

    @app.post("/chains")
    def start_chain(body: dict, worker: str = Depends(current_worker)):
        return outcome_response(
            store.start_chain(str(body.get("base_image_id", "")), worker)
        )

    @app.post("/chains/merge")
    def merge_chains(body: dict, worker: str = Depends(current_worker)):
        return outcome_response(
            store.merge_chains(
                str(body.get("first", "")), str(body.get("second", "")), worker
            )
        )

    @app.post("/chains/{chain_id}/extend")
    def extend_chain(chain_id: str, body: dict, worker: str = Depends(current_worker)):
        appended = [str(x) for x in body.get("appended", [])]
        return outcome_response(store.extend_chain(chain_id, appended, worker))

    @app.post("/chains/{chain_id}/branch")
    def branch_chain(chain_id: str, body: dict, worker: str = Depends(current_worker)):
        appended = [str(x) for x in body.get("appended", [])]
        prefix_len = int(body.get("prefix_len", 0))
        return outcome_response(
            store.branch_chain(chain_id, prefix_len, appended, worker)
        )

    @app.get("/chains")
    def list_chains(
        min_len: int | None = None,
        max_len: int | None = None,
        containing_image: str | None = None,
        offset: int = 0,
        limit: int | None = None,
    ):
        chains = store.list_chains(
            min_len=min_len, max_len=max_len, containing_image=containing_image
        )
        items = [chain_json(c) for c in chains]
        return {
            "total": len(items),
            "items": _page(items, offset, limit if limit is not None else config.page_limit),
        }

    @app.get("/chains/{chain_id}")
    def get_chain(chain_id: str):
        chain = store.get_chain(chain_id)
        data = chain_json(chain)
        data["score"] = store.chain_score(chain_id)
        return data

    # -- stories -------------------------------------------------------

    @app.post("/chains/{chain_id}/stories", status_code=201)
    def submit_story(chain_id: str, body: dict, worker: str = Depends(current_worker)):
        story = store.submit_story(
            chain_id,
            worker,
            str(body.get("body", "")),
            derived_from=body.get("derived_from"),
        )
        return story_json(story, store.story_vote_tally(story.story_id))

    @app.get("/chains/{chain_id}/stories")
    def list_stories(
        chain_id: str,
        ordering: StoryOrdering = StoryOrdering.BY_TIME_ASC,
        offset: int = 0,
        limit: int | None = None,
    ):
        stories = store.list_stories(chain_id, ordering)
        items = [story_json(s, store.story_vote_tally(s.story_id)) for s in stories]
        return {
            "total": len(items),
            "items": _page(items, offset, limit if limit is not None else config.page_limit),
        }

    # -- votes ---------------------------------------------------------

    @app.post("/stories/{story_id}/vote")
    def vote_story(story_id: str, worker: str = Depends(current_worker)):
        before = store.event_count
        vote = store.vote_story(story_id, worker)
        status = 201 if store.event_count > before else 200
        return JSONResponse(
            status_code=status,
            content={
                "vote": vote_json(vote),
                "tally": store.story_vote_tally(story_id),
            },
        )

    # -- recommendations, leaderboard, analytics ------------------------

    @app.get("/recommendations")
    def recommendations(mode: str = "top", k: int = 10, seed: int | None = None):
        if mode == "sampled":
            used_seed = seed if seed is not None else secrets.randbelow(2**63)
            chains = recommend.recommend_sampled(
                store, k, used_seed, smoothing=config.smoothing
            )
            return {
                "mode": "sampled",
                "seed": used_seed,
                "items": [{"chain": chain_json(c)} for c in chains],
            }
        pairs = recommend.recommend_top(store, k)
        items = []
        for chain, top in pairs:
            entry = {"chain": chain_json(chain), "top_story": None}
            if top is not None:
                entry["top_story"] = story_json(
                    top, store.story_vote_tally(top.story_id)
                )
            items.append(entry)
        return {"mode": "top", "items": items}

    @app.get("/leaderboard")
    def leaderboard(k: int = 10):
        entries = store.leaderboard(k, config.weights)
        names = {w.worker_id: w.display_name for w in
                 (store.get_worker(e.worker) for e in entries)}
        return {
            "entries": [
                {
                    "worker": e.worker,
                    "display_name": names[e.worker],
                    "score": e.score,
                    "rank": e.rank,
                }
                for e in entries
            ]
        }

    @app.get("/analytics/summary")
    def analytics_summary(threshold: int | None = None, format: str = "table"):
        report = analytics.build_report(
            store.chain_lengths(),
            store.story_tallies_by_chain(),
            threshold if threshold is not None else config.threshold,
        )
        if format == "json":
            return analytics.report_to_dict(report)
        return PlainTextResponse(analytics.report_table(report))

    if config.static_dir is not None and Path(config.static_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=config.static_dir, html=True), name="ui")

    return app


# ----------------------------------------------------------------------
# runner

def _check_port(host: str, port: int) -> None:
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as exc:
        raise PortInUse(f"cannot bind {host}:{port}: {exc}") from exc
    finally:
        probe.close()


def serve(config: ServiceConfig) -> None:
    """Replay the log, bind, and serve until interrupted.

    Raises CorruptLog when the existing event log fails validation and
    PortInUse when the address cannot be bound; no partial state is served
    in either case.
    """
    _check_port(config.host, config.port)
    store = PlatformStore(config.data_dir)
    app = create_app(store, config)
    try:
        uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    finally:
        store.close()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="chainstory-service", description=__doc__.splitlines()[0]
    )
    base = ServiceConfig.from_env()
    parser.add_argument("--data-dir", type=Path, default=base.data_dir)
    parser.add_argument("--host", default=base.host)
    parser.add_argument("--port", type=int, default=base.port)
    parser.add_argument("--static-dir", type=Path, default=base.static_dir)
    args = parser.parse_args(argv)
    config = ServiceConfig(
        data_dir=args.data_dir,
        host=args.host,
        port=args.port,
        weights=base.weights,
        smoothing=base.smoothing,
        threshold=base.threshold,
        page_limit=base.page_limit,
        static_dir=args.static_dir,
    )
    try:
        serve(config)
    except ChainStoryError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
