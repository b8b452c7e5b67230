"""HTTP query API over an immutable in-memory model snapshot.

Endpoints:
    POST /api/query         {text, mode, k?, answer_length?, target_lang?}
                            -> {candidates: [{rank, word, score}], skipped_tokens}
    GET  /api/health        -> {status, model}
    POST /api/admin/reload  -> re-read checkpoint/stores, swap atomically

Requests never mutate model state; reload builds a fresh snapshot and
swaps a single reference, so in-flight requests finish on the old one.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import query as query_mod
from .checkpoint import file_sha256, load_checkpoint
from .config import ServiceConfig
from .corpus import tokenize
from .embeddings import EmbeddingStore, RankedCandidates, load_embeddings
from .encoders import Model
from .errors import DefembedError, NoKnownTokensError

log = logging.getLogger(__name__)


class QueryRequest(BaseModel):
    text: str
    mode: Literal["revdict", "crossword", "bilingual"] = "revdict"
    k: Optional[int] = Field(default=None, ge=1)
    answer_length: Optional[int] = Field(default=None, ge=1)
    target_lang: Optional[str] = None


class CandidateOut(BaseModel):
    rank: int
    word: str
    score: float


class QueryResponse(BaseModel):
    candidates: list[CandidateOut]
    skipped_tokens: list[str]


class HealthResponse(BaseModel):
    status: str
    model: str


class ReloadResponse(BaseModel):
    status: str
    model: str


@dataclass(frozen=True)
class Snapshot:
    """Everything a request reads, loaded once and never mutated."""

    model: Model
    target_store: EmbeddingStore
    bilingual_store: EmbeddingStore | None
    checkpoint_hash: str
    default_k: int
    max_query_tokens: int


def load_snapshot(config: ServiceConfig) -> Snapshot:
    """Load and cross-validate checkpoint and embedding stores."""
    config.validate_paths()
    target_store = load_embeddings(config.target_embeddings)
    input_store = load_embeddings(config.input_embeddings) if config.input_embeddings else None
    model = load_checkpoint(config.checkpoint, input_store=input_store)
    if model.config.target_dim != target_store.dim:
        raise DefembedError(
            f"model target dim {model.config.target_dim} != target store dim {target_store.dim}"
        )
    bilingual_store = None
    if config.bilingual_embeddings:
        bilingual_store = load_embeddings(config.bilingual_embeddings)
        if bilingual_store.dim != model.config.target_dim:
            raise DefembedError(
                f"bilingual store dim {bilingual_store.dim} != model target dim "
                f"{model.config.target_dim}"
            )
        if bilingual_store.language == target_store.language:
            raise DefembedError(
                f"bilingual store language {bilingual_store.language!r} must differ from "
                f"target store language {target_store.language!r}"
            )
    return Snapshot(
        model=model,
        target_store=target_store,
        bilingual_store=bilingual_store,
        checkpoint_hash=file_sha256(config.checkpoint),
        default_k=config.default_k,
        max_query_tokens=config.max_query_tokens,
    )


def run_query(snapshot: Snapshot, request: QueryRequest) -> RankedCandidates:
    """Dispatch one request against a snapshot; pure in (snapshot, request)."""
    k = request.k if request.k is not None else snapshot.default_k
    n_tokens = len(tokenize(request.text))
    if n_tokens > snapshot.max_query_tokens:
        raise DefembedError(
            f"query has {n_tokens} tokens, limit is {snapshot.max_query_tokens}"
        )
    if request.mode == "revdict":
        return query_mod.reverse_dictionary(snapshot.model, snapshot.target_store, request.text, k)
    if request.mode == "crossword":
        if request.answer_length is None:
            raise DefembedError("crossword mode requires answer_length")
        return query_mod.crossword_answer(
            snapshot.model, snapshot.target_store, request.text, request.answer_length, k
        )
    if snapshot.bilingual_store is None:
        raise DefembedError("no bilingual embedding store is configured")
    if request.target_lang is not None and request.target_lang != snapshot.bilingual_store.language:
        raise DefembedError(
            f"requested target_lang {request.target_lang!r}, configured store is "
            f"{snapshot.bilingual_store.language!r}"
        )
    return query_mod.bilingual_query(
        snapshot.model,
        request.text,
        snapshot.bilingual_store,
        k,
        source_language=snapshot.target_store.language,
    )


def to_response(result: RankedCandidates) -> QueryResponse:
    return QueryResponse(
        candidates=[
            CandidateOut(rank=i + 1, word=c.token, score=c.score)
            for i, c in enumerate(result.items)
        ],
        skipped_tokens=list(result.skipped_tokens),
    )


def create_app(config: ServiceConfig) -> FastAPI:
    """Build the service with its initial snapshot loaded eagerly.

    Startup validation failures raise here and abort service start.
    """
    app = FastAPI(title="defembed", version="0.1.0")
    app.state.config = config
    app.state.snapshot = load_snapshot(config)

    @app.get("/api/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        snapshot: Snapshot = app.state.snapshot
        return HealthResponse(status="ok", model=snapshot.checkpoint_hash)

    @app.post("/api/query", response_model=QueryResponse)
    def query(request: QueryRequest) -> QueryResponse:
        snapshot: Snapshot = app.state.snapshot
        try:
            return to_response(run_query(snapshot, request))
        except (NoKnownTokensError, DefembedError, ValueError, KeyError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.post("/api/admin/reload", response_model=ReloadResponse)
    def reload() -> ReloadResponse:
        try:
            fresh = load_snapshot(app.state.config)
        except (DefembedError, OSError) as exc:
            raise HTTPException(status_code=500, detail=f"reload failed: {exc}") from exc
        app.state.snapshot = fresh  # single reference swap; readers keep the old one
        log.info("snapshot reloaded: %s", fresh.checkpoint_hash)
        return ReloadResponse(status="reloaded", model=fresh.checkpoint_hash)

    return app
