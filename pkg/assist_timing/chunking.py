# -*- coding: utf-8 -*-
"""Episodic chunking: bind new items into chunks, create and evict chunks.

Responsibilities:
    - Score an item against each chunk (episode summary plus member similarity).
    - Join the best chunk above the threshold, or open a new summarized chunk.
    - Evict the lowest mean-composite chunk when the buffer is full and re-home
      its items so every item stays in exactly one chunk.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Sequence

from assist_timing.config import WeightsConfig
from assist_timing.encoding import (
    EncodeKind,
    EncodeOutcome,
    ItemFields,
    encode_item,
    score_item,
)
from assist_timing.memory import (
    ContractViolation,
    Embedding,
    MemoryChunk,
    MemoryItem,
    WorkingMemoryState,
    clamped_similarity,
    id_key,
    score_key,
    sorted_by_id,
)
from assist_timing.providers import ProviderBundle, ProviderError

logger = logging.getLogger(__name__)


class BindKind(str, enum.Enum):
    BOUND = "Bound"
    CREATED = "Created"
    CREATED_WITH_DISPLACEMENT = "CreatedWithDisplacement"


@dataclass
class BindOutcome:
    kind: BindKind
    item_id: str
    chunk_id: str
    score: float | None = None
    evicted_chunk_id: str | None = None
    candidate_scores: dict[str, float] = field(default_factory=dict)
    rebound: list[dict] = field(default_factory=list)
    """Where each item of an evicted chunk ended up (``bound``/``created``/``forced``/``unbound``)."""

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "item_id": self.item_id,
            "chunk_id": self.chunk_id,
            "score": self.score,
            "evicted_chunk_id": self.evicted_chunk_id,
            "candidate_scores": dict(self.candidate_scores),
            "rebound": [dict(r) for r in self.rebound],
        }


def binding_score(item: MemoryItem, chunk: MemoryChunk, members: Sequence[MemoryItem], lambda_: float) -> float:
    if not members:
        raise ContractViolation(f"chunk {chunk.id} has no members")
    episode_sim = clamped_similarity(item.embedding, chunk.summary_embedding)
    item_sim = sum(clamped_similarity(item.embedding, m.embedding) for m in members) / len(members)
    return lambda_ * episode_sim + (1.0 - lambda_) * item_sim


def chunk_mean_composite(chunk: MemoryChunk, state: WorkingMemoryState, weights: WeightsConfig) -> float:
    if not chunk.item_ids:
        raise ContractViolation(f"chunk {chunk.id} has no members")
    members = state.members(chunk)
    return sum(score_item(m, state, weights).composite for m in members) / len(members)


def select_chunk_for_eviction(state: WorkingMemoryState, weights: WeightsConfig) -> MemoryChunk:
    """Lowest mean member composite; ties go to the oldest, then smallest id."""
    return min(
        state.episodic,
        key=lambda ch: (score_key(chunk_mean_composite(ch, state, weights)), ch.created_at, id_key(ch.id)),
    )


def _score_chunks(item: MemoryItem, state: WorkingMemoryState, weights: WeightsConfig) -> dict[str, float]:
    return {
        ch.id: binding_score(item, ch, state.members(ch), weights.lambda_)
        for ch in state.episodic
    }


def _best_chunk(scores: dict[str, float], state: WorkingMemoryState) -> MemoryChunk | None:
    """Highest score, then most recently created, then smallest id."""
    if not scores:
        return None
    chunks = [state.chunk(cid) for cid in scores]
    return min(chunks, key=lambda ch: (-score_key(scores[ch.id]), -ch.created_at, id_key(ch.id)))


def _summarize(
    members: Sequence[MemoryItem],
    providers: ProviderBundle,
    weights: WeightsConfig,
    task_context: str,
) -> tuple[str, Embedding]:
    text = providers.summarizer.summarize(members, task_context)
    embedding = providers.embedder.embed(text, members[0].modality)
    if embedding.dim != weights.embedding_dim:
        raise ContractViolation(f"summary embedding dimension {embedding.dim} != {weights.embedding_dim}")
    return text, embedding


def _join(
    state: WorkingMemoryState,
    chunk: MemoryChunk,
    item: MemoryItem,
    providers: ProviderBundle,
    weights: WeightsConfig,
    task_context: str,
) -> None:
    """Add *item* to *chunk* and regenerate its summary (summary first, then commit)."""
    text, embedding = _summarize(state.members(chunk) + [item], providers, weights, task_context)
    chunk.item_ids.append(item.id)
    chunk.summary = text
    chunk.summary_embedding = embedding


def _create(
    state: WorkingMemoryState,
    item: MemoryItem,
    summary: tuple[str, Embedding],
) -> MemoryChunk:
    chunk = MemoryChunk(
        id=state.new_id("chunk"),
        created_at=state.now,
        summary=summary[0],
        summary_embedding=summary[1],
        item_ids=[item.id],
    )
    state.episodic.append(chunk)
    return chunk


def _rebind_orphan(
    state: WorkingMemoryState,
    item: MemoryItem,
    providers: ProviderBundle,
    weights: WeightsConfig,
    task_context: str,
    may_create: bool,
) -> dict:
    scores = _score_chunks(item, state, weights)
    best = _best_chunk(scores, state)
    try:
        if best is not None and scores[best.id] > weights.theta:
            _join(state, best, item, providers, weights, task_context)
            return {"item_id": item.id, "chunk_id": best.id, "mode": "bound", "score": scores[best.id]}
        if may_create and len(state.episodic) < state.capacity_chunks:
            chunk = _create(state, item, _summarize([item], providers, weights, task_context))
            return {"item_id": item.id, "chunk_id": chunk.id, "mode": "created", "score": None}
        if best is None:
            raise ContractViolation(f"no chunk left to home {item.id}")
        _join(state, best, item, providers, weights, task_context)
        return {"item_id": item.id, "chunk_id": best.id, "mode": "forced", "score": scores[best.id]}
    except ProviderError as exc:
        logger.warning("Could not re-bind %s: %s", item.id, exc)
        state.unbound.append(item.id)
        return {"item_id": item.id, "chunk_id": None, "mode": "unbound", "score": None,
                "error": {"kind": exc.kind.value, "detail": exc.detail}}


def bind_or_create(
    state: WorkingMemoryState,
    item_id: str,
    providers: ProviderBundle,
    config: WeightsConfig,
    task_context: str = "",
) -> BindOutcome:
    """Place a perceived, not yet bound item into the episodic buffer.

    Raises:
        ProviderError: summary generation failed; the buffer is unchanged.
    """
    item = state.item(item_id)
    if state.chunk_of(item_id) is not None:
        raise ContractViolation(f"{item_id} is already bound")

    scores = _score_chunks(item, state, config)
    best = _best_chunk(scores, state)
    if best is not None and scores[best.id] > config.theta:
        _join(state, best, item, providers, config, task_context)
        logger.debug("Bound %s to %s (%.3f)", item_id, best.id, scores[best.id])
        return BindOutcome(BindKind.BOUND, item_id, best.id, score=scores[best.id], candidate_scores=scores)

    summary = _summarize([item], providers, config, task_context)

    if len(state.episodic) < state.capacity_chunks:
        chunk = _create(state, item, summary)
        logger.debug("Created %s for %s", chunk.id, item_id)
        return BindOutcome(BindKind.CREATED, item_id, chunk.id, candidate_scores=scores)

    evicted = select_chunk_for_eviction(state, config)
    state.episodic.remove(evicted)
    chunk = _create(state, item, summary)
    logger.debug("Evicted %s, created %s for %s", evicted.id, chunk.id, item_id)

    rebound = []
    created_once = False
    for orphan_id in sorted_by_id(evicted.item_ids):
        placement = _rebind_orphan(
            state, state.item(orphan_id), providers, config, task_context, may_create=not created_once
        )
        created_once = created_once or placement["mode"] == "created"
        rebound.append(placement)

    return BindOutcome(
        BindKind.CREATED_WITH_DISPLACEMENT, item_id, chunk.id,
        evicted_chunk_id=evicted.id, candidate_scores=scores, rebound=rebound,
    )


@dataclass
class EncodeResult:
    encode: EncodeOutcome
    bind: BindOutcome | None = None
    bind_error: ProviderError | None = None


def encode_and_bind(
    state: WorkingMemoryState,
    fields: ItemFields,
    providers: ProviderBundle,
    config: WeightsConfig,
    task_context: str = "",
) -> EncodeResult:
    """Encode an item, then bind it if it was newly inserted.

    Encoding failures propagate; a binding failure leaves the item in
    ``state.unbound`` for the next update.
    """
    outcome = encode_item(state, fields, providers, config, task_context)
    if outcome.kind is EncodeKind.REFRESHED:
        return EncodeResult(outcome)
    try:
        bind = bind_or_create(state, outcome.item_id, providers, config, task_context)
    except ProviderError as exc:
        logger.warning("Binding %s failed, will retry: %s", outcome.item_id, exc)
        state.unbound.append(outcome.item_id)
        return EncodeResult(outcome, bind_error=exc)
    return EncodeResult(outcome, bind)


def retry_unbound(
    state: WorkingMemoryState,
    providers: ProviderBundle,
    config: WeightsConfig,
    task_context: str = "",
) -> list[BindOutcome | ProviderError]:
    """Bind items left over from earlier provider failures, in id order."""
    results: list[BindOutcome | ProviderError] = []
    pending = sorted_by_id(state.unbound)
    state.unbound.clear()
    for item_id in pending:
        if not state.has_item(item_id) or state.chunk_of(item_id) is not None:
            continue
        try:
            results.append(bind_or_create(state, item_id, providers, config, task_context))
        except ProviderError as exc:
            state.unbound.append(item_id)
            results.append(exc)
    return results
