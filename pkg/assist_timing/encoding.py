# -*- coding: utf-8 -*-
"""Memory property scoring and encoding into the perception store.

Responsibilities:
    - Score recency, relevance, importance and their weighted composite.
    - Detect same-modality duplicates and refresh them instead of re-encoding.
    - Displace the lowest-composite item when the store is at capacity.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Iterable

from assist_timing.config import WeightsConfig
from assist_timing.memory import (
    ContractViolation,
    Embedding,
    MemoryChunk,
    MemoryItem,
    Modality,
    WorkingMemoryState,
    clamped_similarity,
    id_key,
    score_key,
)
from assist_timing.providers import ProviderBundle, ProviderError, ProviderErrorKind

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PropertyScores:
    recency: float
    relevance: float
    importance: float
    composite: float

    def to_dict(self) -> dict:
        return {
            "recency": self.recency,
            "relevance": self.relevance,
            "importance": self.importance,
            "composite": self.composite,
        }


class EncodeKind(str, enum.Enum):
    ADDED = "Added"
    REFRESHED = "Refreshed"
    DISPLACED = "Displaced"


@dataclass
class EncodeOutcome:
    kind: EncodeKind
    item_id: str
    """The inserted item, or the refreshed one."""
    victim_id: str | None = None
    removed_chunks: list[str] = field(default_factory=list)
    scores_snapshot: dict[str, PropertyScores] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "item_id": self.item_id,
            "victim_id": self.victim_id,
            "removed_chunks": list(self.removed_chunks),
            "scores_snapshot": {k: v.to_dict() for k, v in self.scores_snapshot.items()},
        }


@dataclass(frozen=True)
class ItemFields:
    """What an event (or a delivered message) contributes to a new item."""

    content: str
    modality: Modality
    importance: float | None = None
    """Known importance: bypasses the scorer for delivered messages, hints it for events."""
    embedding: Embedding | None = None
    bypass_scorer: bool = False


# -- Scores ------------------------------------------------------------------


def score_recency(item: MemoryItem, now: float, T: float) -> float:
    """Linear decay from the last activation, floored at zero."""
    if T <= 0:
        raise ContractViolation("T must be positive")
    if now < item.last_activated_at:
        raise ContractViolation(f"clock {now} precedes last activation of {item.id}")
    return max(0.0, 1.0 - (now - item.last_activated_at) / T)


def score_relevance(embedding: Embedding, buffer: Iterable[MemoryChunk]) -> float:
    """Mean clamped similarity to every chunk summary; 0 for an empty buffer."""
    sims = [clamped_similarity(embedding, ch.summary_embedding) for ch in buffer]
    if not sims:
        return 0.0
    return sum(sims) / len(sims)


def composite_score(recency: float, relevance: float, importance: float, weights: WeightsConfig) -> float:
    return weights.alpha * recency + weights.beta * relevance + weights.gamma * importance


def score_item(item: MemoryItem, state: WorkingMemoryState, weights: WeightsConfig) -> PropertyScores:
    recency = score_recency(item, state.now, weights.T)
    relevance = score_relevance(item.embedding, state.episodic)
    return PropertyScores(
        recency=recency,
        relevance=relevance,
        importance=item.importance,
        composite=composite_score(recency, relevance, item.importance, weights),
    )


def score_store(state: WorkingMemoryState, weights: WeightsConfig) -> dict[str, PropertyScores]:
    return {it.id: score_item(it, state, weights) for it in state.perception}


# -- Selection ---------------------------------------------------------------


def detect_duplicate(
    embedding: Embedding,
    modality: Modality,
    store: Iterable[MemoryItem],
    threshold: float,
) -> str | None:
    """Id of the most similar same-modality item above *threshold*, if any.

    Ties go to the most recently activated item, then the smallest id.
    """
    best: tuple | None = None
    best_id = None
    for item in store:
        if item.modality != modality:
            continue
        sim = clamped_similarity(embedding, item.embedding)
        if sim <= threshold:
            continue
        key = (-score_key(sim), -item.last_activated_at, id_key(item.id))
        if best is None or key < best:
            best, best_id = key, item.id
    return best_id


def victim_order(item: MemoryItem, scores: PropertyScores) -> tuple:
    """Sort key: lowest composite, then oldest activation, oldest encoding, smallest id."""
    return (score_key(scores.composite), item.last_activated_at, item.encoded_at, id_key(item.id))


def select_displacement_victim(state: WorkingMemoryState, weights: WeightsConfig) -> str:
    if not state.is_full:
        raise ContractViolation(
            f"displacement requested with {len(state.perception)}/{state.capacity_items} items"
        )
    scores = score_store(state, weights)
    victim = min(state.perception, key=lambda it: victim_order(it, scores[it.id]))
    return victim.id


# -- Encoding ----------------------------------------------------------------


def _checked_importance(value: float) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
        raise ProviderError(ProviderErrorKind.MALFORMED_RESPONSE, f"importance {value!r} outside [0,1]")
    return float(value)


def encode_item(
    state: WorkingMemoryState,
    fields: ItemFields,
    providers: ProviderBundle,
    config: WeightsConfig,
    task_context: str = "",
) -> EncodeOutcome:
    """Encode one item into the perception store (Added, Refreshed or Displaced).

    Provider calls happen before any mutation, so a ``ProviderError`` leaves
    *state* untouched. Binding into a chunk is the caller's next step.
    """
    embedding = fields.embedding
    if embedding is None:
        embedding = providers.embedder.embed(fields.content, fields.modality)
    if embedding.dim != config.embedding_dim:
        raise ContractViolation(
            f"embedding dimension {embedding.dim} does not match configured {config.embedding_dim}"
        )

    snapshot = score_store(state, config)

    duplicate = detect_duplicate(embedding, fields.modality, state.perception, config.dedup_threshold)
    if duplicate is not None:
        state.item(duplicate).last_activated_at = state.now
        logger.debug("Refreshed %s with %r", duplicate, fields.content)
        return EncodeOutcome(EncodeKind.REFRESHED, duplicate, scores_snapshot=snapshot)

    if fields.bypass_scorer and fields.importance is not None:
        importance = _checked_importance(fields.importance)
    else:
        importance = _checked_importance(
            providers.scorer.score(fields.content, task_context, fields.importance)
        )

    item = MemoryItem(
        id=state.new_id("item"),
        modality=fields.modality,
        content=fields.content,
        embedding=embedding,
        encoded_at=state.now,
        last_activated_at=state.now,
        importance=importance,
    )

    if not state.is_full:
        state.perception.append(item)
        logger.debug("Added %s %r", item.id, item.content)
        return EncodeOutcome(EncodeKind.ADDED, item.id, scores_snapshot=snapshot)

    victim = min(state.perception, key=lambda it: victim_order(it, snapshot[it.id]))
    removed = state.remove_item(victim.id)
    state.perception.append(item)
    logger.debug("Displaced %s for %s %r", victim.id, item.id, item.content)
    return EncodeOutcome(
        EncodeKind.DISPLACED, item.id, victim_id=victim.id,
        removed_chunks=removed, scores_snapshot=snapshot,
    )
