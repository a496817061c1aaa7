# -*- coding: utf-8 -*-
"""Working-memory domain types and embedding arithmetic.

Responsibilities:
    - Define the memory item, chunk and state types shared by every stage.
    - Keep embeddings unit-normalized so similarity is a plain dot product.
    - Provide ``validate()`` to check capacity and partition invariants.
"""

from __future__ import annotations

import enum
import itertools
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

# Tolerance for the unit-norm check after normalization
_NORM_TOLERANCE = 1e-9

# Decimal places kept when scores are compared in tie-break orders
SCORE_DECIMALS = 12


class ContractViolation(ValueError):
    """A caller broke a precondition (dimension, clock order, empty chunk...)."""


class Modality(str, enum.Enum):
    VISUOSPATIAL = "visuospatial"
    PHONOLOGICAL = "phonological"

    @classmethod
    def from_event_kind(cls, kind: str) -> "Modality":
        """Map a scenario event kind (``visual``/``speech``) to a modality."""
        if kind == "visual":
            return cls.VISUOSPATIAL
        if kind == "speech":
            return cls.PHONOLOGICAL
        raise ContractViolation(f"unknown event kind '{kind}'")


def normalize(values: Sequence[float] | np.ndarray) -> np.ndarray:
    """Return *values* scaled to unit L2 norm.

    Raises:
        ContractViolation: for the zero vector or non-finite components.
    """
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1 or vec.size == 0:
        raise ContractViolation("embedding must be a non-empty 1-D vector")
    if not np.all(np.isfinite(vec)):
        raise ContractViolation("embedding contains non-finite values")
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ContractViolation("cannot normalize a zero vector")
    return vec / norm


class Embedding:
    """Immutable unit vector of a fixed dimension."""

    __slots__ = ("_values",)

    def __init__(self, values: Sequence[float] | np.ndarray, dim: int | None = None) -> None:
        vec = normalize(values)
        if dim is not None and vec.size != dim:
            raise ContractViolation(
                f"embedding dimension {vec.size} does not match configured dimension {dim}"
            )
        if abs(float(np.linalg.norm(vec)) - 1.0) > _NORM_TOLERANCE:
            raise ContractViolation("embedding failed to normalize")
        vec.setflags(write=False)
        self._values = vec

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def dim(self) -> int:
        return int(self._values.size)

    def tolist(self) -> list[float]:
        return [float(v) for v in self._values]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Embedding):
            return NotImplemented
        return bool(np.array_equal(self._values, other._values))

    def __hash__(self) -> int:
        return hash(self._values.tobytes())

    def __repr__(self) -> str:
        return f"Embedding(dim={self.dim})"


def cosine_similarity(a: Embedding, b: Embedding) -> float:
    """Cosine of two unit embeddings, clipped to [-1, 1]."""
    if a.dim != b.dim:
        raise ContractViolation(f"dimension mismatch: {a.dim} vs {b.dim}")
    return float(min(1.0, max(-1.0, float(np.dot(a.values, b.values)))))


def clamped_similarity(a: Embedding, b: Embedding) -> float:
    """Cosine similarity with negative values clamped to zero."""
    return max(0.0, cosine_similarity(a, b))


def id_key(identifier: str) -> int:
    """Numeric sequence of an identifier such as ``item-12``; orders ids by creation."""
    try:
        return int(identifier.rsplit("-", 1)[1])
    except (IndexError, ValueError) as exc:
        raise ContractViolation(f"malformed identifier '{identifier}'") from exc


def score_key(value: float) -> float:
    """Score rounded for ordering, so values equal up to float noise tie exactly."""
    return round(value, SCORE_DECIMALS)


@dataclass
class MemoryItem:
    """One perceived unit: a seen object label or a heard utterance."""

    id: str
    modality: Modality
    content: str
    embedding: Embedding
    encoded_at: float
    last_activated_at: float
    importance: float

    def __post_init__(self) -> None:
        if self.last_activated_at < self.encoded_at:
            raise ContractViolation(f"{self.id}: last activation precedes encoding")
        if not 0.0 <= self.importance <= 1.0:
            raise ContractViolation(f"{self.id}: importance {self.importance} outside [0,1]")


@dataclass
class MemoryChunk:
    """An episode grouping item ids under a generated summary."""

    id: str
    created_at: float
    summary: str
    summary_embedding: Embedding
    item_ids: list[str] = field(default_factory=list)


@dataclass
class WorkingMemoryState:
    """The mutable model owned by one engine instance.

    ``deferred`` holds timing candidates in FIFO order; ``unbound`` lists items
    whose chunk binding failed on a provider error and awaits a retry.
    """

    capacity_items: int = 7
    capacity_chunks: int = 4
    now: float = 0.0
    perception: list[MemoryItem] = field(default_factory=list)
    episodic: list[MemoryChunk] = field(default_factory=list)
    deferred: deque = field(default_factory=deque)
    unbound: list[str] = field(default_factory=list)
    _counters: dict = field(default_factory=dict, repr=False)

    # -- Identifiers ---------------------------------------------------------

    def new_id(self, prefix: str) -> str:
        counter = self._counters.setdefault(prefix, itertools.count(1))
        return f"{prefix}-{next(counter)}"

    # -- Clock ---------------------------------------------------------------

    def advance(self, t: float) -> None:
        """Move the simulated clock to *t*; the clock never runs backwards."""
        if t < self.now:
            raise ContractViolation(f"clock moved backwards: {t} < {self.now}")
        self.now = float(t)

    # -- Lookups -------------------------------------------------------------

    @property
    def is_full(self) -> bool:
        return len(self.perception) >= self.capacity_items

    def item(self, item_id: str) -> MemoryItem:
        for it in self.perception:
            if it.id == item_id:
                return it
        raise ContractViolation(f"dangling item id '{item_id}'")

    def has_item(self, item_id: str) -> bool:
        return any(it.id == item_id for it in self.perception)

    def chunk(self, chunk_id: str) -> MemoryChunk:
        for ch in self.episodic:
            if ch.id == chunk_id:
                return ch
        raise ContractViolation(f"unknown chunk id '{chunk_id}'")

    def chunk_of(self, item_id: str) -> MemoryChunk | None:
        for ch in self.episodic:
            if item_id in ch.item_ids:
                return ch
        return None

    def members(self, chunk: MemoryChunk) -> list[MemoryItem]:
        return [self.item(i) for i in chunk.item_ids]

    # -- Mutation ------------------------------------------------------------

    def remove_item(self, item_id: str) -> list[str]:
        """Drop an item from the store and from its chunk.

        Returns the ids of chunks deleted because they became empty.
        """
        self.perception = [it for it in self.perception if it.id != item_id]
        if item_id in self.unbound:
            self.unbound.remove(item_id)
        removed: list[str] = []
        for ch in list(self.episodic):
            if item_id in ch.item_ids:
                ch.item_ids.remove(item_id)
                if not ch.item_ids:
                    self.episodic.remove(ch)
                    removed.append(ch.id)
        return removed

    # -- Invariants ----------------------------------------------------------

    def validate(self) -> None:
        """Raise ContractViolation if any structural invariant is broken."""
        if len(self.perception) > self.capacity_items:
            raise ContractViolation(
                f"perception store holds {len(self.perception)} > {self.capacity_items} items"
            )
        if len(self.episodic) > self.capacity_chunks:
            raise ContractViolation(
                f"episodic buffer holds {len(self.episodic)} > {self.capacity_chunks} chunks"
            )
        ids = [it.id for it in self.perception]
        if len(set(ids)) != len(ids):
            raise ContractViolation("duplicate item ids in perception store")
        seen: dict[str, str] = {}
        for ch in self.episodic:
            if not ch.item_ids:
                raise ContractViolation(f"chunk {ch.id} is empty")
            for item_id in ch.item_ids:
                if item_id not in ids:
                    raise ContractViolation(f"chunk {ch.id} references missing item {item_id}")
                if item_id in seen:
                    raise ContractViolation(
                        f"item {item_id} bound to both {seen[item_id]} and {ch.id}"
                    )
                seen[item_id] = ch.id
        for item_id in ids:
            if item_id not in seen and item_id not in self.unbound:
                raise ContractViolation(f"item {item_id} is not bound to any chunk")
        for item_id in self.unbound:
            if item_id in seen:
                raise ContractViolation(f"item {item_id} is both bound and pending")


def sorted_by_id(identifiers: Iterable[str]) -> list[str]:
    return sorted(identifiers, key=id_key)
