# -*- coding: utf-8 -*-
"""Pluggable embedding, importance, summary and assistance providers.

Responsibilities:
    - Define the provider interfaces the engine calls.
    - Ship deterministic mocks (hashed token embeddings, template summaries,
      scenario-driven importance and assistance hints).
    - Speak a small JSON-over-HTTP contract to an optional remote service.
"""

from __future__ import annotations

import enum
import json
import re
import socket
import logging
from dataclasses import dataclass
from typing import Any, Mapping, Protocol, Sequence
from urllib.error import HTTPError, URLError
from urllib.request import Request, urlopen

import numpy as np

from assist_timing.config import ProviderSettings, WeightsConfig
from assist_timing.embed_cache import EmbeddingCache, cache_key
from assist_timing.memory import ContractViolation, Embedding, MemoryItem, Modality, id_key

logger = logging.getLogger(__name__)

_MASK64 = 0xFFFFFFFFFFFFFFFF
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15

# Alphanumeric runs; underscores and apostrophes split tokens
_TOKEN_RE = re.compile(r"[^\W_]+")

NO_ASSISTANCE = "NO ASSISTANCE"
_BASELINE_IMPORTANCE = 0.5
_DEFAULT_IMPORTANCE = 0.5


class ProviderErrorKind(str, enum.Enum):
    TIMEOUT = "Timeout"
    MALFORMED_RESPONSE = "MalformedResponse"
    UNAVAILABLE = "Unavailable"


class ProviderError(Exception):
    def __init__(self, kind: ProviderErrorKind, detail: str) -> None:
        super().__init__(f"{kind.value}: {detail}")
        self.kind = kind
        self.detail = detail


@dataclass(frozen=True)
class GeneratedAssistance:
    message: str
    importance: float

    def __post_init__(self) -> None:
        if not self.message or not self.message.strip():
            raise ProviderError(ProviderErrorKind.MALFORMED_RESPONSE, "empty assistance message")
        if not 0.0 <= self.importance <= 1.0:
            raise ProviderError(
                ProviderErrorKind.MALFORMED_RESPONSE,
                f"assistance importance {self.importance!r} outside [0,1]",
            )


@dataclass(frozen=True)
class AssistHint:
    """Scenario-scripted assistance released once its trigger label is in memory."""

    trigger: str
    message: str
    importance: float


@dataclass
class GenerationRequest:
    items: list[MemoryItem]
    episodes: list[str]
    newest: MemoryItem | None
    history: list[str]
    task_context: str = ""
    hints: Sequence[AssistHint] = ()
    policy: str = "wm"


# -- Interfaces --------------------------------------------------------------


class Embedder(Protocol):
    def embed(self, content: str, modality: Modality) -> Embedding: ...


class ImportanceScorer(Protocol):
    def score(self, content: str, task_context: str, hint: float | None = None) -> float: ...


class Summarizer(Protocol):
    def summarize(self, items: Sequence[MemoryItem], task_context: str) -> str: ...


class AssistanceGenerator(Protocol):
    def generate(self, request: GenerationRequest) -> list[GeneratedAssistance]: ...


@dataclass
class ProviderBundle:
    embedder: Embedder
    scorer: ImportanceScorer
    summarizer: Summarizer
    generator: AssistanceGenerator
    cache: EmbeddingCache | None = None

    def close(self) -> None:
        if self.cache is not None:
            self.cache.flush()


# -- Hashing -----------------------------------------------------------------


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def splitmix64(state: int):
    """Infinite SplitMix64 stream starting from *state*."""
    while True:
        state = (state + _GOLDEN_GAMMA) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        yield z ^ (z >> 31)


def token_vector(token: str, dim: int, seed: int) -> np.ndarray:
    """Pseudo-random vector in [-1, 1]^dim for *token*, stable across runs."""
    stream = splitmix64(fnv1a_64(token.encode("utf-8")) ^ (seed & _MASK64))
    # top 53 bits -> [0, 1) -> [-1, 1)
    return np.array([((next(stream) >> 11) * 2.0 ** -53) * 2.0 - 1.0 for _ in range(dim)])


# -- Mocks -------------------------------------------------------------------


class MockEmbedder:
    """Sum of per-token vectors, normalized.

    With a *lexicon*, known tokens use their listed vectors and unknown tokens
    are ignored; text without a known token falls back to hashing.
    """

    def __init__(self, dim: int, seed: int = 0, lexicon: Mapping[str, Sequence[float]] | None = None) -> None:
        self.dim = dim
        self.seed = seed
        self._lexicon = {k.lower(): np.asarray(v, dtype=np.float64) for k, v in (lexicon or {}).items()}
        for key, vec in self._lexicon.items():
            if vec.shape != (dim,):
                raise ContractViolation(f"lexicon vector for '{key}' has dimension {vec.size}, expected {dim}")
        self._token_cache: dict[str, np.ndarray] = {}

    def _hashed(self, token: str) -> np.ndarray:
        vec = self._token_cache.get(token)
        if vec is None:
            vec = token_vector(token, self.dim, self.seed)
            self._token_cache[token] = vec
        return vec

    def embed(self, content: str, modality: Modality = Modality.VISUOSPATIAL) -> Embedding:
        tokens = tokenize(content or "")
        if not tokens:
            raise ProviderError(ProviderErrorKind.MALFORMED_RESPONSE, f"nothing to embed in {content!r}")
        total = np.zeros(self.dim)
        known = [t for t in tokens if t in self._lexicon]
        if known:
            for t in known:
                total = total + self._lexicon[t]
        if not known or not np.any(total):
            total = np.zeros(self.dim)
            for t in tokens:
                total = total + self._hashed(t)
        try:
            return Embedding(total, self.dim)
        except ContractViolation as exc:
            raise ProviderError(ProviderErrorKind.MALFORMED_RESPONSE, str(exc)) from exc


class MockImportanceScorer:
    def score(self, content: str, task_context: str, hint: float | None = None) -> float:
        return _DEFAULT_IMPORTANCE if hint is None else float(hint)


class MockSummarizer:
    def summarize(self, items: Sequence[MemoryItem], task_context: str) -> str:
        if not items:
            raise ContractViolation("cannot summarize an empty item list")
        ordered = sorted(items, key=lambda it: id_key(it.id))
        return "User context: " + ", ".join(it.content for it in ordered)


def trigger_matches(trigger: str, content: str) -> bool:
    """A trigger matches an item whose content equals it or contains all its tokens."""
    if trigger.strip().lower() == content.strip().lower():
        return True
    wanted = tokenize(trigger)
    have = set(tokenize(content))
    return bool(wanted) and all(t in have for t in wanted)


class MockGenerator:
    """Releases scenario hints once each, when their trigger is in perception.

    Hints become armed when the request carrying them arrives.
    """

    def __init__(self) -> None:
        self._armed: list[AssistHint] = []
        self._emitted: set[AssistHint] = set()

    def generate(self, request: GenerationRequest) -> list[GeneratedAssistance]:
        for hint in request.hints:
            if hint not in self._armed and hint not in self._emitted:
                self._armed.append(hint)
        out: list[GeneratedAssistance] = []
        for hint in list(self._armed):
            if any(trigger_matches(hint.trigger, it.content) for it in request.items):
                self._armed.remove(hint)
                self._emitted.add(hint)
                out.append(GeneratedAssistance(hint.message, hint.importance))
        return out


# -- Remote ------------------------------------------------------------------


class RemoteClient:
    """POSTs ``{"template", "fields"}`` and returns the decoded JSON object. No retries."""

    def __init__(self, endpoint: str, timeout_s: float = 10.0) -> None:
        self.endpoint = endpoint.rstrip("/")
        self.timeout_s = timeout_s

    def call(self, template: str, fields: Mapping[str, Any]) -> dict:
        request = Request(
            self.endpoint,
            data=json.dumps({"template": template, "fields": fields}).encode("utf-8"),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        try:
            with urlopen(request, timeout=self.timeout_s) as response:
                body = response.read().decode("utf-8")
        except (socket.timeout, TimeoutError) as exc:
            raise ProviderError(ProviderErrorKind.TIMEOUT, f"{template}: no response within {self.timeout_s}s") from exc
        except HTTPError as exc:
            raise ProviderError(ProviderErrorKind.UNAVAILABLE, f"{template}: HTTP {exc.code}") from exc
        except URLError as exc:
            if isinstance(exc.reason, (socket.timeout, TimeoutError)):
                raise ProviderError(ProviderErrorKind.TIMEOUT, f"{template}: {exc.reason}") from exc
            raise ProviderError(ProviderErrorKind.UNAVAILABLE, f"{template}: {exc.reason}") from exc
        try:
            data = json.loads(body)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ProviderError(ProviderErrorKind.MALFORMED_RESPONSE, f"{template}: response is not JSON") from exc
        if not isinstance(data, dict):
            raise ProviderError(ProviderErrorKind.MALFORMED_RESPONSE, f"{template}: response is not an object")
        return data


def _unit_score(value: Any, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProviderError(ProviderErrorKind.MALFORMED_RESPONSE, f"{what} is not a number: {value!r}")
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ProviderError(ProviderErrorKind.MALFORMED_RESPONSE, f"{what} {value!r} outside [0,1]")
    return value


def _item_fields(item: MemoryItem) -> dict:
    return {"modality": item.modality.value, "content": item.content}


class RemoteEmbedder:
    def __init__(self, client: RemoteClient, dim: int, cache: EmbeddingCache | None = None) -> None:
        self.client = client
        self.dim = dim
        self.cache = cache

    def embed(self, content: str, modality: Modality = Modality.VISUOSPATIAL) -> Embedding:
        if not content or not content.strip():
            raise ProviderError(ProviderErrorKind.MALFORMED_RESPONSE, "nothing to embed")
        key = cache_key(self.client.endpoint, self.dim, content)
        vector = self.cache.get(key) if self.cache is not None else None
        fetched = vector is None
        if fetched:
            data = self.client.call("embed", {"content": content, "modality": modality.value, "dim": self.dim})
            vector = data.get("embedding")
            if not isinstance(vector, list) or len(vector) != self.dim:
                raise ProviderError(ProviderErrorKind.MALFORMED_RESPONSE, f"embedding must be a list of {self.dim} numbers")
        try:
            embedding = Embedding([float(v) for v in vector], self.dim)
        except (TypeError, ValueError) as exc:
            raise ProviderError(ProviderErrorKind.MALFORMED_RESPONSE, f"bad embedding: {exc}") from exc
        if fetched and self.cache is not None:
            self.cache.put(key, embedding.tolist())
        return embedding


class RemoteImportanceScorer:
    def __init__(self, client: RemoteClient) -> None:
        self.client = client

    def score(self, content: str, task_context: str, hint: float | None = None) -> float:
        data = self.client.call("importance", {
            "task_context": task_context,
            "perception_memory": [content],
            "episodic_buffer": [],
        })
        values = data.get("perception_memory")
        if not isinstance(values, list) or not values:
            raise ProviderError(ProviderErrorKind.MALFORMED_RESPONSE, "importance response lacks perception_memory")
        return _unit_score(values[0], "importance")


class RemoteSummarizer:
    def __init__(self, client: RemoteClient) -> None:
        self.client = client

    def summarize(self, items: Sequence[MemoryItem], task_context: str) -> str:
        if not items:
            raise ContractViolation("cannot summarize an empty item list")
        data = self.client.call("episode", {
            "task_context": task_context,
            "memory_items": [_item_fields(it) for it in sorted(items, key=lambda it: id_key(it.id))],
        })
        episode = data.get("episode")
        if not isinstance(episode, str) or not episode.strip():
            raise ProviderError(ProviderErrorKind.MALFORMED_RESPONSE, "episode response lacks an 'episode' sentence")
        return episode.strip()


class RemoteGenerator:
    """Uses the ``assistance`` template for the wm policy and ``baseline`` otherwise."""

    def __init__(self, client: RemoteClient) -> None:
        self.client = client

    def generate(self, request: GenerationRequest) -> list[GeneratedAssistance]:
        if request.policy == "baseline":
            return self._baseline(request)
        data = self.client.call("assistance", {
            "task_context": request.task_context,
            "new_memory_item": _item_fields(request.newest) if request.newest else None,
            "perception_memory": [_item_fields(it) for it in request.items],
            "episodic_buffer": list(request.episodes),
            "history": list(request.history),
        })
        messages = data.get("assistance_messages")
        if not isinstance(messages, list):
            raise ProviderError(ProviderErrorKind.MALFORMED_RESPONSE, "response lacks 'assistance_messages'")
        out = []
        for entry in messages:
            if not isinstance(entry, dict) or not isinstance(entry.get("message"), str):
                raise ProviderError(ProviderErrorKind.MALFORMED_RESPONSE, f"bad assistance entry {entry!r}")
            out.append(GeneratedAssistance(entry["message"], _unit_score(entry.get("importance"), "importance")))
        return out

    def _baseline(self, request: GenerationRequest) -> list[GeneratedAssistance]:
        data = self.client.call("baseline", {
            "task_context": request.task_context,
            "information": _item_fields(request.newest) if request.newest else None,
            "history": list(request.history),
        })
        text = data.get("text")
        if not isinstance(text, str):
            raise ProviderError(ProviderErrorKind.MALFORMED_RESPONSE, "baseline response lacks 'text'")
        text = text.strip()
        if not text or text.upper() == NO_ASSISTANCE:
            return []
        return [GeneratedAssistance(text, _BASELINE_IMPORTANCE)]


def build_providers(
    settings: ProviderSettings,
    weights: WeightsConfig,
    lexicon: Mapping[str, Sequence[float]] | None = None,
    cache: EmbeddingCache | None = None,
) -> ProviderBundle:
    """Construct the provider set for one replay.

    Mock providers are fresh per call (the generator remembers emitted hints).
    Concurrent remote replays should share one *cache*.
    """
    if settings.mode == "remote":
        client = RemoteClient(settings.endpoint or "", settings.timeout_s)
        if cache is None and settings.cache_path:
            cache = EmbeddingCache(settings.cache_path)
        logger.info("Using remote providers at %s", client.endpoint)
        return ProviderBundle(
            embedder=RemoteEmbedder(client, weights.embedding_dim, cache),
            scorer=RemoteImportanceScorer(client),
            summarizer=RemoteSummarizer(client),
            generator=RemoteGenerator(client),
            cache=cache,
        )
    return ProviderBundle(
        embedder=MockEmbedder(weights.embedding_dim, weights.seed, lexicon),
        scorer=MockImportanceScorer(),
        summarizer=MockSummarizer(),
        generator=MockGenerator(),
    )
