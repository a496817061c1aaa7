# -*- coding: utf-8 -*-
"""Shared factories for the test modules."""

import os
import sys

sys.path.insert(0, os.path.dirname(os.path.dirname(__file__)))

import numpy as np

from assist_timing.chunking import encode_and_bind
from assist_timing.config import WeightsConfig
from assist_timing.encoding import ItemFields
from assist_timing.memory import Embedding, MemoryChunk, MemoryItem, Modality, WorkingMemoryState
from assist_timing.providers import (
    MockEmbedder,
    MockGenerator,
    MockImportanceScorer,
    MockSummarizer,
    ProviderBundle,
)

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SCENARIO_DIR = os.path.join(REPO_ROOT, "scenarios")
FIXTURES = ("dining", "office", "packing", "living")


def scenario_path(name):
    return os.path.join(SCENARIO_DIR, f"{name}.json")


def axis(dim, *components):
    """Embedding from (index, value) pairs."""
    vec = np.zeros(dim)
    for index, value in components:
        vec[index] = value
    return Embedding(vec)


def make_item(item_id, embedding, t=0.0, importance=0.5, modality=Modality.VISUOSPATIAL, content=None, activated=None):
    return MemoryItem(
        id=item_id,
        modality=modality,
        content=content or item_id,
        embedding=embedding,
        encoded_at=t,
        last_activated_at=t if activated is None else activated,
        importance=importance,
    )


def make_chunk(chunk_id, embedding, item_ids, created_at=0.0, summary=None):
    return MemoryChunk(
        id=chunk_id,
        created_at=created_at,
        summary=summary or f"summary of {chunk_id}",
        summary_embedding=embedding,
        item_ids=list(item_ids),
    )


def make_state(items=(), chunks=(), now=0.0, capacity_items=7, capacity_chunks=4):
    state = WorkingMemoryState(capacity_items=capacity_items, capacity_chunks=capacity_chunks, now=now)
    state.perception.extend(items)
    state.episodic.extend(chunks)
    return state


def mock_providers(dim=8, seed=0, lexicon=None):
    return ProviderBundle(
        embedder=MockEmbedder(dim, seed, lexicon),
        scorer=MockImportanceScorer(),
        summarizer=MockSummarizer(),
        generator=MockGenerator(),
    )


def small_config(**overrides):
    return WeightsConfig(embedding_dim=8).with_overrides(overrides) if overrides else WeightsConfig(embedding_dim=8)


def add_event(state, content, providers, config, modality=Modality.VISUOSPATIAL, importance=0.5, embedding=None):
    return encode_and_bind(
        state,
        ItemFields(content=content, modality=modality, importance=importance, embedding=embedding),
        providers,
        config,
    )
