# -*- coding: utf-8 -*-
"""Timing predictor: value, displacement and interference costs, and the
deliver/defer/discard decision.

Responsibilities:
    - Compute a candidate's utility breakdown against the current state.
    - Apply the threshold rule and manage the FIFO deferred queue.
    - Provide the deliver-everything baseline policy for comparison runs.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

from assist_timing.chunking import EncodeResult, encode_and_bind
from assist_timing.config import WeightsConfig
from assist_timing.encoding import ItemFields, score_relevance, score_store
from assist_timing.memory import Embedding, Modality, WorkingMemoryState, clamped_similarity
from assist_timing.providers import ProviderBundle

logger = logging.getLogger(__name__)


class DecisionKind(str, enum.Enum):
    DELIVER = "Deliver"
    DEFER = "Defer"
    DISCARD = "Discard"
    EXPIRE = "Expire"


@dataclass(frozen=True)
class UtilityBreakdown:
    at: float
    importance_term: float
    relevance_term: float
    value: float
    c_displacement: float
    c_interference: float
    utility: float
    decision: DecisionKind

    def to_dict(self) -> dict:
        return {
            "at": self.at,
            "importance_term": self.importance_term,
            "relevance_term": self.relevance_term,
            "value": self.value,
            "c_displacement": self.c_displacement,
            "c_interference": self.c_interference,
            "utility": self.utility,
            "decision": self.decision.value,
        }


@dataclass
class AssistanceCandidate:
    id: str
    message: str
    importance: float
    embedding: Embedding
    created_at: float
    modality: Modality = Modality.PHONOLOGICAL
    evaluations: list[UtilityBreakdown] = field(default_factory=list)

    def age(self, now: float) -> float:
        return now - self.created_at


@dataclass
class Decision:
    kind: DecisionKind
    candidate_id: str
    breakdown: UtilityBreakdown | None = None
    held: bool = False
    """Qualified for delivery but another delivery already used this update."""
    candidate: AssistanceCandidate | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "candidate_id": self.candidate_id,
            "held": self.held,
        }


def decide(utility: float, threshold: float) -> DecisionKind:
    if utility > threshold:
        return DecisionKind.DELIVER
    if utility <= 0.0:
        return DecisionKind.DISCARD
    return DecisionKind.DEFER


def assistance_value(
    candidate: AssistanceCandidate,
    state: WorkingMemoryState,
    config: WeightsConfig,
) -> tuple[float, float, float]:
    """Return ``(value, I, R)``; recency plays no part in assistance value."""
    relevance = score_relevance(candidate.embedding, state.episodic)
    importance = candidate.importance
    return config.w_importance * importance + config.w_relevance * relevance, importance, relevance


def displacement_cost(state: WorkingMemoryState, config: WeightsConfig) -> float:
    """Composite of the item a delivery would push out; zero with a free slot."""
    if not state.is_full:
        return 0.0
    return min(s.composite for s in score_store(state, config).values())


def score_utility(
    importance: float,
    relevance: float,
    c_displacement: float,
    c_interference: float,
    config: WeightsConfig,
) -> float:
    """Weighted assistance value minus both costs."""
    value = config.w_importance * importance + config.w_relevance * relevance
    return value - (c_displacement + c_interference)


def interference_cost(candidate: AssistanceCandidate, state: WorkingMemoryState) -> float:
    """Mean dissimilarity to same-modality items; zero when there are none."""
    rivals = [it for it in state.perception if it.modality == candidate.modality]
    if not rivals:
        return 0.0
    return sum(1.0 - clamped_similarity(it.embedding, candidate.embedding) for it in rivals) / len(rivals)


def evaluate(candidate: AssistanceCandidate, state: WorkingMemoryState, config: WeightsConfig) -> Decision:
    value, importance, relevance = assistance_value(candidate, state, config)
    c_d = displacement_cost(state, config)
    c_i = interference_cost(candidate, state)
    utility = score_utility(importance, relevance, c_d, c_i, config)
    kind = decide(utility, config.utility_threshold)
    breakdown = UtilityBreakdown(
        at=state.now,
        importance_term=importance,
        relevance_term=relevance,
        value=value,
        c_displacement=c_d,
        c_interference=c_i,
        utility=utility,
        decision=kind,
    )
    candidate.evaluations.append(breakdown)
    logger.debug("%s utility %.4f -> %s", candidate.id, utility, kind.value)
    return Decision(kind, candidate.id, breakdown, candidate=candidate)


def deliver(
    candidate: AssistanceCandidate,
    state: WorkingMemoryState,
    providers: ProviderBundle,
    config: WeightsConfig,
    task_context: str = "",
) -> EncodeResult:
    """Encode a delivered message as a phonological item with its own importance."""
    return encode_and_bind(
        state,
        ItemFields(
            content=candidate.message,
            modality=Modality.PHONOLOGICAL,
            importance=candidate.importance,
            embedding=candidate.embedding,
            bypass_scorer=True,
        ),
        providers,
        config,
        task_context,
    )


def process_deferred(state: WorkingMemoryState, config: WeightsConfig) -> list[Decision]:
    """Re-evaluate the deferred queue once, in FIFO order.

    Expired and discarded candidates leave the queue. At most one candidate is
    returned as Deliver (and removed); later qualifiers stay queued as held.
    Delivering the returned candidate is the caller's job.
    """
    decisions: list[Decision] = []
    kept = []
    delivered = False
    while state.deferred:
        candidate = state.deferred.popleft()
        if candidate.age(state.now) > config.defer_ttl:
            decisions.append(Decision(DecisionKind.EXPIRE, candidate.id, candidate=candidate))
            continue
        decision = evaluate(candidate, state, config)
        if decision.kind is DecisionKind.DELIVER:
            if delivered:
                decision = Decision(DecisionKind.DEFER, candidate.id, decision.breakdown, held=True, candidate=candidate)
            else:
                delivered = True
        if decision.kind is DecisionKind.DEFER:
            kept.append(candidate)
        decisions.append(decision)
    state.deferred.extend(kept)
    return decisions


def baseline_decide(candidate: AssistanceCandidate) -> Decision:
    """Deliver whatever the generator produced; no utility, no deferral."""
    return Decision(DecisionKind.DELIVER, candidate.id, candidate=candidate)
