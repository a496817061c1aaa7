# -*- coding: utf-8 -*-
"""Main application: the engine that replays perception events through working
memory and the timing predictor.

The ``AssistEngine`` runs one update per event:

    advance clock → retry unbound → encode + bind → generate → decide → trace
"""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import Iterable

from assist_timing.chunking import EncodeResult, encode_and_bind, retry_unbound
from assist_timing.config import AppConfig, WeightsConfig
from assist_timing.encoding import ItemFields, score_store
from assist_timing.memory import Embedding, Modality, WorkingMemoryState
from assist_timing.providers import (
    GeneratedAssistance,
    GenerationRequest,
    ProviderBundle,
    ProviderError,
)
from assist_timing.reporting import POLICIES, MetricsReport, TraceRecord, compute_metrics
from assist_timing.scenario import Scenario, ScenarioEvent
from assist_timing.timing import (
    AssistanceCandidate,
    Decision,
    DecisionKind,
    baseline_decide,
    deliver,
    evaluate,
    process_deferred,
)

logger = logging.getLogger(__name__)


class ReplayAborted(RuntimeError):
    """Strict replay stopped at the first provider error; ``records`` holds the partial trace."""

    def __init__(self, error: ProviderError, records: list[TraceRecord]) -> None:
        super().__init__(str(error))
        self.error = error
        self.records = records


def effective_weights(config: AppConfig, scenario: Scenario | None = None, seed: int | None = None) -> WeightsConfig:
    """Config file weights, then scenario overrides, then an explicit seed."""
    weights = config.weights
    if scenario is not None:
        weights = weights.with_overrides(scenario.config_overrides)
    if seed is not None:
        weights = replace(weights, seed=seed).validate()
    return weights


class AssistEngine:
    """One working-memory model and deferred queue, advanced event by event."""

    def __init__(
        self,
        config: WeightsConfig,
        providers: ProviderBundle,
        policy: str = "wm",
        task_context: str = "",
        strict: bool = False,
    ) -> None:
        if policy not in POLICIES:
            raise ValueError(f"unknown policy {policy!r}")
        self.config = config
        self.providers = providers
        self.policy = policy
        self.task_context = task_context
        self.strict = strict
        self.state = WorkingMemoryState(capacity_items=config.capacity_items, capacity_chunks=config.capacity_chunks)
        self.history: list[str] = []
        self.records: list[TraceRecord] = []

    # -- Helpers -------------------------------------------------------------

    def _fail(self, errors: list[dict], stage: str, exc: ProviderError) -> None:
        logger.warning("Provider error during %s at t=%s: %s", stage, self.state.now, exc)
        errors.append({"stage": stage, "kind": exc.kind.value, "detail": exc.detail})
        if self.strict:
            raise ReplayAborted(exc, list(self.records))

    def _encode_event(self, event: ScenarioEvent) -> ItemFields:
        embedding = None
        if event.embedding is not None:
            embedding = Embedding(event.embedding, self.config.embedding_dim)
        return ItemFields(
            content=event.content,
            modality=event.modality,
            importance=event.importance,
            embedding=embedding,
        )

    def _make_candidate(self, generated: GeneratedAssistance) -> AssistanceCandidate:
        embedding = self.providers.embedder.embed(generated.message, Modality.PHONOLOGICAL)
        return AssistanceCandidate(
            id=self.state.new_id("cand"),
            message=generated.message,
            importance=generated.importance,
            embedding=embedding,
            created_at=self.state.now,
        )

    def _deliver(self, candidate: AssistanceCandidate, errors: list[dict]) -> dict:
        """Encode a delivered message into memory; return its outcome for the trace."""
        self.history.append(candidate.message)
        try:
            result: EncodeResult = deliver(candidate, self.state, self.providers, self.config, self.task_context)
        except ProviderError as exc:
            self._fail(errors, "deliver", exc)
            return {"encode": None, "bind": None}
        if result.bind_error is not None:
            self._fail(errors, "deliver_bind", result.bind_error)
        logger.info("Delivered %s at t=%s: %s", candidate.id, self.state.now, candidate.message)
        return {
            "encode": result.encode.to_dict(),
            "bind": result.bind.to_dict() if result.bind else None,
        }

    @staticmethod
    def _entry(candidate: AssistanceCandidate, decision: Decision, source: str) -> dict:
        return {
            "candidate_id": candidate.id,
            "message": candidate.message,
            "importance": candidate.importance,
            "source": source,
            "breakdown": decision.breakdown.to_dict() if decision.breakdown else None,
            "decision": decision.to_dict(),
        }

    def _snapshot(self) -> dict:
        scores = score_store(self.state, self.config)
        items = []
        for it in self.state.perception:
            chunk = self.state.chunk_of(it.id)
            items.append({
                "id": it.id,
                "modality": it.modality.value,
                "content": it.content,
                "encoded_at": it.encoded_at,
                "last_activated_at": it.last_activated_at,
                "chunk": chunk.id if chunk else None,
                "scores": scores[it.id].to_dict(),
            })
        chunks = [
            {"id": ch.id, "created_at": ch.created_at, "summary": ch.summary, "item_ids": list(ch.item_ids)}
            for ch in self.state.episodic
        ]
        return {"items": items, "chunks": chunks, "unbound": list(self.state.unbound)}

    # -- Policies ------------------------------------------------------------

    def _decide_wm(self, fresh: list[AssistanceCandidate], errors: list[dict]) -> list[dict]:
        entries: list[dict] = []
        queued_before = len(self.state.deferred)
        new_deferrals: list[AssistanceCandidate] = []

        delivered = False
        for candidate in fresh:
            decision = evaluate(candidate, self.state, self.config)
            if decision.kind is DecisionKind.DELIVER and delivered:
                decision = Decision(DecisionKind.DEFER, candidate.id, decision.breakdown, held=True, candidate=candidate)
            entry = self._entry(candidate, decision, "fresh")
            if decision.kind is DecisionKind.DELIVER:
                delivered = True
                entry["delivery"] = self._deliver(candidate, errors)
            elif decision.kind is DecisionKind.DEFER:
                new_deferrals.append(candidate)
            entries.append(entry)

        if queued_before:
            for decision in process_deferred(self.state, self.config):
                entry = self._entry(decision.candidate, decision, "deferred")
                if decision.kind is DecisionKind.DELIVER:
                    entry["delivery"] = self._deliver(decision.candidate, errors)
                entries.append(entry)

        self.state.deferred.extend(new_deferrals)
        return entries

    def _decide_baseline(self, fresh: list[AssistanceCandidate], errors: list[dict]) -> list[dict]:
        entries = []
        for candidate in fresh:
            decision = baseline_decide(candidate)
            entry = self._entry(candidate, decision, "fresh")
            entry["delivery"] = self._deliver(candidate, errors)
            entries.append(entry)
        return entries

    # -- Update --------------------------------------------------------------

    def step(self, event: ScenarioEvent) -> TraceRecord:
        """Process one event and append its trace record.

        Raises:
            ContractViolation: the event moves the clock backwards.
            ReplayAborted: strict mode hit a provider error.
        """
        errors: list[dict] = []
        self.state.advance(event.t)

        for result in retry_unbound(self.state, self.providers, self.config, self.task_context):
            if isinstance(result, ProviderError):
                self._fail(errors, "rebind", result)

        encode_dict = bind_dict = None
        newest = None
        try:
            result = encode_and_bind(self.state, self._encode_event(event), self.providers, self.config, self.task_context)
        except ProviderError as exc:
            self._fail(errors, "encode", exc)
        else:
            encode_dict = result.encode.to_dict()
            bind_dict = result.bind.to_dict() if result.bind else None
            newest = self.state.item(result.encode.item_id)
            if result.bind_error is not None:
                self._fail(errors, "bind", result.bind_error)

        request = GenerationRequest(
            items=list(self.state.perception),
            episodes=[ch.summary for ch in self.state.episodic],
            newest=newest,
            history=list(self.history),
            task_context=self.task_context,
            hints=event.assist_hints,
            policy=self.policy,
        )
        try:
            generated = self.providers.generator.generate(request)
        except ProviderError as exc:
            self._fail(errors, "generate", exc)
            generated = []

        fresh = []
        for g in generated:
            try:
                fresh.append(self._make_candidate(g))
            except ProviderError as exc:
                self._fail(errors, "embed_candidate", exc)

        if self.policy == "wm":
            entries = self._decide_wm(fresh, errors)
        else:
            entries = self._decide_baseline(fresh, errors)

        self.state.validate()
        record = TraceRecord(
            step=len(self.records),
            t=self.state.now,
            event=event.to_dict(),
            encode_outcome=encode_dict,
            bind_outcome=bind_dict,
            wm_snapshot=self._snapshot(),
            candidates=entries,
            deferred_queue=[
                {"candidate_id": c.id, "age": c.age(self.state.now)} for c in self.state.deferred
            ],
            policy=self.policy,
            errors=errors,
        )
        self.records.append(record)
        logger.debug(
            "Step %d t=%s: %s, %d candidate(s), %d deferred",
            record.step, record.t, (encode_dict or {}).get("kind"), len(entries), len(self.state.deferred),
        )
        return record

    def run(self, events: Iterable[ScenarioEvent]) -> list[TraceRecord]:
        for event in events:
            self.step(event)
        return self.records


def replay(
    scenario: Scenario,
    policy: str,
    providers: ProviderBundle,
    config: WeightsConfig,
    strict: bool = False,
) -> tuple[list[TraceRecord], MetricsReport]:
    """Replay every scenario event through a fresh engine.

    *config* must already include the scenario's overrides (see ``effective_weights``).
    """
    engine = AssistEngine(config, providers, policy, scenario.task_context, strict)
    logger.info("Replaying %r (%d events, %s policy)", scenario.name, len(scenario.events), policy)
    records = engine.run(scenario.events)
    return records, compute_metrics(records)


def main() -> None:
    from assist_timing.cli import main as cli_main
    raise SystemExit(cli_main())
