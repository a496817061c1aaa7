# -*- coding: utf-8 -*-
"""Scenario files: timestamped perception events driving a replay.

Responsibilities:
    - Parse and validate scenario JSON (kinds, timestamps, embeddings, hints).
    - Expand the built-in task keys into task descriptions.
    - Parse single events for line-by-line (stdin) input.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field
from typing import IO, Any

from assist_timing.memory import Modality
from assist_timing.providers import AssistHint

logger = logging.getLogger(__name__)

EVENT_KINDS = ("visual", "speech")

# Built-in task descriptions, keyed by the short name a scenario may use
TASK_CONTEXTS: dict[str, str] = {
    "dining": (
        "Preparing a dining table for a meal with guests, grouping utensils, "
        "serving dishes and tableware. Objects: bottle, cup, bowl, fork, spoon, "
        "orange, banana, apple, potted plant, vase."
    ),
    "office": (
        "Arranging an office desk ahead of a meeting with a colleague, grouping "
        "electronics, reading material and decorations. Objects: laptop, keyboard, "
        "mouse, cell phone, book, clock, cup, scissors, note papers, marker."
    ),
    "packing": (
        "Packing luggage for a business trip, grouping clothing, electronics and "
        "personal items. Objects: backpack, umbrella, tie, handbag, toothbrush, "
        "laptop, bottle, banana, sunglasses, medication."
    ),
    "living": (
        "Tidying a living room before guests arrive, grouping seating, "
        "entertainment and decor. Objects: remote, vase, sports ball, laptop, book, "
        "potted plant, candle, cup, snack, teapot."
    ),
}


class ScenarioError(ValueError):
    """Invalid scenario file or event."""


@dataclass(frozen=True)
class ScenarioEvent:
    t: float
    kind: str
    content: str
    embedding: tuple[float, ...] | None = None
    importance: float | None = None
    assist_hints: tuple[AssistHint, ...] = ()

    @property
    def modality(self) -> Modality:
        return Modality.from_event_kind(self.kind)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"t": self.t, "kind": self.kind, "content": self.content}
        if self.embedding is not None:
            out["embedding"] = list(self.embedding)
        if self.importance is not None:
            out["importance"] = self.importance
        if self.assist_hints:
            out["assist_hints"] = [
                {"trigger": h.trigger, "message": h.message, "importance": h.importance}
                for h in self.assist_hints
            ]
        return out


@dataclass
class Scenario:
    name: str
    task_context: str
    events: list[ScenarioEvent]
    config_overrides: dict[str, Any] = field(default_factory=dict)
    lexicon: dict[str, list[float]] = field(default_factory=dict)


def _number(value: Any, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ScenarioError(f"{what} must be a finite number (got {value!r})")
    return float(value)


def _unit(value: Any, what: str) -> float:
    value = _number(value, what)
    if not 0.0 <= value <= 1.0:
        raise ScenarioError(f"{what} {value} outside [0,1]")
    return value


def _vector(value: Any, dim: int, what: str) -> tuple[float, ...]:
    if not isinstance(value, list):
        raise ScenarioError(f"{what} must be a list of numbers")
    if len(value) != dim:
        raise ScenarioError(f"{what} has dimension {len(value)}, expected {dim}")
    return tuple(_number(v, what) for v in value)


def _hint(raw: Any, where: str) -> AssistHint:
    if not isinstance(raw, dict):
        raise ScenarioError(f"{where}: assist hint must be an object")
    trigger, message = raw.get("trigger"), raw.get("message")
    if not isinstance(trigger, str) or not trigger.strip():
        raise ScenarioError(f"{where}: assist hint needs a non-empty 'trigger'")
    if not isinstance(message, str) or not message.strip():
        raise ScenarioError(f"{where}: assist hint needs a non-empty 'message'")
    return AssistHint(trigger.strip(), message.strip(), _unit(raw.get("importance"), f"{where}: hint importance"))


def parse_event(raw: Any, index: int, dim: int, previous_t: float = 0.0, line: int | None = None) -> ScenarioEvent:
    """Validate one event object; *index* and *line* are used in error messages only."""
    where = f"line {line}: event {index}" if line is not None else f"event {index}"
    if not isinstance(raw, dict):
        raise ScenarioError(f"{where}: not an object")
    kind = raw.get("kind")
    if kind not in EVENT_KINDS:
        raise ScenarioError(f"{where}: unknown event kind {kind!r}")
    t = _number(raw.get("t"), f"{where}: t")
    if t < 0:
        raise ScenarioError(f"{where}: negative timestamp {t}")
    if t < previous_t:
        raise ScenarioError(f"{where}: non-monotone timestamps ({t} after {previous_t})")
    content = raw.get("content")
    if not isinstance(content, str) or not content.strip():
        raise ScenarioError(f"{where}: 'content' must be a non-empty string")
    embedding = None
    if raw.get("embedding") is not None:
        embedding = _vector(raw["embedding"], dim, f"{where}: embedding")
        if not any(embedding):
            raise ScenarioError(f"{where}: embedding is the zero vector")
    importance = None
    if raw.get("importance") is not None:
        importance = _unit(raw["importance"], f"{where}: importance")
    hints = tuple(_hint(h, where) for h in raw.get("assist_hints") or ())
    return ScenarioEvent(t=t, kind=kind, content=content.strip(), embedding=embedding,
                         importance=importance, assist_hints=hints)


def resolve_task_context(value: str) -> str:
    return TASK_CONTEXTS.get(value.strip().lower(), value)


_EVENTS_ARRAY = re.compile(r'"events"\s*:\s*\[')


def event_lines(text: str) -> list[int] | None:
    """1-based source line of each element of the ``events`` array, or None if it cannot be located."""
    match = _EVENTS_ARRAY.search(text)
    if match is None:
        return None
    decoder = json.JSONDecoder()
    lines: list[int] = []
    pos, line, counted = match.end(), 1, 0
    while True:
        while pos < len(text) and text[pos] in " \t\r\n,":
            pos += 1
        if pos >= len(text) or text[pos] == "]":
            return lines
        line += text.count("\n", counted, pos)
        counted = pos
        lines.append(line)
        try:
            _, pos = decoder.raw_decode(text, pos)
        except json.JSONDecodeError:
            return None


def scenario_from_dict(data: Any, default_dim: int = 64, lines: list[int] | None = None) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    name = data.get("name")
    if not isinstance(name, str) or not name.strip():
        raise ScenarioError("scenario needs a non-empty 'name'")
    task_context = data.get("task_context", "")
    if not isinstance(task_context, str):
        raise ScenarioError("'task_context' must be a string")
    overrides = data.get("config_overrides") or {}
    if not isinstance(overrides, dict):
        raise ScenarioError("'config_overrides' must be an object")

    dim = overrides.get("embedding_dim", default_dim)
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise ScenarioError(f"invalid embedding_dim override {dim!r}")

    lexicon_raw = data.get("lexicon") or {}
    if not isinstance(lexicon_raw, dict):
        raise ScenarioError("'lexicon' must be an object of token vectors")
    lexicon = {str(k).lower(): list(_vector(v, dim, f"lexicon '{k}'")) for k, v in lexicon_raw.items()}

    raw_events = data.get("events")
    if not isinstance(raw_events, list):
        raise ScenarioError("scenario needs an 'events' list")
    if lines is not None and len(lines) != len(raw_events):
        lines = None
    events: list[ScenarioEvent] = []
    previous = 0.0
    for index, raw in enumerate(raw_events):
        event = parse_event(raw, index, dim, previous, lines[index] if lines else None)
        previous = event.t
        events.append(event)

    return Scenario(
        name=name.strip(),
        task_context=resolve_task_context(task_context),
        events=events,
        config_overrides=dict(overrides),
        lexicon=lexicon,
    )


def parse_scenario(source: bytes | str | IO, default_dim: int = 64) -> Scenario:
    """Parse a UTF-8 JSON scenario from bytes, text or a readable stream."""
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ScenarioError(f"scenario is not valid UTF-8: {exc}") from exc
    try:
        data = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON (line {exc.lineno}): {exc.msg}") from exc
    scenario = scenario_from_dict(data, default_dim, event_lines(source))
    logger.debug("Parsed scenario %r with %d events", scenario.name, len(scenario.events))
    return scenario


def load_scenario(path: str, default_dim: int = 64) -> Scenario:
    with open(path, "rb") as f:
        return parse_scenario(f, default_dim)
