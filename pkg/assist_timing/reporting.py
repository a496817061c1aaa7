# -*- coding: utf-8 -*-
"""Replay traces, metrics and human-readable inspection.

Responsibilities:
    - Define the per-event ``TraceRecord`` and its JSON Lines encoding.
    - Reconcile a trace into a ``MetricsReport`` (each candidate counted once).
    - Format step snapshots and trace summaries for ``inspect``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from typing import IO, Any, Iterable

logger = logging.getLogger(__name__)

METRICS_SCHEMA = "assist-timing-metrics"
METRICS_VERSION = "1.0"

POLICIES = ("wm", "baseline")


class TraceFormatError(ValueError):
    """A trace line is not a valid record; ``line`` is 1-based."""

    def __init__(self, line: int, detail: str) -> None:
        super().__init__(f"line {line}: {detail}")
        self.line = line
        self.detail = detail


@dataclass
class TraceRecord:
    """Everything one engine update did, in serializable form."""

    step: int
    t: float
    event: dict
    encode_outcome: dict | None
    bind_outcome: dict | None
    wm_snapshot: dict
    candidates: list[dict]
    deferred_queue: list[dict]
    policy: str
    errors: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Any) -> "TraceRecord":
        if not isinstance(data, dict):
            raise ValueError("record is not a JSON object")
        names = [f.name for f in fields(cls)]
        missing = [n for n in names if n != "errors" and n not in data]
        if missing:
            raise ValueError(f"missing field(s) {missing}")
        if data["policy"] not in POLICIES:
            raise ValueError(f"unknown policy {data['policy']!r}")
        if not isinstance(data["candidates"], list) or not isinstance(data["deferred_queue"], list):
            raise ValueError("'candidates' and 'deferred_queue' must be lists")
        return cls(**{n: data[n] for n in names if n in data})


# -- JSON Lines --------------------------------------------------------------


def dumps_record(record: TraceRecord) -> str:
    """Canonical one-line encoding: sorted keys, no spaces, no NaN."""
    return json.dumps(record.to_dict(), sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_trace(records: Iterable[TraceRecord], stream: IO[str]) -> int:
    count = 0
    for record in records:
        stream.write(dumps_record(record) + "\n")
        count += 1
    stream.flush()
    return count


def save_trace(records: Iterable[TraceRecord], path: str) -> int:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        count = write_trace(records, f)
    logger.info("Wrote %d trace records to %s", count, path)
    return count


def read_trace(stream: IO[str]) -> list[TraceRecord]:
    """Parse JSON Lines; blank lines are skipped.

    Raises:
        TraceFormatError: with the 1-based number of the first bad line.
    """
    records = []
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            records.append(TraceRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, ValueError, TypeError) as exc:
            raise TraceFormatError(lineno, str(exc)) from exc
    return records


def load_trace(path: str) -> list[TraceRecord]:
    with open(path, "r", encoding="utf-8") as f:
        return read_trace(f)


# -- Metrics -----------------------------------------------------------------


def percent(numerator: int, denominator: int) -> float | None:
    """``numerator/denominator`` as a percentage rounded half-up to one decimal."""
    if denominator == 0:
        return None
    tenths = math.floor(Fraction(numerator * 1000, denominator) + Fraction(1, 2))
    return tenths / 10


@dataclass
class MetricsReport:
    events: int = 0
    encoded: int = 0
    refreshed: int = 0
    displaced: int = 0
    candidates_generated: int = 0
    delivered: int = 0
    deferred: int = 0
    """Distinct candidates deferred at least once."""
    deferred_then_delivered: int = 0
    deferred_peak: int = 0
    discarded: int = 0
    expired: int = 0
    pending: int = 0
    """Still queued at the end of the trace."""
    provider_errors: int = 0

    @property
    def reconciles(self) -> bool:
        return self.delivered + self.discarded + self.expired + self.pending == self.candidates_generated

    def rates(self) -> dict[str, float | None]:
        n = self.candidates_generated
        return {
            "candidates_per_encoding": percent(n, self.encoded),
            "delivered": percent(self.delivered, n),
            "deferred": percent(self.deferred, n),
            "discarded": percent(self.discarded, n),
            "expired": percent(self.expired, n),
        }

    def to_dict(self) -> dict:
        out = asdict(self)
        out["rates"] = self.rates()
        return out


def compute_metrics(records: Iterable[TraceRecord]) -> MetricsReport:
    """Count encodings and candidate outcomes over a trace.

    Encoding counts cover scenario events only; delivered messages entering
    memory are not counted as encodings.
    """
    report = MetricsReport()
    deferred_ids: set[str] = set()
    delivered_ids: set[str] = set()
    last_queue: list = []
    for record in records:
        report.events += 1
        outcome = record.encode_outcome or {}
        kind = outcome.get("kind")
        if kind in ("Added", "Displaced"):
            report.encoded += 1
        if kind == "Displaced":
            report.displaced += 1
        elif kind == "Refreshed":
            report.refreshed += 1
        report.provider_errors += len(record.errors)

        for entry in record.candidates:
            cid = entry["candidate_id"]
            decision = entry["decision"]["kind"]
            if entry.get("source") == "fresh":
                report.candidates_generated += 1
            if decision == "Deliver":
                report.delivered += 1
                delivered_ids.add(cid)
            elif decision == "Discard":
                report.discarded += 1
            elif decision == "Expire":
                report.expired += 1
            elif decision == "Defer":
                deferred_ids.add(cid)

        report.deferred_peak = max(report.deferred_peak, len(record.deferred_queue))
        last_queue = record.deferred_queue

    report.deferred = len(deferred_ids)
    report.deferred_then_delivered = len(deferred_ids & delivered_ids)
    report.pending = len(last_queue)
    if not report.reconciles:
        logger.warning("Trace does not reconcile: %s", report)
    return report


def generate_metrics_json(report: MetricsReport, scenario: str, policy: str) -> dict:
    return {
        "version": METRICS_VERSION,
        "schema": METRICS_SCHEMA,
        "scenario": scenario,
        "policy": policy,
        "summary": report.to_dict(),
    }


def selectivity(wm: MetricsReport, baseline: MetricsReport) -> float | None:
    """delivered(wm) / delivered(baseline); ``None`` when the baseline delivered nothing."""
    if baseline.delivered == 0:
        return None
    return wm.delivered / baseline.delivered


def generate_compare_json(scenario: str, wm: MetricsReport, baseline: MetricsReport) -> dict:
    return {
        "scenario": scenario,
        "wm": wm.to_dict(),
        "baseline": baseline.to_dict(),
        "selectivity": selectivity(wm, baseline),
    }


# -- Human-readable output ---------------------------------------------------


def _fmt(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.3f}"
    return str(value)


def format_metrics(report: MetricsReport, title: str = "") -> str:
    lines = [title] if title else []
    for key, value in report.to_dict().items():
        if key == "rates":
            for rate, pct in value.items():
                lines.append(f"  {rate + ' %':<26} {'n/a' if pct is None else pct}")
        else:
            lines.append(f"  {key:<26} {value}")
    return "\n".join(lines)


def format_step_line(record: TraceRecord) -> str:
    event = record.event
    outcome = (record.encode_outcome or {}).get("kind", "error")
    decisions = ", ".join(
        f"{c['candidate_id']}:{c['decision']['kind']}{'*' if c['decision'].get('held') else ''}"
        for c in record.candidates
    ) or "-"
    return (
        f"[{record.step:>4}] t={record.t:>7.1f} {event.get('kind', '?'):<6} "
        f"{event.get('content', '')[:40]!r:<44} {outcome:<10} {decisions}"
    )


def format_summary(records: list[TraceRecord]) -> str:
    if not records:
        return "0 steps"
    lines = [f"{len(records)} steps ({records[0].policy} policy)", ""]
    lines.extend(format_step_line(r) for r in records)
    lines.append("")
    lines.append(format_metrics(compute_metrics(records), "Metrics"))
    return "\n".join(lines)


def format_step(record: TraceRecord) -> str:
    snap = record.wm_snapshot
    lines = [
        f"Step {record.step} at t={record.t} ({record.policy} policy)",
        f"Event: {record.event.get('kind')} {record.event.get('content')!r}",
        f"Encode: {_fmt((record.encode_outcome or {}).get('kind'))}"
        f"  Bind: {_fmt((record.bind_outcome or {}).get('kind'))}",
        "",
        f"{'item':<10} {'modality':<13} {'rec':>6} {'rel':>6} {'imp':>6} {'comp':>6}  {'chunk':<9} content",
    ]
    for item in snap.get("items", []):
        s = item["scores"]
        lines.append(
            f"{item['id']:<10} {item['modality']:<13} {s['recency']:>6.3f} {s['relevance']:>6.3f} "
            f"{s['importance']:>6.3f} {s['composite']:>6.3f}  {_fmt(item['chunk']):<9} {item['content']}"
        )
    lines.append("")
    for chunk in snap.get("chunks", []):
        lines.append(f"{chunk['id']:<10} [{', '.join(chunk['item_ids'])}] {chunk['summary']}")
    if snap.get("unbound"):
        lines.append(f"unbound: {', '.join(snap['unbound'])}")

    if record.candidates:
        lines.append("")
        lines.append("Candidates:")
    for cand in record.candidates:
        decision = cand["decision"]
        held = " (held)" if decision.get("held") else ""
        lines.append(f"  {cand['candidate_id']} [{cand['source']}] {decision['kind']}{held}: {cand['message']}")
        b = cand.get("breakdown")
        if b:
            lines.append(
                f"    I={b['importance_term']:.3f} R={b['relevance_term']:.3f} value={b['value']:.3f} "
                f"C_D={b['c_displacement']:.3f} C_I={b['c_interference']:.3f} utility={b['utility']:.4f}"
            )
    if record.deferred_queue:
        queued = ", ".join(f"{q['candidate_id']} ({q['age']:.1f}s)" for q in record.deferred_queue)
        lines.append(f"Deferred: {queued}")
    for err in record.errors:
        lines.append(f"Error [{err['stage']}] {err['kind']}: {err['detail']}")
    return "\n".join(lines)
