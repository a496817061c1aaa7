# -*- coding: utf-8 -*-
"""Command-line front end: ``run``, ``compare`` and ``inspect``.

Exit codes:
    0  success
    2  a named file does not exist
    3  invalid configuration or scenario
    4  remote provider failure (partial trace flushed)
    5  malformed trace line
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import sys
from typing import IO, Sequence

from assist_timing import __version__
from assist_timing.app import AssistEngine, ReplayAborted, effective_weights, replay
from assist_timing.config import AppConfig, ConfigError, load_config
from assist_timing.embed_cache import EmbeddingCache
from assist_timing.memory import ContractViolation
from assist_timing.providers import build_providers
from assist_timing.reporting import (
    POLICIES,
    TraceRecord,
    compute_metrics,
    dumps_record,
    format_metrics,
    format_step,
    format_summary,
    generate_compare_json,
    generate_metrics_json,
    load_trace,
    save_trace,
    selectivity,
    TraceFormatError,
)
from assist_timing.scenario import Scenario, ScenarioError, load_scenario, parse_event

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_MISSING_FILE = 2
EXIT_INVALID_INPUT = 3
EXIT_PROVIDER_FAILURE = 4
EXIT_BAD_TRACE = 5


def _emit(obj: dict, out: IO[str]) -> None:
    out.write(json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n")


def _error(code: int, kind: str, message: str, out: IO[str], **extra) -> int:
    """Print the machine-readable error object on stdout and return *code*."""
    logger.error("%s: %s", kind, message)
    _emit({"error": {"code": code, "kind": kind, "message": message, **extra}}, out)
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="assist-timing",
        description="Replay perception scenarios through a working-memory model and time proactive assistance.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", default=None, help="YAML or JSON config file (default: shipped defaults)")
        p.add_argument("--seed", type=int, default=None, help="override the provider seed")
        p.add_argument("--json", action="store_true", help="print a single JSON object on stdout")

    run = sub.add_parser("run", help="replay a scenario under one policy")
    run.add_argument("scenario", nargs="?", help="scenario JSON file")
    run.add_argument("--policy", choices=POLICIES, default="wm")
    run.add_argument("--trace", default=None, help="write the JSON Lines trace here")
    run.add_argument("--stdin", action="store_true",
                     help="after the scenario's events, read further events line by line from stdin")
    common(run)

    compare = sub.add_parser("compare", help="replay a scenario under both policies")
    compare.add_argument("scenario", help="scenario JSON file")
    common(compare)

    inspect = sub.add_parser("inspect", help="summarize a trace or show one step")
    inspect.add_argument("trace", help="JSON Lines trace file")
    inspect.add_argument("--step", type=int, default=None, help="show the snapshot of this step")
    inspect.add_argument("--json", action="store_true", help="print a single JSON object on stdout")
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        force=True,
    )


def _load_inputs(args: argparse.Namespace) -> tuple[AppConfig, Scenario | None]:
    config = load_config(args.config)
    scenario = None
    if getattr(args, "scenario", None):
        scenario = load_scenario(args.scenario, config.weights.embedding_dim)
    return config, scenario


def _flush_partial(records: Sequence[TraceRecord], path: str | None) -> None:
    if path:
        save_trace(records, path)


# -- Commands ----------------------------------------------------------------


def _read_stdin_events(engine: AssistEngine, dim: int, stdin: IO[str], out: IO[str] | None) -> None:
    """Step the engine once per JSON line, echoing each record to *out* unless it is None."""
    count = len(engine.records)
    for lineno, line in enumerate(stdin, start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"line {lineno}: event {count}: not valid JSON: {exc.msg}") from exc
        event = parse_event(raw, count, dim, engine.state.now, line=lineno)
        record = engine.step(event)
        count += 1
        if out is not None:
            out.write(dumps_record(record) + "\n")
            out.flush()


def cmd_run(args: argparse.Namespace, out: IO[str], stdin: IO[str]) -> int:
    config, scenario = _load_inputs(args)
    if scenario is None:
        if not args.stdin:
            raise ScenarioError("a scenario file is required unless --stdin is given")
        scenario = Scenario(name="stdin", task_context="", events=[])
    weights = effective_weights(config, scenario, args.seed)
    providers = build_providers(config.provider, weights, scenario.lexicon)
    strict = config.provider.mode == "remote"

    engine = AssistEngine(weights, providers, args.policy, scenario.task_context, strict)
    try:
        engine.run(scenario.events)
        if args.stdin:
            # --json keeps stdout to the single metrics object; records still reach --trace
            _read_stdin_events(engine, weights.embedding_dim, stdin, None if args.json else out)
    except (ScenarioError, ContractViolation):
        _flush_partial(engine.records, args.trace)
        raise
    except ReplayAborted as exc:
        _flush_partial(exc.records, args.trace)
        return _error(EXIT_PROVIDER_FAILURE, exc.error.kind.value, exc.error.detail, out,
                      steps_completed=len(exc.records))
    finally:
        providers.close()

    records = engine.records
    _flush_partial(records, args.trace)
    report = compute_metrics(records)
    if args.json:
        _emit(generate_metrics_json(report, scenario.name, args.policy), out)
    else:
        out.write(format_metrics(report, f"{scenario.name} ({args.policy} policy)") + "\n")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace, out: IO[str]) -> int:
    config, scenario = _load_inputs(args)
    weights = effective_weights(config, scenario, args.seed)
    strict = config.provider.mode == "remote"
    shared_cache = EmbeddingCache(config.provider.cache_path) if config.provider.cache_path else None

    def _one(policy: str):
        providers = build_providers(config.provider, weights, scenario.lexicon, cache=shared_cache)
        return replay(scenario, policy, providers, weights, strict)

    try:
        with concurrent.futures.ThreadPoolExecutor(max_workers=len(POLICIES)) as executor:
            futures = {policy: executor.submit(_one, policy) for policy in POLICIES}
            results = {policy: f.result() for policy, f in futures.items()}
    except ReplayAborted as exc:
        return _error(EXIT_PROVIDER_FAILURE, exc.error.kind.value, exc.error.detail, out)
    finally:
        if shared_cache is not None:
            shared_cache.flush()

    wm, baseline = results["wm"][1], results["baseline"][1]
    if args.json:
        _emit(generate_compare_json(scenario.name, wm, baseline), out)
    else:
        ratio = selectivity(wm, baseline)
        out.write(format_metrics(wm, f"{scenario.name}: wm policy") + "\n\n")
        out.write(format_metrics(baseline, f"{scenario.name}: baseline policy") + "\n\n")
        out.write(f"selectivity (delivered wm / baseline): {'n/a' if ratio is None else f'{ratio:.3f}'}\n")
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace, out: IO[str]) -> int:
    records = load_trace(args.trace)
    if args.step is not None:
        match = [r for r in records if r.step == args.step]
        if not match:
            return _error(EXIT_INVALID_INPUT, "StepNotFound",
                          f"step {args.step} not in trace ({len(records)} steps)", out)
        record = match[0]
        if args.json:
            _emit(record.to_dict(), out)
        else:
            out.write(format_step(record) + "\n")
        return EXIT_OK

    if args.json:
        _emit({"steps": len(records), "metrics": compute_metrics(records).to_dict()}, out)
    else:
        out.write(format_summary(records) + "\n")
    return EXIT_OK


def main(argv: Sequence[str] | None = None, out: IO[str] | None = None, stdin: IO[str] | None = None) -> int:
    out = out or sys.stdout
    stdin = stdin or sys.stdin
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)

    try:
        if args.command == "run":
            return cmd_run(args, out, stdin)
        if args.command == "compare":
            return cmd_compare(args, out)
        return cmd_inspect(args, out)
    except FileNotFoundError as exc:
        return _error(EXIT_MISSING_FILE, "FileNotFound", f"no such file: {exc.filename or exc}", out)
    except ConfigError as exc:
        return _error(EXIT_INVALID_INPUT, "ConfigError", str(exc), out)
    except (ScenarioError, ContractViolation) as exc:
        return _error(EXIT_INVALID_INPUT, "ScenarioError", str(exc), out)
    except TraceFormatError as exc:
        return _error(EXIT_BAD_TRACE, "TraceFormatError", exc.detail, out, line=exc.line)


if __name__ == "__main__":
    sys.exit(main())
