# -*- coding: utf-8 -*-
"""Tests for assist_timing.scenario."""

import io
import json
import os
import sys
import unittest

sys.path.insert(0, os.path.dirname(os.path.dirname(__file__)))

from assist_timing.memory import Modality
from assist_timing.providers import AssistHint
from assist_timing.scenario import (
    TASK_CONTEXTS,
    ScenarioError,
    event_lines,
    load_scenario,
    parse_event,
    parse_scenario,
)
from helpers import FIXTURES, scenario_path


def _doc(events, **extra):
    return json.dumps({"name": "t", "task_context": "testing", "events": events, **extra})


class TestParseScenario(unittest.TestCase):
    def test_minimal(self):
        s = parse_scenario(_doc([{"t": 0, "kind": "visual", "content": "fork"}]))
        self.assertEqual(s.name, "t")
        self.assertEqual(len(s.events), 1)
        self.assertIs(s.events[0].modality, Modality.VISUOSPATIAL)
        self.assertIsNone(s.events[0].importance)

    def test_accepts_bytes_and_streams(self):
        raw = _doc([{"t": 0, "kind": "speech", "content": "hello"}]).encode("utf-8")
        self.assertEqual(parse_scenario(raw).events[0].kind, "speech")
        self.assertEqual(parse_scenario(io.BytesIO(raw)).events[0].content, "hello")

    def test_unknown_kind(self):
        with self.assertRaisesRegex(ScenarioError, "event 1: unknown event kind 'audio'"):
            parse_scenario(_doc([
                {"t": 0, "kind": "visual", "content": "fork"},
                {"t": 1, "kind": "audio", "content": "beep"},
            ]))

    def test_non_monotone_timestamps(self):
        with self.assertRaisesRegex(ScenarioError, "non-monotone timestamps"):
            parse_scenario(_doc([
                {"t": 5.0, "kind": "visual", "content": "fork"},
                {"t": 3.0, "kind": "visual", "content": "cup"},
            ]))

    def test_equal_timestamps_allowed(self):
        s = parse_scenario(_doc([
            {"t": 2, "kind": "visual", "content": "fork"},
            {"t": 2, "kind": "speech", "content": "nice fork"},
        ]))
        self.assertEqual([e.t for e in s.events], [2.0, 2.0])

    def test_embedding_dimension(self):
        events = [{"t": 0, "kind": "visual", "content": "fork", "embedding": [1.0, 0.0, 0.0]}]
        with self.assertRaisesRegex(ScenarioError, "dimension 3, expected 4"):
            parse_scenario(_doc(events, config_overrides={"embedding_dim": 4}))
        s = parse_scenario(_doc(events, config_overrides={"embedding_dim": 3}))
        self.assertEqual(s.events[0].embedding, (1.0, 0.0, 0.0))

    def test_importance_range(self):
        with self.assertRaisesRegex(ScenarioError, "outside"):
            parse_scenario(_doc([{"t": 0, "kind": "visual", "content": "fork", "importance": 1.2}]))

    def test_hints(self):
        s = parse_scenario(_doc([{
            "t": 0, "kind": "visual", "content": "bottle",
            "assist_hints": [{"trigger": "bottle", "message": "Careful", "importance": 0.9}],
        }]))
        self.assertEqual(s.events[0].assist_hints, (AssistHint("bottle", "Careful", 0.9),))

    def test_hint_importance_required(self):
        with self.assertRaises(ScenarioError):
            parse_scenario(_doc([{
                "t": 0, "kind": "visual", "content": "bottle",
                "assist_hints": [{"trigger": "bottle", "message": "Careful"}],
            }]))

    def test_empty_name_and_bad_json(self):
        with self.assertRaises(ScenarioError):
            parse_scenario(json.dumps({"name": "", "events": []}))
        with self.assertRaisesRegex(ScenarioError, "not valid JSON"):
            parse_scenario('{"name": "x", "events": [')

    def test_task_key_is_expanded(self):
        s = parse_scenario(json.dumps({"name": "x", "task_context": "dining", "events": []}))
        self.assertEqual(s.task_context, TASK_CONTEXTS["dining"])
        s = parse_scenario(json.dumps({"name": "x", "task_context": "Fix a bike", "events": []}))
        self.assertEqual(s.task_context, "Fix a bike")

    def test_lexicon_dimension(self):
        with self.assertRaises(ScenarioError):
            parse_scenario(_doc([], lexicon={"fork": [1, 0]}, config_overrides={"embedding_dim": 3}))

    def test_parse_event_respects_previous_time(self):
        with self.assertRaises(ScenarioError):
            parse_event({"t": 1, "kind": "visual", "content": "x"}, 0, 8, previous_t=2.0)

    def test_event_echo(self):
        s = parse_scenario(_doc([{"t": 1, "kind": "visual", "content": " fork ", "importance": 0.5}]))
        self.assertEqual(s.events[0].to_dict(), {"t": 1.0, "kind": "visual", "content": "fork", "importance": 0.5})


MULTILINE = (
    '{\n'
    '  "name": "t",\n'
    '  "events": [\n'
    '    {"t": 0, "kind": "visual", "content": "fork"},\n'
    '    {"t": 1, "kind": "audio", "content": "beep"}\n'
    '  ]\n'
    '}\n'
)


class TestEventLines(unittest.TestCase):
    def test_errors_name_the_source_line(self):
        with self.assertRaisesRegex(ScenarioError, r"^line 5: event 1: unknown event kind 'audio'"):
            parse_scenario(MULTILINE)

    def test_one_line_per_event(self):
        self.assertEqual(event_lines(MULTILINE), [4, 5])

    def test_multiline_objects_start_lines(self):
        text = json.dumps({"name": "t", "events": [{"t": 0, "kind": "visual", "content": "a"}] * 2}, indent=2)
        # each event spans five lines under indent=2
        self.assertEqual(event_lines(text), [4, 9])

    def test_compact_document(self):
        self.assertEqual(event_lines(_doc([{"t": 0, "kind": "visual", "content": "a"}] * 3)), [1, 1, 1])

    def test_no_events_key(self):
        self.assertIsNone(event_lines('{"name": "t"}'))


class TestBundledFixtures(unittest.TestCase):
    def test_all_fixtures_parse(self):
        for name in FIXTURES:
            with self.subTest(name=name):
                s = load_scenario(scenario_path(name))
                self.assertEqual(s.name, name)
                self.assertGreater(len(s.events), 0)
                self.assertEqual(s.task_context, TASK_CONTEXTS[name])

    def test_dining_lexicon_matches_override_dimension(self):
        s = load_scenario(scenario_path("dining"))
        self.assertEqual(s.config_overrides["embedding_dim"], 8)
        self.assertTrue(all(len(v) == 8 for v in s.lexicon.values()))


if __name__ == "__main__":
    unittest.main()
