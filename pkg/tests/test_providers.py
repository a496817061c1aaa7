# -*- coding: utf-8 -*-
"""Tests for assist_timing.providers."""

import os
import socket
import sys
import unittest
from unittest.mock import MagicMock, patch
from urllib.error import HTTPError, URLError

sys.path.insert(0, os.path.dirname(os.path.dirname(__file__)))

import numpy as np

from assist_timing.config import ProviderSettings, WeightsConfig
from assist_timing.memory import Embedding, Modality, clamped_similarity
from assist_timing.providers import (
    AssistHint,
    GeneratedAssistance,
    GenerationRequest,
    MockEmbedder,
    MockGenerator,
    MockImportanceScorer,
    MockSummarizer,
    ProviderError,
    ProviderErrorKind,
    RemoteClient,
    RemoteEmbedder,
    RemoteGenerator,
    RemoteImportanceScorer,
    RemoteSummarizer,
    build_providers,
    fnv1a_64,
    splitmix64,
    tokenize,
    token_vector,
    trigger_matches,
)
from helpers import axis, make_item


class TestHashing(unittest.TestCase):
    def test_fnv1a_reference_values(self):
        self.assertEqual(fnv1a_64(b""), 0xCBF29CE484222325)
        self.assertEqual(fnv1a_64(b"a"), 0xAF63DC4C8601EC8C)

    def test_splitmix_reference_value(self):
        self.assertEqual(next(splitmix64(0)), 0xE220A8397B1DCDAF)

    def test_token_vector_range_and_stability(self):
        v = token_vector("fork", 64, 0)
        self.assertEqual(v.shape, (64,))
        self.assertTrue(np.all(v >= -1.0) and np.all(v < 1.0))
        np.testing.assert_array_equal(v, token_vector("fork", 64, 0))
        self.assertFalse(np.array_equal(v, token_vector("fork", 64, 1)))

    def test_tokenize(self):
        self.assertEqual(tokenize("Fork_and Spoon's!"), ["fork", "and", "spoon", "s"])
        self.assertEqual(tokenize("  ...  "), [])


class TestMockEmbedder(unittest.TestCase):
    def test_sum_of_token_vectors(self):
        e = MockEmbedder(16, seed=3).embed("fork spoon")
        expected = Embedding(token_vector("fork", 16, 3) + token_vector("spoon", 16, 3))
        np.testing.assert_allclose(e.values, expected.values, atol=1e-12)

    def test_deterministic_and_case_insensitive(self):
        a = MockEmbedder(32).embed("The Fork")
        b = MockEmbedder(32).embed("the fork")
        self.assertEqual(a, b)
        self.assertEqual(a.dim, 32)

    def test_seed_changes_vectors(self):
        self.assertNotEqual(MockEmbedder(32, seed=1).embed("fork"), MockEmbedder(32, seed=2).embed("fork"))

    def test_nothing_to_embed(self):
        with self.assertRaises(ProviderError) as ctx:
            MockEmbedder(8).embed("?!")
        self.assertIs(ctx.exception.kind, ProviderErrorKind.MALFORMED_RESPONSE)

    def test_lexicon_ignores_unknown_tokens(self):
        lexicon = {"fork": [1, 0, 0, 0], "wine": [0, 1, 0, 0]}
        emb = MockEmbedder(4, lexicon=lexicon)
        self.assertEqual(emb.embed("a shiny fork"), axis(4, (0, 1)))
        self.assertAlmostEqual(clamped_similarity(emb.embed("fork and wine"), axis(4, (0, 1))), 2 ** -0.5)

    def test_lexicon_falls_back_to_hashing(self):
        lexicon = {"fork": [1, 0, 0, 0]}
        self.assertEqual(MockEmbedder(4, lexicon=lexicon).embed("banana"), MockEmbedder(4).embed("banana"))


class TestMockProviders(unittest.TestCase):
    def test_scorer_uses_hint(self):
        scorer = MockImportanceScorer()
        self.assertEqual(scorer.score("x", ""), 0.5)
        self.assertEqual(scorer.score("x", "", 0.9), 0.9)

    def test_summary_lists_contents_in_id_order(self):
        items = [make_item("item-10", axis(2, (0, 1)), content="bottle"),
                 make_item("item-2", axis(2, (0, 1)), content="fork")]
        self.assertEqual(MockSummarizer().summarize(items, "dining"), "User context: fork, bottle")

    def test_trigger_matching(self):
        self.assertTrue(trigger_matches("Cell Phone", "cell phone"))
        self.assertTrue(trigger_matches("bottle", "the wine bottle"))
        self.assertFalse(trigger_matches("bottle", "bottles"))
        self.assertFalse(trigger_matches("cell phone", "phone"))


class TestMockGenerator(unittest.TestCase):
    HINT = AssistHint("bottle", "Be careful with the bottle", 0.9)

    def _request(self, contents, hints=()):
        items = [make_item(f"item-{i}", axis(2, (0, 1)), content=c) for i, c in enumerate(contents, 1)]
        return GenerationRequest(items=items, episodes=[], newest=items[-1] if items else None,
                                 history=[], hints=hints)

    def test_hint_released_when_trigger_present(self):
        gen = MockGenerator()
        out = gen.generate(self._request(["bottle"], (self.HINT,)))
        self.assertEqual(out, [GeneratedAssistance("Be careful with the bottle", 0.9)])

    def test_hint_waits_for_trigger_and_fires_once(self):
        gen = MockGenerator()
        self.assertEqual(gen.generate(self._request(["fork"], (self.HINT,))), [])
        self.assertEqual(len(gen.generate(self._request(["fork", "bottle"]))), 1)
        self.assertEqual(gen.generate(self._request(["bottle"])), [])
        self.assertEqual(gen.generate(self._request(["bottle"], (self.HINT,))), [])

    def test_unarmed_hint_never_fires(self):
        self.assertEqual(MockGenerator().generate(self._request(["bottle"])), [])


class TestGeneratedAssistance(unittest.TestCase):
    def test_empty_message(self):
        with self.assertRaises(ProviderError):
            GeneratedAssistance("  ", 0.5)

    def test_importance_range(self):
        with self.assertRaises(ProviderError):
            GeneratedAssistance("ok", 1.2)


def _urlopen_returning(body: bytes):
    mocked = MagicMock()
    mocked.return_value.__enter__.return_value.read.return_value = body
    return mocked


class TestRemoteClient(unittest.TestCase):
    def setUp(self):
        self.client = RemoteClient("http://localhost:9999/", timeout_s=2)

    def test_posts_template_and_fields(self):
        with patch("assist_timing.providers.urlopen", _urlopen_returning(b'{"episode": "x"}')) as mocked:
            self.assertEqual(self.client.call("episode", {"a": 1}), {"episode": "x"})
        request = mocked.call_args[0][0]
        self.assertEqual(request.full_url, "http://localhost:9999")
        self.assertEqual(request.data, b'{"template": "episode", "fields": {"a": 1}}')
        self.assertEqual(mocked.call_args[1]["timeout"], 2)

    def test_timeout(self):
        with patch("assist_timing.providers.urlopen", side_effect=socket.timeout("slow")):
            with self.assertRaises(ProviderError) as ctx:
                self.client.call("embed", {})
        self.assertIs(ctx.exception.kind, ProviderErrorKind.TIMEOUT)

    def test_unreachable(self):
        with patch("assist_timing.providers.urlopen", side_effect=URLError("refused")):
            with self.assertRaises(ProviderError) as ctx:
                self.client.call("embed", {})
        self.assertIs(ctx.exception.kind, ProviderErrorKind.UNAVAILABLE)

    def test_http_error(self):
        error = HTTPError("http://localhost:9999", 503, "busy", {}, None)
        with patch("assist_timing.providers.urlopen", side_effect=error):
            with self.assertRaises(ProviderError) as ctx:
                self.client.call("embed", {})
        self.assertIs(ctx.exception.kind, ProviderErrorKind.UNAVAILABLE)

    def test_malformed_body(self):
        for body in (b"not json", b"[1, 2]"):
            with patch("assist_timing.providers.urlopen", _urlopen_returning(body)):
                with self.assertRaises(ProviderError) as ctx:
                    self.client.call("embed", {})
            self.assertIs(ctx.exception.kind, ProviderErrorKind.MALFORMED_RESPONSE)


class TestRemoteProviders(unittest.TestCase):
    def _client(self, response):
        client = MagicMock(spec=RemoteClient)
        client.endpoint = "http://svc"
        client.call.return_value = response
        return client

    def test_embedder_uses_cache(self):
        cache = MagicMock()
        cache.get.return_value = None
        client = self._client({"embedding": [3.0, 4.0]})
        e = RemoteEmbedder(client, 2, cache).embed("fork", Modality.VISUOSPATIAL)
        self.assertEqual(e.tolist(), [0.6, 0.8])
        cache.put.assert_called_once()

        cache.get.return_value = [0.6, 0.8]
        client.call.reset_mock()
        RemoteEmbedder(client, 2, cache).embed("fork")
        client.call.assert_not_called()

    def test_embedder_dimension_mismatch(self):
        with self.assertRaises(ProviderError):
            RemoteEmbedder(self._client({"embedding": [1.0]}), 2).embed("fork")

    def test_importance_reads_first_value(self):
        scorer = RemoteImportanceScorer(self._client({"perception_memory": [0.7], "episodic_buffer": []}))
        self.assertEqual(scorer.score("fork", "dining"), 0.7)

    def test_importance_out_of_range(self):
        scorer = RemoteImportanceScorer(self._client({"perception_memory": [7]}))
        with self.assertRaises(ProviderError):
            scorer.score("fork", "dining")

    def test_summarizer(self):
        summarizer = RemoteSummarizer(self._client({"episode": " User is setting the table. "}))
        items = [make_item("item-1", axis(2, (0, 1)), content="fork")]
        self.assertEqual(summarizer.summarize(items, "dining"), "User is setting the table.")

    def test_generator_messages(self):
        gen = RemoteGenerator(self._client({"assistance_messages": [{"message": "Mind the bottle", "importance": 0.8}]}))
        out = gen.generate(GenerationRequest(items=[], episodes=[], newest=None, history=[]))
        self.assertEqual(out, [GeneratedAssistance("Mind the bottle", 0.8)])

    def test_generator_baseline_no_assistance(self):
        client = self._client({"text": "NO ASSISTANCE"})
        out = RemoteGenerator(client).generate(
            GenerationRequest(items=[], episodes=[], newest=None, history=[], policy="baseline"))
        self.assertEqual(out, [])
        self.assertEqual(client.call.call_args[0][0], "baseline")

    def test_generator_malformed(self):
        gen = RemoteGenerator(self._client({"messages": []}))
        with self.assertRaises(ProviderError):
            gen.generate(GenerationRequest(items=[], episodes=[], newest=None, history=[]))


class TestBuildProviders(unittest.TestCase):
    def test_mock_bundle(self):
        bundle = build_providers(ProviderSettings(), WeightsConfig(embedding_dim=8, seed=4))
        self.assertIsInstance(bundle.embedder, MockEmbedder)
        self.assertEqual(bundle.embedder.seed, 4)
        self.assertIsNone(bundle.cache)

    def test_remote_bundle(self):
        settings = ProviderSettings(mode="remote", endpoint="http://svc")
        bundle = build_providers(settings, WeightsConfig())
        self.assertIsInstance(bundle.embedder, RemoteEmbedder)
        self.assertIsInstance(bundle.generator, RemoteGenerator)


if __name__ == "__main__":
    unittest.main()
