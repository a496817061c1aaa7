# -*- coding: utf-8 -*-
"""Persistent cache for embeddings fetched from a remote provider.

Responsibilities:
    - Key vectors by endpoint, dimension and content so repeated replays
      do not re-query the service.
    - Persist to msgpack (JSON fallback when msgpack is missing).
    - Prune least-recently-used entries and write atomically.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
import logging
import time
import hashlib

logger = logging.getLogger(__name__)

DEFAULT_CACHE_PATH = os.path.join(os.path.expanduser("~"), ".assist_timing_embeddings.msgpack")
_MAX_CACHE_SIZE = 20000

try:
    import msgpack
    _USE_MSGPACK = True
except ImportError:
    _USE_MSGPACK = False
    logger.warning("msgpack not available, using slower JSON cache. Install with: pip install msgpack")


def cache_key(endpoint: str, dim: int, content: str) -> str:
    digest = hashlib.sha1(content.encode("utf-8")).hexdigest()
    return f"{endpoint}|{dim}|{digest}"


class EmbeddingCache:
    """Disk-backed ``key -> vector`` map.

    Writes are batched: ``put`` only marks the cache dirty and ``flush`` saves.
    """

    def __init__(self, path: str | None = None) -> None:
        self.path = path or DEFAULT_CACHE_PATH
        self._entries: dict[str, list[float]] = {}
        self._access: dict[str, float] = {}
        self._lock = threading.RLock()  # flush may run from atexit while a replay thread writes
        self._dirty = False
        with self._lock:
            self._load()

    @property
    def _json_path(self) -> str:
        return os.path.splitext(self.path)[0] + ".json"

    def _load(self) -> None:
        self._entries, self._access = {}, {}
        if _USE_MSGPACK and os.path.exists(self.path):
            try:
                with open(self.path, "rb") as f:
                    data = msgpack.unpack(f, raw=False)
                if isinstance(data, dict):
                    self._entries = data.get("cache", {})
                    self._access = data.get("access_times", {})
                return
            except Exception as e:
                logger.warning(f"Failed to load msgpack embedding cache: {e}, trying JSON fallback")
                self._entries, self._access = {}, {}

        if os.path.exists(self._json_path):
            try:
                with open(self._json_path, "r", encoding="utf-8") as f:
                    data = json.load(f)
                if isinstance(data, dict):
                    self._entries = data.get("cache", {})
                    self._access = data.get("access_times", {})
            except Exception as e:
                logger.warning(f"Failed to load JSON embedding cache: {e}")

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def get(self, key: str) -> list[float] | None:
        with self._lock:
            vec = self._entries.get(key)
            if vec is not None:
                self._access[key] = time.time()
            return vec

    def put(self, key: str, vector: list[float]) -> None:
        with self._lock:
            self._entries[key] = [float(v) for v in vector]
            self._access[key] = time.time()
            self._dirty = True

    def _prune(self) -> None:
        """Drop the oldest entries beyond the size limit. Lock must be held."""
        excess = len(self._entries) - _MAX_CACHE_SIZE
        if excess <= 0:
            return
        oldest = sorted(self._access.items(), key=lambda kv: kv[1])[:excess]
        for key, _ in oldest:
            self._entries.pop(key, None)
            self._access.pop(key, None)

    def flush(self) -> None:
        """Write the cache to disk if anything changed."""
        with self._lock:
            if not self._dirty:
                return
            self._prune()
            payload = {"cache": self._entries, "access_times": self._access}
            target = self.path if _USE_MSGPACK else self._json_path
            directory = os.path.dirname(target) or "."
            try:
                os.makedirs(directory, exist_ok=True)
                fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
                try:
                    if _USE_MSGPACK:
                        with os.fdopen(fd, "wb") as f:
                            msgpack.pack(payload, f)
                    else:
                        with os.fdopen(fd, "w", encoding="utf-8") as f:
                            json.dump(payload, f)
                    os.replace(tmp, target)
                except Exception:
                    try:
                        os.remove(tmp)
                    except OSError:
                        pass
                    raise
                self._dirty = False
            except Exception as exc:
                logger.warning("Failed to save embedding cache: %s", exc)
