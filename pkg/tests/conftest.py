# -*- coding: utf-8 -*-
"""Test isolation: a developer shell must not leak ASSIST_TIMING_* variables
(seed, remote endpoint) into the suite. Tests that need one set it themselves
through ``monkeypatch`` or an explicit ``environ`` mapping.
"""

import os

import pytest


@pytest.fixture(autouse=True)
def _clean_assist_env(monkeypatch):
    for name in list(os.environ):
        if name.startswith("ASSIST_TIMING_"):
            monkeypatch.delenv(name, raising=False)
    yield
