"""Pytest entry point: puts the project root and the tests dir on sys.path
and exposes the shared fixtures.

Heavy multi-seed trend checks are marked `slow` and deselected by default;
run them with `pytest -m slow`.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))  # project root
sys.path.insert(0, str(Path(__file__).resolve().parent))          # tests dir

import numpy as np
import pytest

import tests_helper


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def rotation():
    """Exact rotation fixture: V=120, d=8, no noise."""
    return tests_helper.rotation_fixture(V=120, d=8, noise=0.0, seed=3)


@pytest.fixture
def tiny_config(tmp_path):
    return tests_helper.tiny_pipeline_config(tmp_path / "run")


@pytest.fixture(autouse=True)
def _isolated_env(monkeypatch):
    for name in ("CLWE_SEED", "CLWE_THREADS", "CLWE_OUT", "CLWE_CACHE_DIR", "CLWE_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
