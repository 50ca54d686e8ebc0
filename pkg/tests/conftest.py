from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from tglg.embed import MockEmbedder

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture()
def mock_embedder() -> MockEmbedder:
    return MockEmbedder()


@pytest.fixture()
def fixtures_dir() -> Path:
    return FIXTURES
