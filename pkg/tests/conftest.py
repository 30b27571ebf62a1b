from __future__ import annotations

from pathlib import Path

import pytest

from sbpm.model import parse_model

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def pingpong_dir() -> Path:
    return FIXTURES / "pingpong"


@pytest.fixture(scope="session")
def order_dir() -> Path:
    return FIXTURES / "order"


@pytest.fixture(scope="session")
def pingpong_model():
    return parse_model(FIXTURES / "pingpong")


@pytest.fixture(scope="session")
def order_model():
    return parse_model(FIXTURES / "order")


@pytest.fixture(scope="session")
def golden_dir() -> Path:
    return FIXTURES / "golden"
