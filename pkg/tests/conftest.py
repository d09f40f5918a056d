from __future__ import annotations

import importlib.resources as resources
from pathlib import Path

import pytest

from stepsql.schema import load_schema

DATA_DIR = Path(__file__).parent / "data"


def packaged(name: str) -> Path:
    return Path(str(resources.files("stepsql.data").joinpath(name)))


@pytest.fixture(scope="session")
def fixture_schema():
    return load_schema(packaged("fixture_schema.json"))


@pytest.fixture(scope="session")
def synth_schema():
    return load_schema(packaged("synth_schema.json"))


@pytest.fixture(scope="session")
def golden_dir() -> Path:
    return DATA_DIR / "golden"
