"""Stub mode: deterministic fixture table keyed by input hash."""

from __future__ import annotations

import json
from pathlib import Path

from .wire import fixture_key


class FixtureTable:
    def __init__(self, stages: dict, model_version: str = "stub"):
        self.stages = stages
        self.model_version = model_version

    @classmethod
    def load(cls, path: str | Path) -> "FixtureTable":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        stages = doc.get("stages", doc)
        return cls(stages, doc.get("model_version", "stub"))

    def lookup(self, stage: str, record_input: str) -> dict | None:
        return self.stages.get(stage, {}).get(fixture_key(stage, record_input))
