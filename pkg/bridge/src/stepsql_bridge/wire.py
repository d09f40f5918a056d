"""Wire protocol: request/response bodies for the five stage endpoints.

Matches the primary package's client exactly; see its bridge module for
the field-by-field description.  Version 1.
"""

from __future__ import annotations

import hashlib
import re

from pydantic import BaseModel, Field

PROTOCOL_VERSION = 1

STAGES = ("table", "column", "sqlgen", "valuefill", "paraphrase")

ENDPOINTS = {
    "table": "/score-table",
    "column": "/tag-columns",
    "sqlgen": "/generate-sql",
    "valuefill": "/fill-values",
    "paraphrase": "/paraphrase",
}

_VALUE_OUTPUT_RE = re.compile(r"\Aextra1 .+")


class BridgeRequest(BaseModel):
    protocol_version: int = PROTOCOL_VERSION
    stage: str
    input: str
    beam_width: int | None = Field(default=None, ge=1)


class ErrorBody(BaseModel):
    code: str
    message: str


def fixture_key(stage: str, record_input: str) -> str:
    return hashlib.sha256(f"{stage}\n{record_input}".encode("utf-8")).hexdigest()


def value_output_ok(text: str) -> bool:
    """Grammar law for fill-values outputs: empty, or 'extra1 v1 extra2 v2...'
    with indices running 1..k."""
    if text == "":
        return True
    heads = list(re.finditer(r"(?:(?<=^)|(?<= ))extra(\d+) ", text))
    if not heads or heads[0].start() != 0:
        return False
    indices = [int(m.group(1)) for m in heads]
    if indices != list(range(1, len(indices) + 1)):
        return False
    for i, m in enumerate(heads):
        end = heads[i + 1].start() - 1 if i + 1 < len(heads) else len(text)
        if not text[m.end() : end]:
            return False
    return True


def score_payload(table: str, score: float, model_version: str) -> dict:
    return {
        "protocol_version": PROTOCOL_VERSION,
        "stage": "table",
        "model_version": model_version,
        "table": table,
        "score": score,
    }


def tagging_payload(decisions: list[tuple[str, bool]], model_version: str) -> dict:
    return {
        "protocol_version": PROTOCOL_VERSION,
        "stage": "column",
        "model_version": model_version,
        "decisions": [{"column": c, "hit": h} for c, h in decisions],
    }


def candidates_payload(candidates: list[tuple[str, float]], model_version: str) -> dict:
    return {
        "protocol_version": PROTOCOL_VERSION,
        "stage": "sqlgen",
        "model_version": model_version,
        "candidates": [{"output": o, "score": s} for o, s in candidates],
    }


def value_payload(output: str, model_version: str) -> dict:
    return {
        "protocol_version": PROTOCOL_VERSION,
        "stage": "valuefill",
        "model_version": model_version,
        "output": output,
    }


def paraphrase_payload(items: list[tuple[str, float]], model_version: str) -> dict:
    return {
        "protocol_version": PROTOCOL_VERSION,
        "stage": "paraphrase",
        "model_version": model_version,
        "paraphrases": [{"text": t, "similarity": s} for t, s in items],
    }
