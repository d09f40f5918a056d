"""HTTP client backends for a remote submodel service, plus a fixture-replay
backend so the wire contract is testable without any service running.

Wire format (JSON over HTTP POST, one endpoint per stage):

  request   {"protocol_version": 1, "stage": <stage>, "input": <string>,
             "beam_width": <int, sqlgen only>}
  response  {"protocol_version": 1, "stage": <stage>, "model_version": str,
             ...stage payload...}

Stage payloads: table -> {"table", "score"}; column -> {"decisions":
[{"column", "hit"}]}; sqlgen -> {"candidates": [{"output", "score"}]};
valuefill -> {"output"}; paraphrase -> {"paraphrases": [{"text",
"similarity"}]}.  Errors come back as {"error": {"code", "message"}}.
"""

from __future__ import annotations

import hashlib
import json
import urllib.error
import urllib.request
from pathlib import Path

from .errors import BackendUnavailableError, ContractViolationError
from .contracts import CandidateSql, ColumnDecision, ColumnTagging, TableScore

PROTOCOL_VERSION = 1

ENDPOINTS = {
    "table": "/score-table",
    "column": "/tag-columns",
    "sqlgen": "/generate-sql",
    "valuefill": "/fill-values",
    "paraphrase": "/paraphrase",
}


def fixture_key(stage: str, record_input: str) -> str:
    return hashlib.sha256(f"{stage}\n{record_input}".encode("utf-8")).hexdigest()


def _require(obj: dict, field: str):
    if field not in obj:
        raise ContractViolationError(f"response missing field {field!r}")
    return obj[field]


def decode_table_response(obj: dict) -> TableScore:
    return TableScore(table=str(_require(obj, "table")), score=float(_require(obj, "score")))


def decode_column_response(obj: dict) -> ColumnTagging:
    decisions = tuple(
        ColumnDecision(column=str(d["column"]), hit=bool(d["hit"]))
        for d in _require(obj, "decisions")
    )
    return ColumnTagging(decisions=decisions)


def decode_sqlgen_response(obj: dict) -> list[CandidateSql]:
    return [
        CandidateSql(output=str(c["output"]), score=float(c["score"]))
        for c in _require(obj, "candidates")
    ]


def decode_valuefill_response(obj: dict) -> str:
    return str(_require(obj, "output"))


def decode_paraphrase_response(obj: dict) -> list[tuple[str, float]]:
    return [
        (str(p["text"]), float(p["similarity"])) for p in _require(obj, "paraphrases")
    ]


class BridgeClient:
    """Thin JSON-over-HTTP client for the submodel service."""

    def __init__(self, base_url: str, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def call(self, stage: str, record_input: str, beam_width: int | None = None) -> dict:
        payload = {
            "protocol_version": PROTOCOL_VERSION,
            "stage": stage,
            "input": record_input,
        }
        if beam_width is not None:
            payload["beam_width"] = beam_width
        req = urllib.request.Request(
            self.base_url + ENDPOINTS[stage],
            data=json.dumps(payload).encode("utf-8"),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                body = resp.read().decode("utf-8")
        except urllib.error.HTTPError as e:
            detail = e.read().decode("utf-8", errors="replace")
            raise BackendUnavailableError(
                f"bridge returned HTTP {e.code} for stage {stage}: {detail}"
            ) from e
        except (urllib.error.URLError, OSError) as e:
            raise BackendUnavailableError(f"bridge unreachable: {e}") from e
        try:
            obj = json.loads(body)
        except json.JSONDecodeError as e:
            raise BackendUnavailableError(f"bridge sent invalid JSON: {e.msg}") from e
        if "error" in obj:
            err = obj["error"]
            raise BackendUnavailableError(
                f"bridge error {err.get('code')}: {err.get('message')}"
            )
        if obj.get("stage") != stage:
            raise ContractViolationError(
                f"response stage {obj.get('stage')!r} does not match request {stage!r}"
            )
        return obj

    def health(self) -> dict:
        try:
            with urllib.request.urlopen(
                self.base_url + "/health", timeout=self.timeout
            ) as resp:
                return json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, json.JSONDecodeError) as e:
            raise BackendUnavailableError(f"bridge health check failed: {e}") from e


class BridgeTableScorer:
    concurrency = "concurrent"

    def __init__(self, base_url: str):
        self.client = BridgeClient(base_url)

    def score(self, record_input: str) -> TableScore:
        return decode_table_response(self.client.call("table", record_input))


class BridgeColumnTagger:
    concurrency = "concurrent"

    def __init__(self, base_url: str):
        self.client = BridgeClient(base_url)

    def tag(self, record_input: str) -> ColumnTagging:
        return decode_column_response(self.client.call("column", record_input))


class BridgeSqlGenerator:
    concurrency = "concurrent"

    def __init__(self, base_url: str):
        self.client = BridgeClient(base_url)

    def generate(self, record_input: str, beam_width: int) -> list[CandidateSql]:
        return decode_sqlgen_response(
            self.client.call("sqlgen", record_input, beam_width=beam_width)
        )


class BridgeValueFiller:
    concurrency = "concurrent"

    def __init__(self, base_url: str):
        self.client = BridgeClient(base_url)

    def fill(self, record_input: str) -> str:
        return decode_valuefill_response(self.client.call("valuefill", record_input))


class BridgeParaphraseProvider:
    def __init__(self, base_url: str):
        self.client = BridgeClient(base_url)

    def paraphrases(self, question: str) -> list[tuple[str, float]]:
        return decode_paraphrase_response(self.client.call("paraphrase", question))


# ---------------------------------------------------------------------------
# Fixture replay (same payloads, no network)
# ---------------------------------------------------------------------------


class FixtureStore:
    """Stage -> input-hash -> response payload, as served by the stub bridge."""

    def __init__(self, table: dict, final_sql: dict | None = None):
        self.table = table
        self.final_sql = final_sql or {}

    @classmethod
    def load(cls, path: str | Path) -> "FixtureStore":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if "stages" in doc:
            return cls(doc["stages"], doc.get("final_sql"))
        return cls(doc)

    def lookup(self, stage: str, record_input: str) -> dict:
        key = fixture_key(stage, record_input)
        stage_table = self.table.get(stage, {})
        if key not in stage_table:
            raise BackendUnavailableError(
                f"no fixture for stage {stage} input hash {key[:12]}..."
            )
        return stage_table[key]


class FixtureTableScorer:
    concurrency = "concurrent"

    def __init__(self, store: FixtureStore):
        self.store = store

    def score(self, record_input: str) -> TableScore:
        return decode_table_response(self.store.lookup("table", record_input))


class FixtureColumnTagger:
    concurrency = "concurrent"

    def __init__(self, store: FixtureStore):
        self.store = store

    def tag(self, record_input: str) -> ColumnTagging:
        return decode_column_response(self.store.lookup("column", record_input))


class FixtureSqlGenerator:
    concurrency = "concurrent"

    def __init__(self, store: FixtureStore):
        self.store = store

    def generate(self, record_input: str, beam_width: int) -> list[CandidateSql]:
        return decode_sqlgen_response(self.store.lookup("sqlgen", record_input))[:beam_width]


class FixtureValueFiller:
    concurrency = "concurrent"

    def __init__(self, store: FixtureStore):
        self.store = store

    def fill(self, record_input: str) -> str:
        return decode_valuefill_response(self.store.lookup("valuefill", record_input))
