"""FastAPI application implementing the five stage endpoints.

Two modes: ``stub`` answers byte-for-byte from a fixture table keyed by
input hash; ``model`` answers from trained artifacts (one per stage, see
models.finetune).  Both are stateless per request and safe under
concurrent requests.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from . import wire
from .models import load_artifact
from .paraphrase import rule_paraphrases
from .stub import FixtureTable


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"error": {"code": code, "message": message}},
    )


class ModelBank:
    def __init__(self, models_dir: str | Path):
        self.models = {}
        self.versions = {}
        for path in sorted(Path(models_dir).glob("*.json")):
            stage, version, model = load_artifact(path)
            self.models[stage] = model
            self.versions[stage] = version

    def require(self, stage: str):
        if stage not in self.models:
            raise KeyError(stage)
        return self.models[stage], self.versions[stage]


def create_app(
    mode: str = "stub",
    fixtures: str | Path | None = None,
    models_dir: str | Path | None = None,
) -> FastAPI:
    if mode not in ("stub", "model"):
        raise ValueError(f"unknown mode {mode!r}")
    app = FastAPI(title="stepsql-bridge", version="0.1.0")
    table = FixtureTable.load(fixtures) if mode == "stub" else None
    if mode == "stub" and table is None:
        raise ValueError("stub mode needs a fixtures file")
    bank = ModelBank(models_dir) if mode == "model" and models_dir else None

    def answer(stage: str, req: wire.BridgeRequest):
        if req.stage != stage:
            return _error(400, "stage-mismatch", f"endpoint expects stage {stage!r}, got {req.stage!r}")
        if req.stage not in wire.STAGES:
            return _error(400, "bad-stage", f"unknown stage {req.stage!r}")
        if mode == "stub":
            payload = table.lookup(stage, req.input)
            if payload is None:
                return _error(404, "no-fixture", "input not in the fixture table")
            if stage == "sqlgen" and req.beam_width is not None:
                payload = dict(payload)
                payload["candidates"] = payload["candidates"][: req.beam_width]
            return payload
        return model_answer(stage, req)

    def model_answer(stage: str, req: wire.BridgeRequest):
        if stage == "paraphrase":
            return wire.paraphrase_payload(rule_paraphrases(req.input), "rules-v1")
        if bank is None:
            return _error(503, "no-models", "model mode started without artifacts")
        try:
            model, version = bank.require(stage)
        except KeyError:
            return _error(503, "model-missing", f"no artifact loaded for stage {stage!r}")
        if stage == "table":
            record = req.input
            table_name = record.rsplit(" ", 1)[-1]
            return wire.score_payload(table_name, model.score(record), version)
        if stage == "column":
            return wire.tagging_payload(model.tag(req.input), version)
        if stage == "sqlgen":
            beam = req.beam_width or 4
            return wire.candidates_payload(model.retrieve(req.input, beam), version)
        output = model.fill(req.input)
        if not wire.value_output_ok(output):
            output = ""
        return wire.value_payload(output, version)

    @app.post(wire.ENDPOINTS["table"])
    def score_table(req: wire.BridgeRequest):
        return answer("table", req)

    @app.post(wire.ENDPOINTS["column"])
    def tag_columns(req: wire.BridgeRequest):
        return answer("column", req)

    @app.post(wire.ENDPOINTS["sqlgen"])
    def generate_sql(req: wire.BridgeRequest):
        return answer("sqlgen", req)

    @app.post(wire.ENDPOINTS["valuefill"])
    def fill_values(req: wire.BridgeRequest):
        return answer("valuefill", req)

    @app.post(wire.ENDPOINTS["paraphrase"])
    def paraphrase(req: wire.BridgeRequest):
        return answer("paraphrase", req)

    @app.get("/health")
    def health():
        versions = (
            {"stub": table.model_version}
            if mode == "stub"
            else (bank.versions if bank else {})
        )
        return {
            "status": "ok",
            "mode": mode,
            "protocol_version": wire.PROTOCOL_VERSION,
            "model_versions": versions,
        }

    return app
