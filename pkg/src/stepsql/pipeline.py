"""Four-stage inference pipeline with the entity bridge wrapped around it.

Stage order: table selection, column selection, templated-SQL generation
(beam + validity filter), value filling.  Every run returns the final query
plus a replayable trace; failures raise StageFailureError naming the stage
and carrying the partial trace.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

from .baselines import (
    BaselineColumnTagger,
    BaselineSqlGenerator,
    BaselineTableScorer,
    BaselineValueFiller,
)
from .contracts import (
    check_candidates,
    check_column_tagging,
    check_table_score,
    resolve_candidate,
    validity_filter,
)
from .entities import EntityMapping, link_entities, substitute_backward, substitute_forward
from .errors import (
    NoTemplateApplicableError,
    NoValidCandidatesError,
    StageFailureError,
)
from .records import (
    build_column_input,
    build_sqlgen_input,
    build_table_input,
    build_valuefill_input,
    parse_value_output,
)
from .schema import Question, Schema
from .sqlast import SqlQuery, fill_values, resolve_query, serialize

STAGES = ("table", "column", "sqlgen", "valuefill")


@dataclass(frozen=True)
class PipelineConfig:
    table_threshold: float = 0.0
    top_k: int = 1
    beam_width: int = 4
    ner_enabled: bool = True
    restore_mode: bool = True
    ner_max_distance: int = 2
    backends: dict = field(default_factory=dict)  # stage -> "baseline" | "bridge"
    bridge_url: str | None = None

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        for stage, impl in self.backends.items():
            if stage not in STAGES and stage != "all":
                raise ValueError(f"unknown stage {stage!r}")
            if impl not in ("baseline", "bridge"):
                raise ValueError(f"unknown backend {impl!r}")

    def backend_for(self, stage: str) -> str:
        return self.backends.get(stage, self.backends.get("all", "baseline"))

    def to_obj(self) -> dict:
        return {
            "table_threshold": self.table_threshold,
            "top_k": self.top_k,
            "beam_width": self.beam_width,
            "ner_enabled": self.ner_enabled,
            "restore_mode": self.restore_mode,
            "ner_max_distance": self.ner_max_distance,
            "backends": {s: self.backend_for(s) for s in STAGES},
        }


@dataclass
class PipelineBackends:
    table_scorer: object
    column_tagger: object
    sql_generator: object
    value_filler: object


def make_backends(schema: Schema, config: PipelineConfig) -> PipelineBackends:
    """Instantiate the configured backend for each stage."""

    def pick(stage: str, baseline_factory, bridge_factory):
        if config.backend_for(stage) == "bridge":
            if not config.bridge_url:
                raise ValueError(f"stage {stage} wants the bridge but no bridge_url is set")
            return bridge_factory()
        return baseline_factory()

    from . import bridge as bridge_mod

    url = config.bridge_url
    return PipelineBackends(
        table_scorer=pick(
            "table",
            lambda: BaselineTableScorer(schema),
            lambda: bridge_mod.BridgeTableScorer(url),
        ),
        column_tagger=pick(
            "column",
            lambda: BaselineColumnTagger(schema),
            lambda: bridge_mod.BridgeColumnTagger(url),
        ),
        sql_generator=pick(
            "sqlgen",
            lambda: BaselineSqlGenerator(schema),
            lambda: bridge_mod.BridgeSqlGenerator(url),
        ),
        value_filler=pick(
            "valuefill",
            lambda: BaselineValueFiller(schema),
            lambda: bridge_mod.BridgeValueFiller(url),
        ),
    )


@dataclass
class StageTrace:
    stage: str
    inputs: list
    outputs: list
    notes: dict = field(default_factory=dict)
    elapsed: float = field(default=0.0, compare=False)


@dataclass
class PipelineTrace:
    question: str
    config: dict
    stages: list[StageTrace] = field(default_factory=list)
    entity_mapping: list = field(default_factory=list)
    final_sql: str | None = None

    def to_jsonl(self) -> str:
        lines = [
            json.dumps(
                {"kind": "run", "question": self.question, "config": self.config},
                ensure_ascii=False,
            )
        ]
        if self.entity_mapping:
            lines.append(
                json.dumps(
                    {"kind": "entities", "links": self.entity_mapping}, ensure_ascii=False
                )
            )
        for s in self.stages:
            lines.append(
                json.dumps(
                    {
                        "kind": "stage",
                        "stage": s.stage,
                        "inputs": s.inputs,
                        "outputs": s.outputs,
                        "notes": s.notes,
                        "elapsed_ms": round(s.elapsed * 1000, 3),
                    },
                    ensure_ascii=False,
                )
            )
        lines.append(
            json.dumps({"kind": "final", "sql": self.final_sql}, ensure_ascii=False)
        )
        return "\n".join(lines)


def run(
    question: str | Question,
    schema: Schema,
    config: PipelineConfig | None = None,
    backends: PipelineBackends | None = None,
) -> tuple[SqlQuery, PipelineTrace]:
    """Translate a question into SQL; returns (query, trace)."""
    config = config or PipelineConfig()
    backends = backends or make_backends(schema, config)
    q = question if isinstance(question, Question) else Question.from_text(question)
    trace = PipelineTrace(question=q.text, config=config.to_obj())

    mapping = EntityMapping(links=())
    if config.ner_enabled:
        mapping = link_entities(q, schema, max_distance=config.ner_max_distance)
        q = substitute_forward(q, mapping)
        trace.entity_mapping = mapping.to_obj()

    # table selection
    t0 = time.perf_counter()
    scored = []
    inputs = []
    for table in schema.tables:
        record_input = build_table_input(q.text, table.name)
        inputs.append(record_input)
        score = check_table_score(backends.table_scorer.score(record_input), table.name)
        scored.append(score)
    order = sorted(
        range(len(scored)), key=lambda i: (-scored[i].score, i)
    )  # ties break by schema order
    kept = [scored[i].table for i in order if scored[i].score > config.table_threshold][
        : config.top_k
    ]
    trace.stages.append(
        StageTrace(
            stage="table",
            inputs=inputs,
            outputs=[{"table": s.table, "score": s.score} for s in scored],
            notes={"kept": kept, "threshold": config.table_threshold, "top_k": config.top_k},
            elapsed=time.perf_counter() - t0,
        )
    )
    if not kept:
        raise StageFailureError("table-selection", "no table above threshold", trace)

    # column selection
    t0 = time.perf_counter()
    listing: list[tuple[str, list[str]]] = []
    col_inputs, col_outputs = [], []
    for table in kept:
        record_input = build_column_input(q.text, schema, table)
        col_inputs.append(record_input)
        tbl = schema.table(table)
        tagging = check_column_tagging(
            backends.column_tagger.tag(record_input), tbl.column_names()
        )
        hits = tagging.hit_columns()
        col_outputs.append({"table": table, "hits": hits})
        if hits:
            listing.append((table, hits))
    trace.stages.append(
        StageTrace(
            stage="column",
            inputs=col_inputs,
            outputs=col_outputs,
            elapsed=time.perf_counter() - t0,
        )
    )
    if not listing:
        raise StageFailureError("column-selection", "no column selected", trace)

    # templated SQL generation
    t0 = time.perf_counter()
    gen_input, _table_map, _column_map = build_sqlgen_input(q.text, listing)
    try:
        candidates = check_candidates(
            backends.sql_generator.generate(gen_input, config.beam_width),
            config.beam_width,
        )
    except NoTemplateApplicableError as e:
        trace.stages.append(StageTrace(stage="sqlgen", inputs=[gen_input], outputs=[]))
        raise StageFailureError("sql-generation", str(e), trace) from e
    try:
        valid = validity_filter(candidates, gen_input, schema)
    except NoValidCandidatesError as e:
        trace.stages.append(
            StageTrace(
                stage="sqlgen",
                inputs=[gen_input],
                outputs=[{"output": c.output, "score": c.score} for c in candidates],
                notes={"valid": 0},
            )
        )
        raise StageFailureError("sql-generation", "no valid candidate", trace) from e
    if not valid:
        trace.stages.append(StageTrace(stage="sqlgen", inputs=[gen_input], outputs=[]))
        raise StageFailureError("sql-generation", "generator returned nothing", trace)
    best = valid[0]
    templated = resolve_candidate(best, gen_input, schema)
    trace.stages.append(
        StageTrace(
            stage="sqlgen",
            inputs=[gen_input],
            outputs=[{"output": c.output, "score": c.score} for c in candidates],
            notes={
                "valid": len(valid),
                "chosen": best.output,
                "resolved": serialize(templated),
            },
            elapsed=time.perf_counter() - t0,
        )
    )

    # value filling
    t0 = time.perf_counter()
    fill_input = build_valuefill_input(q.text, templated)
    try:
        fill_output = backends.value_filler.fill(fill_input)
        assignment = parse_value_output(fill_output)
        final = fill_values(templated, assignment)
        final = resolve_query(final, schema)  # re-checks literal types
    except Exception as e:
        trace.stages.append(StageTrace(stage="valuefill", inputs=[fill_input], outputs=[]))
        raise StageFailureError("value-filling", str(e), trace) from e
    trace.stages.append(
        StageTrace(
            stage="valuefill",
            inputs=[fill_input],
            outputs=[fill_output],
            elapsed=time.perf_counter() - t0,
        )
    )

    if config.ner_enabled:
        final = substitute_backward(final, mapping, restore=config.restore_mode)
    trace.final_sql = serialize(final, schema)
    return final, trace
