"""Submodel interface contracts shared by heuristic baselines and the bridge.

Four stages: table scoring, column tagging, templated-SQL generation, and
value filling.  Implementations declare ``concurrency`` as ``"concurrent"``
or ``"serial"``; the harness serializes calls to serial backends.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Protocol, runtime_checkable

from .errors import ContractViolationError, NoValidCandidatesError
from .records import parse_sqlgen_input
from .schema import Schema
from .sqlast import ColumnRef, SqlQuery, TemplatedSql, parse_templated, resolve_query


@dataclass(frozen=True)
class TableScore:
    table: str
    score: float


@dataclass(frozen=True)
class ColumnDecision:
    column: str
    hit: bool


@dataclass(frozen=True)
class ColumnTagging:
    decisions: tuple[ColumnDecision, ...]

    def hit_columns(self) -> list[str]:
        return [d.column for d in self.decisions if d.hit]


@dataclass(frozen=True)
class CandidateSql:
    output: str
    score: float


@runtime_checkable
class TableScorer(Protocol):
    concurrency: str

    def score(self, record_input: str) -> TableScore: ...


@runtime_checkable
class ColumnTagger(Protocol):
    concurrency: str

    def tag(self, record_input: str) -> ColumnTagging: ...


@runtime_checkable
class SqlGenerator(Protocol):
    concurrency: str

    def generate(self, record_input: str, beam_width: int) -> list[CandidateSql]: ...


@runtime_checkable
class ValueFiller(Protocol):
    concurrency: str

    def fill(self, record_input: str) -> str: ...


def check_table_score(score: TableScore, expected_table: str) -> TableScore:
    if not 0.0 <= score.score <= 1.0:
        raise ContractViolationError(f"table score {score.score} outside [0, 1]")
    if score.table != expected_table:
        raise ContractViolationError(
            f"scored table {score.table!r}, record names {expected_table!r}"
        )
    return score


def check_column_tagging(tagging: ColumnTagging, listed_columns: list[str]) -> ColumnTagging:
    got = [d.column for d in tagging.decisions]
    if got != list(listed_columns):
        raise ContractViolationError(
            f"tagger decisions {got} do not cover the listed columns {listed_columns}"
        )
    return tagging


def check_candidates(candidates: list[CandidateSql], beam_width: int) -> list[CandidateSql]:
    if len(candidates) > beam_width:
        raise ContractViolationError(
            f"{len(candidates)} candidates exceed beam width {beam_width}"
        )
    scores = [c.score for c in candidates]
    if scores != sorted(scores, reverse=True):
        raise ContractViolationError("candidates are not sorted by descending score")
    return candidates


def binding_maps(
    record_input: str,
) -> tuple[dict[str, str], dict[str, tuple[str, str]]]:
    """Identifier bindings of a sql-generation input.

    Returns (table token -> table name, column token -> (table name, column
    name)).
    """
    _, tables, _ = parse_sqlgen_input(record_input)
    table_map: dict[str, str] = {}
    column_map: dict[str, tuple[str, str]] = {}
    for ttoken, tname, cols in tables:
        if ttoken in table_map:
            raise ContractViolationError(f"duplicate table identifier {ttoken!r}")
        table_map[ttoken] = tname
        for ctoken, cname in cols:
            if ctoken in column_map or ctoken in table_map:
                raise ContractViolationError(f"duplicate identifier {ctoken!r}")
            column_map[ctoken] = (tname, cname)
    return table_map, column_map


def substitute_identifiers(
    templated: TemplatedSql,
    table_map: dict[str, str],
    column_map: dict[str, tuple[str, str]],
) -> TemplatedSql:
    """Replace identifier tokens with the real names they are bound to."""
    q = templated.query

    def tbl(token: str) -> str:
        if token not in table_map:
            raise KeyError(token)
        return table_map[token]

    def ref(r: ColumnRef) -> ColumnRef:
        if r.column not in column_map:
            raise KeyError(r.column)
        table, column = column_map[r.column]
        if r.table is not None and table_map.get(r.table) != table:
            raise KeyError(r.column)
        return ColumnRef(table=table, column=column)

    new = replace(
        q,
        select_items=tuple(replace(it, column=ref(it.column)) for it in q.select_items),
        from_table=tbl(q.from_table),
        joins=tuple(
            replace(j, table=tbl(j.table), left=ref(j.left), right=ref(j.right))
            for j in q.joins
        ),
        where_conjuncts=tuple(replace(c, column=ref(c.column)) for c in q.where_conjuncts),
        order_by=(
            None if q.order_by is None else replace(q.order_by, column=ref(q.order_by.column))
        ),
    )
    return TemplatedSql(query=new)


def resolve_candidate(
    candidate: CandidateSql, record_input: str, schema: Schema
) -> TemplatedSql | None:
    """Parse, substitute, and resolve a candidate; None when any step fails."""
    try:
        templated = parse_templated(candidate.output)
    except Exception:
        return None
    table_map, column_map = binding_maps(record_input)
    try:
        substituted = substitute_identifiers(templated, table_map, column_map)
    except KeyError:
        return None
    try:
        resolved: SqlQuery = resolve_query(substituted.query, schema)
    except Exception:
        return None
    return TemplatedSql(query=resolved)


def validity_filter(
    candidates: list[CandidateSql], record_input: str, schema: Schema
) -> list[CandidateSql]:
    """Drop candidates that fail the templated grammar, use identifiers not
    bound in the record input, or do not resolve against the schema after
    substitution.  Relative order is preserved; an all-invalid batch raises
    NoValidCandidatesError.
    """
    kept = [c for c in candidates if resolve_candidate(c, record_input, schema) is not None]
    if candidates and not kept:
        raise NoValidCandidatesError(rejected=candidates)
    return kept
