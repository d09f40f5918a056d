"""Builders, parsers, and file I/O for the four subtask record formats.

Record templates (one JSON object per line, UTF-8):

  table select   {"input": "question extra0 table_name", "label": 0|1}
  column select  {"input": "question extra0 table extra1 col_1 type_1 ...
                  extra1 col_n type_n", "labels": [...]}   B-C/B-N at each
                  column separator, O elsewhere, one label per input token
  sql generation {"input": "question extra50 extra54 table_1 extra51 extra0
                  col_1 ... extra50 extra(53+m) table_m ... extra53 question",
                  "output": templated SQL over identifier tokens}
  value filling  {"input": "question [SEP] templated-sql [SEP] question",
                  "output": "extra1 value_1 extra2 value_2 ..."}

The separator tokens extra0, extra1, extra50, extra51, extra53, extra54+ and
[SEP] are reserved; questions containing them are rejected.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import CoverageError, RecordFormatError, ReservedTokenError
from .schema import Question, Schema, tokenize
from .sqlast import (
    ColumnRef,
    SqlQuery,
    TemplatedSql,
    ValueAssignment,
    parse_sql,
    serialize,
    strip_values,
)

TABLE_SEP = "extra0"
COLUMN_SEP = "extra1"
GEN_TABLE_SEP = "extra50"
GEN_COLUMN_SEP = "extra51"
GEN_QUESTION_SEP = "extra53"
GEN_TABLE_ID_BASE = 53  # first table identifier is extra54
SEP = "[SEP]"

_RESERVED_RE = re.compile(r"(?:\bextra\d+\b|\[SEP\])")


def check_no_reserved(text: str, what: str = "question") -> None:
    m = _RESERVED_RE.search(text)
    if m:
        raise ReservedTokenError(f"{what} contains reserved token {m.group(0)!r}")


@dataclass(frozen=True)
class QuestionSqlPair:
    question: Question
    gold_sql: SqlQuery
    db_name: str


@dataclass(frozen=True)
class TableSelectRecord:
    input: str
    label: int


@dataclass(frozen=True)
class ColumnSelectRecord:
    input: str
    labels: tuple[str, ...]


@dataclass(frozen=True)
class SqlGenRecord:
    input: str
    output: str


@dataclass(frozen=True)
class ValueFillRecord:
    input: str
    output: str


# ---------------------------------------------------------------------------
# Gold membership
# ---------------------------------------------------------------------------


def gold_tables(q: SqlQuery) -> list[str]:
    """Tables the query touches, FROM first then JOINs, no duplicates."""
    seen = []
    for t in q.bound_tables():
        if t not in seen:
            seen.append(t)
    return seen


def gold_label_columns(q: SqlQuery, table: str) -> set[str]:
    """Columns of ``table`` appearing in select, where, or order."""
    cols = set()
    for item in q.select_items:
        if item.column.table == table:
            cols.add(item.column.column)
    for c in q.where_conjuncts:
        if c.column.table == table:
            cols.add(c.column.column)
    if q.order_by is not None and q.order_by.column.table == table:
        cols.add(q.order_by.column.column)
    return cols


def gold_column_refs(q: SqlQuery) -> list[tuple[str, str]]:
    """Every (table, column) the query references, join conditions included."""
    out = []
    for ref in q.column_refs():
        pair = (ref.table or "", ref.column)
        if pair not in out:
            out.append(pair)
    return out


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def build_table_input(question_text: str, table_name: str) -> str:
    check_no_reserved(question_text)
    return f"{question_text} {TABLE_SEP} {table_name}"


def build_table_records(pair: QuestionSqlPair, schema: Schema) -> list[TableSelectRecord]:
    """One record per schema table; label 1 iff the table is in the gold SQL."""
    mentioned = set(gold_tables(pair.gold_sql))
    return [
        TableSelectRecord(
            input=build_table_input(pair.question.text, t.name),
            label=1 if t.name in mentioned else 0,
        )
        for t in schema.tables
    ]


def build_column_input(question_text: str, schema: Schema, table: str) -> str:
    check_no_reserved(question_text)
    tbl = schema.table(table)
    if tbl is None:
        raise CoverageError(f"unknown table {table!r}")
    parts = [question_text, TABLE_SEP, table]
    for col in tbl.columns:
        parts.extend([COLUMN_SEP, col.name, col.ctype])
    return " ".join(parts)


def column_labels_for(input_text: str, hit_columns: set[str]) -> tuple[str, ...]:
    """One label per token: B-C/B-N at each column separator, O elsewhere."""
    _, _, columns = parse_column_input(input_text)
    toks = tokenize(input_text)
    labels = ["O"] * len(toks)
    sep_positions = [i for i, t in enumerate(toks) if t == COLUMN_SEP]
    if len(sep_positions) != len(columns):
        raise RecordFormatError("column separators do not align with column listing")
    for pos, (col, _ctype) in zip(sep_positions, columns):
        labels[pos] = "B-C" if col in hit_columns else "B-N"
    return tuple(labels)


def build_column_records(pair: QuestionSqlPair, schema: Schema) -> list[ColumnSelectRecord]:
    """One record per gold table, labelling its mentioned columns."""
    out = []
    for table in gold_tables(pair.gold_sql):
        input_text = build_column_input(pair.question.text, schema, table)
        hits = gold_label_columns(pair.gold_sql, table)
        out.append(ColumnSelectRecord(input=input_text, labels=column_labels_for(input_text, hits)))
    return out


def build_sqlgen_input(
    question_text: str, listing: list[tuple[str, list[str]]]
) -> tuple[str, dict[str, str], dict[tuple[str, str], str]]:
    """Serialize the table/column listing with identifier tokens.

    Returns (input string, table name -> token, (table, column) -> token).
    Column identifiers number globally across tables in listing order.
    """
    check_no_reserved(question_text)
    parts = [question_text]
    table_map: dict[str, str] = {}
    column_map: dict[tuple[str, str], str] = {}
    col_idx = 0
    for m, (table, columns) in enumerate(listing, start=1):
        token = f"extra{GEN_TABLE_ID_BASE + m}"
        table_map[table] = token
        parts.extend([GEN_TABLE_SEP, token, table])
        for col in columns:
            ctoken = f"extra{col_idx}"
            column_map[(table, col)] = ctoken
            parts.extend([GEN_COLUMN_SEP, ctoken, col])
            col_idx += 1
    parts.extend([GEN_QUESTION_SEP, question_text])
    return " ".join(parts), table_map, column_map


def rename_identifiers(
    q: SqlQuery, table_map: dict[str, str], column_map: dict[tuple[str, str], str]
) -> SqlQuery:
    """Rewrite table and column names through the identifier maps."""

    def tbl(name: str) -> str:
        if name not in table_map:
            raise CoverageError(f"table {name!r} is not among the chosen tables")
        return table_map[name]

    def ref(r: ColumnRef) -> ColumnRef:
        key = (r.table or "", r.column)
        if key not in column_map:
            raise CoverageError(f"column {r.table!r} @ {r.column!r} is not among the chosen columns")
        return ColumnRef(table=tbl(r.table), column=column_map[key])

    return replace(
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


def build_sqlgen_record(
    pair: QuestionSqlPair,
    schema: Schema,
    chosen_tables: list[str],
    chosen_columns: list[tuple[str, str]],
) -> SqlGenRecord:
    """Identifier-token input plus the gold templated SQL as output.

    ``chosen_tables`` and ``chosen_columns`` must cover every reference in
    the gold SQL (join conditions included).
    """
    for t, _ in chosen_columns:
        if t not in chosen_tables:
            raise CoverageError(f"column listed under unchosen table {t!r}")
    listing = [
        (t, [c for ct, c in chosen_columns if ct == t]) for t in chosen_tables
    ]
    input_text, table_map, column_map = build_sqlgen_input(pair.question.text, listing)
    templated, _ = strip_values(pair.gold_sql)
    renamed = rename_identifiers(templated.query, table_map, column_map)
    return SqlGenRecord(input=input_text, output=serialize(TemplatedSql(renamed)))


def build_valuefill_input(question_text: str, templated: TemplatedSql) -> str:
    check_no_reserved(question_text)
    return f"{question_text} {SEP} {serialize(templated)} {SEP} {question_text}"


def format_value_output(assignment: ValueAssignment) -> str:
    parts = []
    for idx, value in sorted(assignment.bindings):
        parts.append(f"extra{idx} {value}")
    return " ".join(parts)


def build_valuefill_record(
    pair: QuestionSqlPair, templated: TemplatedSql, gold_assignment: ValueAssignment
) -> ValueFillRecord:
    """Question-sandwiched templated SQL input; enumerated values as output."""
    wanted = set(templated.placeholder_indices())
    if wanted != gold_assignment.indices():
        raise CoverageError("assignment does not match the template's placeholders")
    return ValueFillRecord(
        input=build_valuefill_input(pair.question.text, templated),
        output=format_value_output(gold_assignment),
    )


# ---------------------------------------------------------------------------
# Record-input parsers (inference side and format validation)
# ---------------------------------------------------------------------------


def parse_table_input(text: str) -> tuple[str, str]:
    marker = f" {TABLE_SEP} "
    if text.count(marker) != 1:
        raise RecordFormatError("table-select input needs exactly one 'extra0' separator")
    question, table = text.split(marker)
    if not question or not table or " " in table:
        raise RecordFormatError("malformed table-select input")
    return question, table


def parse_column_input(text: str) -> tuple[str, str, list[tuple[str, str]]]:
    marker = f" {TABLE_SEP} "
    if marker not in text:
        raise RecordFormatError("column-select input needs an 'extra0' separator")
    question, rest = text.split(marker, 1)
    chunks = rest.split(f" {COLUMN_SEP} ")
    table = chunks[0]
    if not question or not table or " " in table:
        raise RecordFormatError("malformed column-select input")
    columns = []
    for chunk in chunks[1:]:
        fields = chunk.split(" ")
        if len(fields) != 2:
            raise RecordFormatError(f"malformed column entry {chunk!r}")
        columns.append((fields[0], fields[1]))
    if not columns:
        raise RecordFormatError("column-select input lists no columns")
    return question, table, columns


def parse_sqlgen_input(
    text: str,
) -> tuple[str, list[tuple[str, str, list[tuple[str, str]]]], str]:
    """Recover (question, [(table_token, table, [(col_token, col)])], trailing)."""
    head_marker = f" {GEN_TABLE_SEP} "
    if head_marker not in text:
        raise RecordFormatError("sql-generation input needs an 'extra50' separator")
    question, rest = text.split(head_marker, 1)
    tail_marker = f" {GEN_QUESTION_SEP} "
    if tail_marker not in rest:
        raise RecordFormatError("sql-generation input needs an 'extra53' question suffix")
    body, trailing = rest.rsplit(tail_marker, 1)
    tables = []
    for block in body.split(f" {GEN_TABLE_SEP} "):
        fields = block.split(" ")
        if len(fields) < 2 or not re.fullmatch(r"extra\d+", fields[0]):
            raise RecordFormatError(f"malformed table block {block!r}")
        table_token, table_name = fields[0], fields[1]
        cols = []
        pos = 2
        while pos < len(fields):
            if fields[pos] != GEN_COLUMN_SEP or pos + 2 >= len(fields) + 1:
                raise RecordFormatError(f"malformed column listing in block {block!r}")
            if pos + 2 > len(fields):
                raise RecordFormatError(f"truncated column entry in block {block!r}")
            ctoken, cname = fields[pos + 1], fields[pos + 2]
            if not re.fullmatch(r"extra\d+", ctoken):
                raise RecordFormatError(f"bad column identifier {ctoken!r}")
            cols.append((ctoken, cname))
            pos += 3
        tables.append((table_token, table_name, cols))
    if not tables:
        raise RecordFormatError("sql-generation input lists no tables")
    return question, tables, trailing


def parse_valuefill_input(text: str) -> tuple[str, str, str]:
    marker = f" {SEP} "
    parts = text.split(marker)
    if len(parts) != 3:
        raise RecordFormatError("value-filling input must be 'question [SEP] sql [SEP] question'")
    return parts[0], parts[1], parts[2]


_VALUE_HEAD_RE = re.compile(r"(?:(?<=^)|(?<= ))extra(\d+) ")


def parse_value_output(text: str) -> ValueAssignment:
    """Parse 'extra1 value_1 extra2 value_2 ...'; indices must run 1..k."""
    if text == "":
        return ValueAssignment(bindings=())
    heads = list(_VALUE_HEAD_RE.finditer(text))
    if not heads or heads[0].start() != 0:
        raise RecordFormatError("value output must start with 'extraN '")
    bindings: dict[int, str] = {}
    for i, m in enumerate(heads):
        idx = int(m.group(1))
        end = heads[i + 1].start() - 1 if i + 1 < len(heads) else len(text)
        value = text[m.end() : end]
        if not value:
            raise RecordFormatError(f"empty value for placeholder {idx}")
        if idx in bindings:
            raise RecordFormatError(f"duplicate placeholder index {idx}")
        bindings[idx] = value
    if sorted(bindings) != list(range(1, len(bindings) + 1)):
        raise RecordFormatError("placeholder indices must run 1..k in order")
    return ValueAssignment.from_dict(bindings)


# ---------------------------------------------------------------------------
# Format validation (machine-checkable template grammar per record type)
# ---------------------------------------------------------------------------


def validate_table_record(rec: TableSelectRecord) -> None:
    parse_table_input(rec.input)
    if rec.label not in (0, 1):
        raise RecordFormatError(f"label must be 0 or 1, got {rec.label!r}")


def validate_column_record(rec: ColumnSelectRecord) -> None:
    _, _, columns = parse_column_input(rec.input)
    toks = tokenize(rec.input)
    if len(rec.labels) != len(toks):
        raise RecordFormatError(
            f"{len(rec.labels)} labels for {len(toks)} tokens"
        )
    for tok, lab in zip(toks, rec.labels):
        if lab not in ("B-C", "B-N", "O"):
            raise RecordFormatError(f"unknown label {lab!r}")
        if lab != "O" and tok != COLUMN_SEP:
            raise RecordFormatError("non-O label off a column separator")
        if lab == "O" and tok == COLUMN_SEP:
            raise RecordFormatError("column separator left unlabelled")
    if sum(1 for lab in rec.labels if lab != "O") != len(columns):
        raise RecordFormatError("labelled separators do not match column count")


def validate_sqlgen_record(rec: SqlGenRecord) -> None:
    _, tables, _ = parse_sqlgen_input(rec.input)
    bound = {tok for tok, _, _ in tables}
    for _, _, cols in tables:
        bound.update(tok for tok, _ in cols)
    from .sqlast import parse_templated  # local import to avoid cycle at module load

    templated = parse_templated(rec.output)
    for name in templated.query.bound_tables():
        if name not in bound:
            raise RecordFormatError(f"output uses unbound identifier {name!r}")
    for ref in templated.query.column_refs():
        if ref.column not in bound:
            raise RecordFormatError(f"output uses unbound identifier {ref.column!r}")


def validate_valuefill_record(rec: ValueFillRecord) -> None:
    q1, sql_text, q2 = parse_valuefill_input(rec.input)
    if q1 != q2:
        raise RecordFormatError("input must start and end with the same question")
    from .sqlast import parse_templated

    templated = parse_templated(sql_text)
    assignment = parse_value_output(rec.output)
    if set(templated.placeholder_indices()) != assignment.indices():
        raise RecordFormatError("output indices do not match the template")


# ---------------------------------------------------------------------------
# Corpus and record file I/O (line-delimited JSON, UTF-8)
# ---------------------------------------------------------------------------


def read_corpus(path: str | Path, schema: Schema) -> list[QuestionSqlPair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise RecordFormatError(f"invalid JSON: {e.msg}", line=lineno) from e
            try:
                question = Question.from_text(str(obj["question"]))
                gold = parse_sql(str(obj["sql"]), schema)
                db_name = str(obj.get("db_name", schema.db_name))
            except KeyError as e:
                raise RecordFormatError(f"missing field {e.args[0]!r}", line=lineno) from e
            except Exception as e:
                raise RecordFormatError(str(e), line=lineno) from e
            pairs.append(QuestionSqlPair(question=question, gold_sql=gold, db_name=db_name))
    return pairs


def write_corpus(path: str | Path, pairs: list[QuestionSqlPair], schema: Schema) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            obj = {
                "question": p.question.text,
                "sql": serialize(p.gold_sql, schema),
                "db_name": p.db_name,
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def record_to_obj(rec) -> dict:
    if isinstance(rec, TableSelectRecord):
        return {"input": rec.input, "label": rec.label}
    if isinstance(rec, ColumnSelectRecord):
        return {"input": rec.input, "labels": list(rec.labels)}
    if isinstance(rec, (SqlGenRecord, ValueFillRecord)):
        return {"input": rec.input, "output": rec.output}
    raise TypeError(f"not a record: {type(rec).__name__}")


def write_records(path: str | Path, records: list) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_obj(rec), ensure_ascii=False) + "\n")


_RECORD_TYPES = {
    "table": TableSelectRecord,
    "column": ColumnSelectRecord,
    "sqlgen": SqlGenRecord,
    "valuefill": ValueFillRecord,
}


def read_records(path: str | Path, kind: str) -> list:
    if kind not in _RECORD_TYPES:
        raise ValueError(f"unknown record kind {kind!r}")
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise RecordFormatError(f"invalid JSON: {e.msg}", line=lineno) from e
            try:
                if kind == "table":
                    rec = TableSelectRecord(input=obj["input"], label=int(obj["label"]))
                elif kind == "column":
                    rec = ColumnSelectRecord(
                        input=obj["input"], labels=tuple(obj["labels"])
                    )
                else:
                    rec = _RECORD_TYPES[kind](input=obj["input"], output=obj["output"])
            except KeyError as e:
                raise RecordFormatError(f"missing field {e.args[0]!r}", line=lineno) from e
            out.append(rec)
    return out
