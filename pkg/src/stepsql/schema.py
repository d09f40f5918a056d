"""Database schema and content: tables, typed columns, observed cell values.

The schema file is one JSON document per database with fields ``db_name``,
``tables[]``, each table carrying ``name`` and ``columns[]`` of
``{name, type, values[]}``; an optional per-table ``rows[]`` feeds the toy
row store used by the evaluation harness.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .errors import SchemaError
from .matching import edit_distance

COLUMN_TYPES = ("text", "number", "time")

_TOKEN_RE = re.compile(r"[A-Za-z0-9_]+|[^\sA-Za-z0-9_]")


@dataclass(frozen=True)
class Column:
    name: str
    ctype: str
    values: tuple[str, ...] = ()


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[Column, ...]

    def column(self, name: str) -> Column | None:
        for c in self.columns:
            if c.name == name:
                return c
        return None

    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]


@dataclass(frozen=True)
class Schema:
    db_name: str
    tables: tuple[Table, ...]
    rows: dict[str, tuple[tuple[str, ...], ...]] = field(default_factory=dict, compare=False)

    def table(self, name: str) -> Table | None:
        for t in self.tables:
            if t.name == name:
                return t
        return None

    def table_names(self) -> list[str]:
        return [t.name for t in self.tables]

    def column(self, table: str, column: str) -> Column | None:
        t = self.table(table)
        return t.column(column) if t else None


def is_decimal(text: str) -> bool:
    try:
        Decimal(text)
    except InvalidOperation:
        return False
    return True


def validate_schema(schema: Schema) -> None:
    """Check all schema invariants; raise SchemaError with a field locus."""
    if not schema.tables:
        raise SchemaError("schema has no tables", locus="tables")
    seen_tables: set[str] = set()
    for i, table in enumerate(schema.tables):
        if not table.name:
            raise SchemaError("empty table name", locus=f"tables[{i}].name")
        if table.name in seen_tables:
            raise SchemaError(f"duplicate table name {table.name!r}", locus=f"tables[{i}].name")
        seen_tables.add(table.name)
        if not table.columns:
            raise SchemaError(f"table {table.name!r} has no columns", locus=f"tables[{i}].columns")
        seen_cols: set[str] = set()
        for j, col in enumerate(table.columns):
            locus = f"tables[{i}].columns[{j}]"
            if not col.name:
                raise SchemaError("empty column name", locus=f"{locus}.name")
            if col.name in seen_cols:
                raise SchemaError(
                    f"duplicate column name {col.name!r} in table {table.name!r}",
                    locus=f"{locus}.name",
                )
            seen_cols.add(col.name)
            if col.ctype not in COLUMN_TYPES:
                raise SchemaError(f"unknown column type {col.ctype!r}", locus=f"{locus}.type")
            if col.ctype == "number":
                for k, v in enumerate(col.values):
                    if not is_decimal(v):
                        raise SchemaError(
                            f"non-numeric value {v!r} in number column {col.name!r}",
                            locus=f"{locus}.values[{k}]",
                        )
    for tname, rows in schema.rows.items():
        table = schema.table(tname)
        if table is None:
            raise SchemaError(f"rows for unknown table {tname!r}", locus=f"rows.{tname}")
        width = len(table.columns)
        for r, row in enumerate(rows):
            if len(row) != width:
                raise SchemaError(
                    f"row has {len(row)} cells, table {tname!r} has {width} columns",
                    locus=f"rows.{tname}[{r}]",
                )
            for c, cell in enumerate(row):
                if table.columns[c].ctype == "number" and not is_decimal(cell):
                    raise SchemaError(
                        f"non-numeric cell {cell!r} in number column",
                        locus=f"rows.{tname}[{r}][{c}]",
                    )


def schema_from_dict(doc: dict) -> Schema:
    if not isinstance(doc, dict):
        raise SchemaError("schema document must be an object")
    tables = []
    for i, t in enumerate(doc.get("tables", [])):
        cols = []
        for j, c in enumerate(t.get("columns", [])):
            if "name" not in c:
                raise SchemaError("column missing name", locus=f"tables[{i}].columns[{j}].name")
            cols.append(
                Column(
                    name=str(c["name"]),
                    ctype=str(c.get("type", "text")),
                    values=tuple(str(v) for v in c.get("values", [])),
                )
            )
        if "name" not in t:
            raise SchemaError("table missing name", locus=f"tables[{i}].name")
        tables.append(Table(name=str(t["name"]), columns=tuple(cols)))
    rows = {}
    for i, t in enumerate(doc.get("tables", [])):
        if "rows" in t:
            rows[str(t["name"])] = tuple(tuple(str(c) for c in row) for row in t["rows"])
    schema = Schema(db_name=str(doc.get("db_name", "")), tables=tuple(tables), rows=rows)
    validate_schema(schema)
    return schema


def load_schema(path: str | Path) -> Schema:
    """Load and validate a schema file."""
    raw = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e.msg}", locus=f"line {e.lineno}") from e
    return schema_from_dict(doc)


def schema_to_dict(schema: Schema) -> dict:
    doc: dict = {"db_name": schema.db_name, "tables": []}
    for t in schema.tables:
        entry: dict = {
            "name": t.name,
            "columns": [
                {"name": c.name, "type": c.ctype, "values": list(c.values)} for c in t.columns
            ],
        }
        if t.name in schema.rows:
            entry["rows"] = [list(r) for r in schema.rows[t.name]]
        doc["tables"].append(entry)
    return doc


def save_schema(schema: Schema, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(schema_to_dict(schema), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )


def find_value(
    schema: Schema, span: str, max_distance: int
) -> list[tuple[str, str, str, int]]:
    """All cell values within ``max_distance`` edits of ``span``.

    Distance is Levenshtein over case-folded characters.  Results are sorted
    ascending by distance, then by schema (table, column, value) order, and
    exact matches come back with distance 0.
    """
    if not span:
        raise ValueError("span must be non-empty")
    if max_distance < 0:
        raise ValueError("max_distance must be non-negative")
    folded = span.casefold()
    hits: list[tuple[int, int, int, int, str, str, str]] = []
    for ti, table in enumerate(schema.tables):
        for ci, col in enumerate(table.columns):
            for vi, value in enumerate(col.values):
                d = edit_distance(folded, value.casefold(), limit=max_distance)
                if d <= max_distance:
                    hits.append((d, ti, ci, vi, table.name, col.name, value))
    hits.sort(key=lambda h: h[:4])
    return [(t, c, v, d) for d, _, _, _, t, c, v in hits]


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int


def tokenize_with_offsets(text: str) -> list[Token]:
    """Deterministic, lossless segmentation.

    Word characters (letters, digits, underscore) group into tokens; every
    other non-space character is a single-character token.  Offsets index
    into the original text, so the original spacing is recoverable.
    """
    return [Token(m.group(0), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def tokenize(text: str) -> list[str]:
    return [t.text for t in tokenize_with_offsets(text)]


def join_tokens(tokens: list[str]) -> str:
    """Single-space join; tokenize(join_tokens(tokenize(x))) == tokenize(x)."""
    return " ".join(tokens)


@dataclass(frozen=True)
class Question:
    """A natural-language question with its derived token segmentation."""

    text: str
    tokens: tuple[Token, ...]

    @classmethod
    def from_text(cls, text: str) -> "Question":
        return cls(text=text, tokens=tuple(tokenize_with_offsets(text)))

    def token_texts(self) -> list[str]:
        return [t.text for t in self.tokens]

    def reconstruct(self) -> str:
        """Rebuild the text from token offsets (identity check)."""
        out = []
        pos = 0
        for tok in self.tokens:
            out.append(self.text[pos : tok.start])
            out.append(tok.text)
            pos = tok.end
        out.append(self.text[pos:])
        return "".join(out)
