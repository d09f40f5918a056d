"""SQL subset AST: parser, serializer, value templating, canonical equality.

Supported shape: single-table SELECT with optional equi-joins, aggregates
(count/sum/avg/max/min), a WHERE conjunction of comparisons, optional
ORDER BY and LIMIT.  Value terms are literals or numbered placeholders;
a placeholder serializes as the quoted token 'extraN'.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from decimal import Decimal
from typing import Union

from .errors import BindingError, SqlSyntaxError, SqlTypeError, UnknownNameError
from .schema import Schema, is_decimal

AGGREGATES = ("none", "count", "sum", "avg", "max", "min")
OPERATORS = ("=", "!=", ">", "<", ">=", "<=")

_KEYWORDS = {
    "select", "from", "where", "and", "join", "on", "order", "by",
    "asc", "desc", "limit", "count", "sum", "avg", "max", "min",
}

_PLACEHOLDER_RE = re.compile(r"extra([1-9][0-9]*)\Z")


@dataclass(frozen=True)
class ColumnRef:
    table: str | None
    column: str


@dataclass(frozen=True)
class SelectItem:
    aggregate: str
    column: ColumnRef


@dataclass(frozen=True)
class Join:
    table: str
    left: ColumnRef
    right: ColumnRef


@dataclass(frozen=True)
class Literal:
    value: str


@dataclass(frozen=True)
class Placeholder:
    index: int


ValueTerm = Union[Literal, Placeholder]


@dataclass(frozen=True)
class Condition:
    column: ColumnRef
    op: str
    value: ValueTerm


@dataclass(frozen=True)
class OrderBy:
    column: ColumnRef
    direction: str  # "asc" | "desc"


@dataclass(frozen=True)
class SqlQuery:
    select_items: tuple[SelectItem, ...]
    from_table: str
    joins: tuple[Join, ...] = ()
    where_conjuncts: tuple[Condition, ...] = ()
    order_by: OrderBy | None = None
    limit: int | None = None

    def bound_tables(self) -> list[str]:
        return [self.from_table] + [j.table for j in self.joins]

    def column_refs(self) -> list[ColumnRef]:
        refs = [item.column for item in self.select_items]
        for j in self.joins:
            refs.extend((j.left, j.right))
        refs.extend(c.column for c in self.where_conjuncts)
        if self.order_by is not None:
            refs.append(self.order_by.column)
        return refs


@dataclass(frozen=True)
class TemplatedSql:
    """A query whose value terms are all placeholders (no literals)."""

    query: SqlQuery

    def placeholder_indices(self) -> list[int]:
        out = []
        for c in self.query.where_conjuncts:
            if isinstance(c.value, Placeholder):
                out.append(c.value.index)
        return out


@dataclass(frozen=True, eq=True)
class ValueAssignment:
    """Map from placeholder index to literal string."""

    bindings: tuple[tuple[int, str], ...]

    @classmethod
    def from_dict(cls, d: dict[int, str]) -> "ValueAssignment":
        return cls(bindings=tuple(sorted(d.items())))

    def as_dict(self) -> dict[int, str]:
        return dict(self.bindings)

    def indices(self) -> set[int]:
        return {i for i, _ in self.bindings}


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_TOKEN_SPEC = [
    ("ws", r"\s+"),
    ("number", r"-?(?:\d+\.?\d*|\.\d+)"),
    ("ident", r"[A-Za-z_][A-Za-z0-9_]*"),
    ("string", r"'(?:[^']|'')*'"),
    ("symbol", r">=|<=|!=|[@(),=><]"),
]
_LEX_RE = re.compile("|".join(f"(?P<{n}>{p})" for n, p in _TOKEN_SPEC))


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    pos: int


def _lex(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _LEX_RE.match(text, pos)
        if m is None:
            raise SqlSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup or ""
        if kind != "ws":
            toks.append(_Tok(kind, m.group(0), pos))
        pos = m.end()
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _lex(text)
        self.i = 0

    def _peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def _next(self) -> _Tok:
        tok = self._peek()
        if tok is None:
            raise SqlSyntaxError("unexpected end of input", len(self.text))
        self.i += 1
        return tok

    def _at_keyword(self, word: str) -> bool:
        tok = self._peek()
        return tok is not None and tok.kind == "ident" and tok.text.casefold() == word

    def _expect_keyword(self, word: str) -> None:
        tok = self._next()
        if tok.kind != "ident" or tok.text.casefold() != word:
            raise SqlSyntaxError(f"expected {word!r}, found {tok.text!r}", tok.pos)

    def _expect_symbol(self, sym: str) -> None:
        tok = self._next()
        if tok.kind != "symbol" or tok.text != sym:
            raise SqlSyntaxError(f"expected {sym!r}, found {tok.text!r}", tok.pos)

    def _ident(self) -> str:
        tok = self._next()
        if tok.kind != "ident":
            raise SqlSyntaxError(f"expected identifier, found {tok.text!r}", tok.pos)
        if tok.text.casefold() in _KEYWORDS:
            raise SqlSyntaxError(f"keyword {tok.text!r} used as identifier", tok.pos)
        return tok.text

    def parse_query(self) -> SqlQuery:
        self._expect_keyword("select")
        items = [self._select_item()]
        while self._peek() is not None and self._peek().text == ",":
            self._next()
            items.append(self._select_item())
        self._expect_keyword("from")
        from_table = self._ident()
        joins = []
        while self._at_keyword("join"):
            self._next()
            jt = self._ident()
            self._expect_keyword("on")
            left = self._column_ref()
            self._expect_symbol("=")
            right = self._column_ref()
            joins.append(Join(table=jt, left=left, right=right))
        conjuncts = []
        if self._at_keyword("where"):
            self._next()
            conjuncts.append(self._condition())
            while self._at_keyword("and"):
                self._next()
                conjuncts.append(self._condition())
        order_by = None
        if self._at_keyword("order"):
            self._next()
            self._expect_keyword("by")
            col = self._column_ref()
            direction = "asc"
            if self._at_keyword("asc") or self._at_keyword("desc"):
                direction = self._next().text.casefold()
            order_by = OrderBy(column=col, direction=direction)
        limit = None
        if self._at_keyword("limit"):
            tok = self._next()
            num = self._next()
            if num.kind != "number" or not re.fullmatch(r"\d+", num.text) or int(num.text) < 1:
                raise SqlSyntaxError("limit must be a positive integer", num.pos)
            limit = int(num.text)
            del tok
        trailing = self._peek()
        if trailing is not None:
            raise SqlSyntaxError(f"unexpected token {trailing.text!r}", trailing.pos)
        return SqlQuery(
            select_items=tuple(items),
            from_table=from_table,
            joins=tuple(joins),
            where_conjuncts=tuple(conjuncts),
            order_by=order_by,
            limit=limit,
        )

    def _select_item(self) -> SelectItem:
        tok = self._peek()
        if tok is not None and tok.kind == "ident" and tok.text.casefold() in AGGREGATES[1:]:
            nxt = self.toks[self.i + 1] if self.i + 1 < len(self.toks) else None
            if nxt is not None and nxt.text == "(":
                agg = self._next().text.casefold()
                self._expect_symbol("(")
                col = self._column_ref()
                self._expect_symbol(")")
                return SelectItem(aggregate=agg, column=col)
        return SelectItem(aggregate="none", column=self._column_ref())

    def _column_ref(self) -> ColumnRef:
        first = self._ident()
        tok = self._peek()
        if tok is not None and tok.text == "@":
            self._next()
            second = self._ident()
            return ColumnRef(table=first, column=second)
        return ColumnRef(table=None, column=first)

    def _condition(self) -> Condition:
        col = self._column_ref()
        tok = self._next()
        if tok.kind != "symbol" or tok.text not in OPERATORS:
            raise SqlSyntaxError(f"expected comparison operator, found {tok.text!r}", tok.pos)
        op = tok.text
        val = self._value_term()
        return Condition(column=col, op=op, value=val)

    def _value_term(self) -> ValueTerm:
        tok = self._next()
        if tok.kind == "number":
            return Literal(tok.text)
        if tok.kind == "string":
            content = tok.text[1:-1].replace("''", "'")
            m = _PLACEHOLDER_RE.fullmatch(content)
            if m:
                return Placeholder(int(m.group(1)))
            return Literal(content)
        raise SqlSyntaxError(f"expected a value, found {tok.text!r}", tok.pos)


def parse_raw(text: str) -> SqlQuery:
    """Parse without schema resolution; column tables stay as written."""
    return _Parser(text).parse_query()


def resolve_query(q: SqlQuery, schema: Schema) -> SqlQuery:
    """Bind every column reference to its table and check types.

    Plain references resolve against the query's bound tables; a name owned
    by several bound tables is rejected as ambiguous.
    """
    bound = q.bound_tables()
    for t in bound:
        if schema.table(t) is None:
            raise UnknownNameError(f"unknown table {t!r}")
    if len(set(bound)) != len(bound):
        raise UnknownNameError("a table is bound more than once")

    def bind(ref: ColumnRef) -> ColumnRef:
        if ref.table is not None:
            if ref.table not in bound:
                raise UnknownNameError(f"table {ref.table!r} is not part of this query")
            if schema.column(ref.table, ref.column) is None:
                raise UnknownNameError(f"unknown column {ref.table!r} @ {ref.column!r}")
            return ref
        owners = [t for t in bound if schema.column(t, ref.column) is not None]
        if not owners:
            raise UnknownNameError(f"unknown column {ref.column!r}")
        if len(owners) > 1:
            raise UnknownNameError(
                f"column {ref.column!r} is ambiguous across tables {owners}"
            )
        return ColumnRef(table=owners[0], column=ref.column)

    items = tuple(replace(it, column=bind(it.column)) for it in q.select_items)
    joins = tuple(replace(j, left=bind(j.left), right=bind(j.right)) for j in q.joins)
    conjuncts = []
    for c in q.where_conjuncts:
        ref = bind(c.column)
        col = schema.column(ref.table, ref.column)
        if isinstance(c.value, Literal) and col.ctype == "number":
            if not is_decimal(c.value.value):
                raise SqlTypeError(
                    f"non-numeric literal {c.value.value!r} compared to "
                    f"number column {ref.column!r}"
                )
        conjuncts.append(replace(c, column=ref))
    order_by = None
    if q.order_by is not None:
        order_by = replace(q.order_by, column=bind(q.order_by.column))
    return replace(
        q,
        select_items=items,
        joins=joins,
        where_conjuncts=tuple(conjuncts),
        order_by=order_by,
    )


def parse_sql(text: str, schema: Schema) -> SqlQuery:
    """Parse SQL text and resolve all names against ``schema``."""
    return resolve_query(parse_raw(text), schema)


def parse_templated(text: str) -> TemplatedSql:
    """Parse templated SQL (identifier tokens allowed, no schema binding)."""
    q = parse_raw(text)
    for c in q.where_conjuncts:
        if not isinstance(c.value, Placeholder):
            raise SqlSyntaxError("templated SQL must use only 'extraN' values", 0)
    return TemplatedSql(query=q)


# ---------------------------------------------------------------------------
# Serializer
# ---------------------------------------------------------------------------


def _quote(text: str) -> str:
    return "'" + text.replace("'", "''") + "'"


def _render_value(v: ValueTerm, number_column: bool) -> str:
    if isinstance(v, Placeholder):
        return f"'extra{v.index}'"
    if number_column and is_decimal(v.value):
        return v.value
    return _quote(v.value)


def _render_ref(ref: ColumnRef, qualify: bool) -> str:
    if qualify and ref.table is not None:
        return f"{ref.table} @ {ref.column}"
    return ref.column


def serialize(q: SqlQuery | TemplatedSql, schema: Schema | None = None) -> str:
    """Render a query to text; ``parse`` of the result reproduces the AST.

    Templated queries render in the qualified ``table @ column`` form; plain
    queries use bare column names unless a join makes qualification
    necessary.  ``schema`` is consulted only to decide whether a literal on
    a number column may render unquoted.
    """
    templated = isinstance(q, TemplatedSql)
    query = q.query if templated else q
    qualify = templated or bool(query.joins)

    def is_number_col(ref: ColumnRef) -> bool:
        if schema is None or ref.table is None:
            return False
        col = schema.column(ref.table, ref.column)
        return col is not None and col.ctype == "number"

    parts = ["select "]
    rendered = []
    for item in query.select_items:
        ref = _render_ref(item.column, qualify)
        rendered.append(ref if item.aggregate == "none" else f"{item.aggregate}({ref})")
    parts.append(", ".join(rendered))
    parts.append(f" from {query.from_table}")
    for j in query.joins:
        parts.append(
            f" join {j.table} on {_render_ref(j.left, True)} = {_render_ref(j.right, True)}"
        )
    if query.where_conjuncts:
        conds = []
        for c in query.where_conjuncts:
            val = _render_value(c.value, is_number_col(c.column))
            conds.append(f"{_render_ref(c.column, qualify)} {c.op} {val}")
        parts.append(" where " + " and ".join(conds))
    if query.order_by is not None:
        parts.append(
            f" order by {_render_ref(query.order_by.column, qualify)} "
            f"{query.order_by.direction}"
        )
    if query.limit is not None:
        parts.append(f" limit {query.limit}")
    return "".join(parts)


# ---------------------------------------------------------------------------
# Value templating
# ---------------------------------------------------------------------------


def strip_values(q: SqlQuery) -> tuple[TemplatedSql, ValueAssignment]:
    """Replace literals with placeholders numbered 1..k in conjunct order."""
    bindings: dict[int, str] = {}
    conjuncts = []
    k = 0
    for c in q.where_conjuncts:
        if isinstance(c.value, Placeholder):
            raise BindingError("query already contains placeholders")
        k += 1
        bindings[k] = c.value.value
        conjuncts.append(replace(c, value=Placeholder(k)))
    templated = TemplatedSql(query=replace(q, where_conjuncts=tuple(conjuncts)))
    return templated, ValueAssignment.from_dict(bindings)


def fill_values(t: TemplatedSql, a: ValueAssignment) -> SqlQuery:
    """Substitute every placeholder with its bound literal (inverse of strip)."""
    wanted = set(t.placeholder_indices())
    got = a.indices()
    missing = wanted - got
    extra = got - wanted
    if missing:
        raise BindingError(f"missing binding for placeholder(s) {sorted(missing)}")
    if extra:
        raise BindingError(f"binding(s) {sorted(extra)} have no placeholder")
    values = a.as_dict()
    conjuncts = []
    for c in t.query.where_conjuncts:
        if isinstance(c.value, Placeholder):
            conjuncts.append(replace(c, value=Literal(values[c.value.index])))
        else:
            conjuncts.append(c)
    return replace(t.query, where_conjuncts=tuple(conjuncts))


# ---------------------------------------------------------------------------
# Canonical form and logic-form equality
# ---------------------------------------------------------------------------


def canonical_number(text: str) -> str:
    """Canonical decimal rendering: '100.0' -> '100', '0.500' -> '0.5'."""
    d = Decimal(text)
    if d == 0:
        return "0"
    if d == d.to_integral_value():
        d = d.quantize(Decimal(1))
    else:
        d = d.normalize()
    return format(d, "f")


def _value_sort_key(v: ValueTerm) -> tuple[str, str]:
    if isinstance(v, Placeholder):
        return ("p", f"{v.index:09d}")
    return ("l", v.value)


def canonicalize(q: SqlQuery, schema: Schema | None = None) -> SqlQuery:
    """Order-insensitive canonical form.

    Select items and WHERE conjuncts sort into a fixed order; joins sort by
    joined table name; ORDER BY and LIMIT are preserved as written.  With a
    schema, literals on number columns normalize numerically so that 100
    and 100.0 share one canonical form.  Idempotent.
    """

    def is_number_col(ref: ColumnRef) -> bool:
        if schema is None or ref.table is None:
            return False
        col = schema.column(ref.table, ref.column)
        return col is not None and col.ctype == "number"

    conjuncts = []
    for c in q.where_conjuncts:
        if isinstance(c.value, Literal) and is_number_col(c.column) and is_decimal(c.value.value):
            c = replace(c, value=Literal(canonical_number(c.value.value)))
        conjuncts.append(c)
    items = tuple(
        sorted(
            q.select_items,
            key=lambda it: (
                AGGREGATES.index(it.aggregate),
                it.column.table or "",
                it.column.column,
            ),
        )
    )
    conjuncts = tuple(
        sorted(
            conjuncts,
            key=lambda c: (
                c.column.table or "",
                c.column.column,
                OPERATORS.index(c.op),
                _value_sort_key(c.value),
            ),
        )
    )
    joins = tuple(sorted(q.joins, key=lambda j: j.table))
    return replace(q, select_items=items, where_conjuncts=conjuncts, joins=joins)


def logic_form_equal(pred: SqlQuery, gold: SqlQuery, schema: Schema | None = None) -> bool:
    """True iff the two queries have identical canonical forms.

    Literal comparison is case-sensitive for text and numeric for number
    columns (so 100 equals 100.0 on a number column).
    """
    return canonicalize(pred, schema) == canonicalize(gold, schema)
