"""Deterministic heuristic implementations of the four submodel contracts.

These run the whole pipeline with no learned components.  The aggregate and
operator vocabulary lives in a trigger-word table (``data/triggers_en.tsv``,
line-delimited ``phrase TAB role``) so corpora in other languages can supply
their own; the stopword list is a data file for the same reason.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import NoTemplateApplicableError, UnfillablePlaceholderError
from .records import (
    parse_column_input,
    parse_sqlgen_input,
    parse_table_input,
    parse_valuefill_input,
)
from .schema import Question, Schema, tokenize
from .sqlast import (
    ColumnRef,
    Condition,
    Placeholder,
    SelectItem,
    SqlQuery,
    TemplatedSql,
    parse_templated,
    serialize,
)
from .contracts import CandidateSql, ColumnDecision, ColumnTagging, TableScore
from .matching import guarded_distance

_WORD_RE = re.compile(r"[A-Za-z0-9_]+\Z")
_NUMERAL_RE = re.compile(r"-?(?:\d+\.?\d*|\.\d+)\Z")

DEFAULT_COLUMN_FUZZY_DISTANCE = 1
DEFAULT_VALUE_FUZZY_DISTANCE = 2
MAX_SPAN_TOKENS = 3


def _data_text(name: str) -> str:
    return resources.files("stepsql.data").joinpath(name).read_text(encoding="utf-8")


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    text = Path(path).read_text(encoding="utf-8") if path else _data_text("stopwords_en.txt")
    words = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.casefold())
    return frozenset(words)


def load_triggers(path: str | Path | None = None) -> list[tuple[tuple[str, ...], str]]:
    """Trigger table entries as (phrase tokens, role); longest phrases first."""
    text = Path(path).read_text(encoding="utf-8") if path else _data_text("triggers_en.tsv")
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        if "\t" not in line:
            raise ValueError(f"triggers line {lineno}: expected 'phrase TAB role'")
        phrase, role = line.split("\t", 1)
        entries.append((tuple(tokenize(phrase.casefold())), role.strip()))
    entries.sort(key=lambda e: -len(e[0]))
    return entries


def find_triggers(
    question_tokens: list[str], triggers: list[tuple[tuple[str, ...], str]]
) -> list[tuple[int, int, str]]:
    """Occurrences as (start, end, role); longest match wins per position."""
    toks = [t.casefold() for t in question_tokens]
    hits = []
    taken = [False] * len(toks)
    for phrase, role in triggers:
        width = len(phrase)
        for start in range(0, len(toks) - width + 1):
            if any(taken[start : start + width]):
                continue
            if tuple(toks[start : start + width]) == phrase:
                hits.append((start, start + width, role))
                for i in range(start, start + width):
                    taken[i] = True
    hits.sort()
    return hits


def question_spans(
    question: Question,
    max_tokens: int = MAX_SPAN_TOKENS,
    stopwords: frozenset[str] | None = None,
):
    """Token n-gram spans as (text, start_char, end_char), longest first.

    With ``stopwords`` given, spans made purely of stopwords (or containing
    punctuation tokens) are skipped; those never name database values.
    """
    toks = question.tokens
    for width in range(min(max_tokens, len(toks)), 0, -1):
        for i in range(0, len(toks) - width + 1):
            window = toks[i : i + width]
            if stopwords is not None:
                words = [t.text for t in window if _WORD_RE.fullmatch(t.text)]
                if len(words) != len(window):
                    continue
                if all(w.casefold() in stopwords for w in words):
                    continue
            start = window[0].start
            end = window[-1].end
            yield question.text[start:end], start, end


def span_value_match(
    question: Question,
    values: tuple[str, ...],
    max_distance: int,
    stopwords: frozenset[str],
) -> tuple[int, int, str] | None:
    """Closest guarded match of any question span against ``values`` as
    (distance, start, span); None when nothing matches."""
    best: tuple[int, int, str] | None = None
    for span, start, _ in question_spans(question, stopwords=stopwords):
        for value in values:
            d = guarded_distance(span, value, max_distance)
            if d is None:
                continue
            key = (d, start, span)
            if best is None or key < best:
                best = key
    return best


class LexicalIndex:
    """Per-table bag of name, column, and cell-value tokens (lowercased)."""

    def __init__(self, schema: Schema):
        self.tokens_by_table: dict[str, frozenset[str]] = {}
        for table in schema.tables:
            toks = set(t.casefold() for t in tokenize(table.name))
            for col in table.columns:
                toks.update(t.casefold() for t in tokenize(col.name))
                for value in col.values:
                    toks.update(t.casefold() for t in tokenize(value))
            self.tokens_by_table[table.name] = frozenset(toks)


def content_tokens(question_text: str, stopwords: frozenset[str]) -> set[str]:
    return {
        t.casefold()
        for t in tokenize(question_text)
        if _WORD_RE.fullmatch(t) and t.casefold() not in stopwords
    }


class BaselineTableScorer:
    """Token-overlap scorer: |question ∩ table index| / |content tokens|."""

    concurrency = "concurrent"

    def __init__(self, schema: Schema, stopwords: frozenset[str] | None = None):
        self.index = LexicalIndex(schema)
        self.stopwords = stopwords if stopwords is not None else load_stopwords()

    def score(self, record_input: str) -> TableScore:
        question, table = parse_table_input(record_input)
        content = content_tokens(question, self.stopwords)
        if not content:
            return TableScore(table=table, score=0.0)
        index = self.index.tokens_by_table.get(table, frozenset())
        overlap = len(content & index)
        return TableScore(table=table, score=min(1.0, overlap / len(content)))


class BaselineColumnTagger:
    """A column hits when its name appears in the question or one of its
    cell values fuzzy-matches a question span within the distance bound."""

    concurrency = "concurrent"

    def __init__(
        self,
        schema: Schema,
        fuzzy_distance: int = DEFAULT_COLUMN_FUZZY_DISTANCE,
        stopwords: frozenset[str] | None = None,
    ):
        self.schema = schema
        self.fuzzy_distance = fuzzy_distance
        self.stopwords = stopwords if stopwords is not None else load_stopwords()

    def tag(self, record_input: str) -> ColumnTagging:
        question_text, table, columns = parse_column_input(record_input)
        question = Question.from_text(question_text)
        qtokens = {t.casefold() for t in question.token_texts()}
        decisions = []
        for name, _ctype in columns:
            hit = name.casefold() in qtokens
            if not hit:
                col = self.schema.column(table, name)
                if col is not None and col.values:
                    hit = (
                        span_value_match(
                            question, col.values, self.fuzzy_distance, self.stopwords
                        )
                        is not None
                    )
            decisions.append(ColumnDecision(column=name, hit=hit))
        return ColumnTagging(decisions=tuple(decisions))


@dataclass(frozen=True)
class _ColumnInfo:
    token: str
    name: str
    ctype: str
    name_hit: bool
    value_hit: bool
    bound_op: str | None  # comparison operator bound by a trigger phrase


class BaselineSqlGenerator:
    """Enumerates templated single-table SELECTs over the bound identifiers.

    Template family: select the name-mentioned columns, add a WHERE conjunct
    per value-matched column, apply the triggered aggregate, map operator
    trigger phrases onto the number column they follow.  Candidates are
    scored by how many of the question's trigger/value signals they honor.
    """

    concurrency = "concurrent"

    def __init__(
        self,
        schema: Schema,
        triggers: list[tuple[tuple[str, ...], str]] | None = None,
        value_distance: int = DEFAULT_VALUE_FUZZY_DISTANCE,
        stopwords: frozenset[str] | None = None,
    ):
        self.schema = schema
        self.triggers = triggers if triggers is not None else load_triggers()
        self.value_distance = value_distance
        self.stopwords = stopwords if stopwords is not None else load_stopwords()

    def _classify_columns(
        self,
        question: Question,
        table_name: str,
        cols: list[tuple[str, str]],
        op_hits: list[tuple[int, int, str]],
    ) -> list[_ColumnInfo]:
        qtokens = [t.casefold() for t in question.token_texts()]
        qset = set(qtokens)
        infos = []
        for token, name in cols:
            col = self.schema.column(table_name, name)
            ctype = col.ctype if col is not None else "text"
            name_hit = name.casefold() in qset
            value_hit = False
            if col is not None and col.values:
                value_hit = (
                    span_value_match(question, col.values, self.value_distance, self.stopwords)
                    is not None
                )
            bound_op = None
            if ctype == "number" and name_hit:
                positions = [i for i, t in enumerate(qtokens) if t == name.casefold()]
                for start, _end, role in op_hits:
                    if role.startswith("op:") and any(0 <= start - p <= 2 for p in positions):
                        bound_op = role.split(":", 1)[1]
                        break
            infos.append(
                _ColumnInfo(
                    token=token,
                    name=name,
                    ctype=ctype,
                    name_hit=name_hit,
                    value_hit=value_hit,
                    bound_op=bound_op,
                )
            )
        return infos

    def generate(self, record_input: str, beam_width: int) -> list[CandidateSql]:
        if beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        question_text, tables, _ = parse_sqlgen_input(record_input)
        question = Question.from_text(question_text)
        if not tables:
            raise NoTemplateApplicableError("no table bound in the input")
        table_token, table_name, cols = tables[0]
        if not cols:
            raise NoTemplateApplicableError("no columns bound in the input")

        trigger_hits = find_triggers(question.token_texts(), self.triggers)
        agg_roles = [r.split(":", 1)[1] for _, _, r in trigger_hits if r.startswith("agg:")]
        aggregate = agg_roles[0] if agg_roles else None
        op_hits = [h for h in trigger_hits if h[2].startswith("op:")]

        infos = self._classify_columns(question, table_name, cols, op_hits)
        where_cols = [c for c in infos if (c.value_hit and c.bound_op is None) or c.bound_op]
        where_set = {c.token for c in where_cols}
        select_cols = [c for c in infos if c.name_hit and c.token not in where_set]
        if not select_cols:
            select_cols = [c for c in infos if c.name_hit] or [
                c for c in infos if c.token not in where_set
            ]
        if not select_cols:
            raise NoTemplateApplicableError("no column available for the select list")

        signals = (1 if aggregate else 0) + len(where_cols)

        def build(agg: str | None, wheres: list[_ColumnInfo]) -> str:
            items = tuple(
                SelectItem(
                    aggregate=agg or "none",
                    column=ColumnRef(table=table_token, column=c.token),
                )
                for c in select_cols
            )
            conjuncts = tuple(
                Condition(
                    column=ColumnRef(table=table_token, column=c.token),
                    op=c.bound_op or "=",
                    value=Placeholder(i + 1),
                )
                for i, c in enumerate(wheres)
            )
            query = SqlQuery(
                select_items=items, from_table=table_token, where_conjuncts=conjuncts
            )
            return serialize(TemplatedSql(query))

        scored: list[tuple[float, str]] = []

        def add(agg: str | None, wheres: list[_ColumnInfo]) -> None:
            honored = (1 if agg else 0) + len(wheres)
            score = 1.0 if signals == 0 else honored / signals
            text = build(agg, wheres)
            if all(text != t for _, t in scored):
                scored.append((score, text))

        add(aggregate, where_cols)
        if aggregate:
            add(None, where_cols)
        for i in range(len(where_cols)):
            reduced = where_cols[:i] + where_cols[i + 1 :]
            add(aggregate, reduced)
        add(None, [])

        scored.sort(key=lambda st: -st[0])
        return [CandidateSql(output=t, score=s) for s, t in scored[:beam_width]]


class BaselineValueFiller:
    """Fills each placeholder with the question span closest to the
    placeholder column's cell values; number columns accept numeral spans
    verbatim."""

    concurrency = "concurrent"

    def __init__(
        self,
        schema: Schema,
        max_distance: int = DEFAULT_VALUE_FUZZY_DISTANCE,
        stopwords: frozenset[str] | None = None,
    ):
        self.schema = schema
        self.max_distance = max_distance
        self.stopwords = stopwords if stopwords is not None else load_stopwords()

    def fill(self, record_input: str) -> str:
        question_text, sql_text, _ = parse_valuefill_input(record_input)
        question = Question.from_text(question_text)
        templated = parse_templated(sql_text)
        by_index: dict[int, ColumnRef] = {}
        for cond in templated.query.where_conjuncts:
            if isinstance(cond.value, Placeholder):
                by_index[cond.value.index] = cond.column

        used: list[tuple[int, int]] = []

        def overlaps(start: int, end: int) -> bool:
            return any(not (end <= s or start >= e) for s, e in used)

        parts = []
        for index in sorted(by_index):
            ref = by_index[index]
            col = self.schema.column(ref.table or "", ref.column)
            candidates: list[tuple[int, int, str]] = []  # (distance, start, span)
            for span, start, end in question_spans(question, stopwords=self.stopwords):
                if overlaps(start, end):
                    continue
                if col is not None and col.ctype == "number" and _NUMERAL_RE.fullmatch(span):
                    candidates.append((0, start, span))
                    continue
                if col is None or not col.values:
                    continue
                scores = [
                    guarded_distance(span, v, self.max_distance) for v in col.values
                ]
                scores = [s for s in scores if s is not None]
                if scores:
                    candidates.append((min(scores), start, span))
            if not candidates:
                raise UnfillablePlaceholderError(index, ref.column)
            candidates.sort(key=lambda c: (c[0], c[1], -len(c[2])))
            distance, start, span = candidates[0]
            used.append((start, start + len(span)))
            parts.append(f"extra{index} {span}")
        return " ".join(parts)
