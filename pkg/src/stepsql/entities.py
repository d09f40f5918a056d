"""Entity substitute/restore wrapper around pipeline inference.

Question spans are linked to canonical database cell values before the
submodels run; after generation the original surface forms can be restored
into the final SQL.  Linking is dictionary/fuzzy matching against schema
content; a learned tagger can replace it behind the same signatures.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from .errors import OffsetMismatchError
from .schema import Question, Schema
from .sqlast import Condition, Literal, SqlQuery
from .matching import MIN_FUZZY_SPAN_LEN, guarded_distance

_WORD_RE = re.compile(r"[A-Za-z0-9_]+\Z")

DEFAULT_MAX_DISTANCE = 2
MAX_SPAN_TOKENS = 3


@dataclass(frozen=True)
class EntityLink:
    span: str
    start: int
    end: int
    value: str
    table: str
    column: str
    distance: int


@dataclass(frozen=True)
class EntityMapping:
    links: tuple[EntityLink, ...]

    def __len__(self) -> int:
        return len(self.links)

    def to_obj(self) -> list[dict]:
        return [
            {
                "span": l.span,
                "start": l.start,
                "end": l.end,
                "value": l.value,
                "table": l.table,
                "column": l.column,
                "distance": l.distance,
            }
            for l in self.links
        ]


def _best_value(
    schema: Schema, span: str, max_distance: int, min_fuzzy_len: int
) -> tuple[int, str, str, str] | None:
    """Closest cell value as (distance, table, column, value); schema order
    breaks ties.  Matching guards come from matching.guarded_distance."""
    best: tuple[int, int, int, str, str, str] | None = None
    for ti, table in enumerate(schema.tables):
        for ci, col in enumerate(table.columns):
            for value in col.values:
                d = guarded_distance(span, value, max_distance, min_fuzzy_len)
                if d is None:
                    continue
                key = (d, ti, ci, table.name, col.name, value)
                if best is None or key < best:
                    best = key
    if best is None:
        return None
    d, _, _, tname, cname, value = best
    return d, tname, cname, value


def link_entities(
    q: Question,
    schema: Schema,
    max_distance: int = DEFAULT_MAX_DISTANCE,
    stopwords: frozenset[str] | None = None,
    max_span_tokens: int = MAX_SPAN_TOKENS,
    min_fuzzy_len: int = MIN_FUZZY_SPAN_LEN,
) -> EntityMapping:
    """Link maximal question spans to cell values within ``max_distance``.

    Candidate spans are token n-grams; stopword-only spans never link, and
    fuzzy (distance > 0) links require ``min_fuzzy_len`` characters.
    Overlaps resolve by (lower distance, longer span, earlier position).
    Exact matches are always included so restoration stays total.
    """
    if stopwords is None:
        from .baselines import load_stopwords

        stopwords = load_stopwords()

    candidates: list[tuple[int, int, int, EntityLink]] = []
    toks = q.tokens
    for width in range(min(max_span_tokens, len(toks)), 0, -1):
        for i in range(0, len(toks) - width + 1):
            window = toks[i : i + width]
            words = [t.text for t in window if _WORD_RE.fullmatch(t.text)]
            if len(words) != len(window):  # punctuation inside the span
                continue
            if all(w.casefold() in stopwords for w in words):
                continue
            start, end = window[0].start, window[-1].end
            span = q.text[start:end]
            found = _best_value(schema, span, max_distance, min_fuzzy_len)
            if found is None:
                continue
            d, tname, cname, value = found
            link = EntityLink(
                span=span, start=start, end=end, value=value,
                table=tname, column=cname, distance=d,
            )
            candidates.append((d, -(end - start), start, link))

    candidates.sort(key=lambda c: c[:3])
    chosen: list[EntityLink] = []
    for _, _, _, link in candidates:
        if any(not (link.end <= c.start or link.start >= c.end) for c in chosen):
            continue
        chosen.append(link)
    chosen.sort(key=lambda l: l.start)
    return EntityMapping(links=tuple(chosen))


def _check_fits(q: Question, m: EntityMapping) -> None:
    for link in m.links:
        if q.text[link.start : link.end] != link.span:
            raise OffsetMismatchError(
                f"span {link.span!r} not found at offset {link.start} in question"
            )


def substitute_forward(q: Question, m: EntityMapping) -> Question:
    """Replace each linked span with its canonical database value."""
    _check_fits(q, m)
    text = q.text
    for link in sorted(m.links, key=lambda l: -l.start):
        text = text[: link.start] + link.value + text[link.end :]
    return Question.from_text(text)


def forward_offsets(m: EntityMapping) -> list[tuple[int, int]]:
    """Offsets of the canonical values inside the substituted question."""
    out = []
    shift = 0
    for link in m.links:
        start = link.start + shift
        end = start + len(link.value)
        out.append((start, end))
        shift += len(link.value) - (link.end - link.start)
    return out


def reverse_substitute_text(substituted_text: str, m: EntityMapping) -> str:
    """Undo substitute_forward on the text, restoring original spans."""
    spans = forward_offsets(m)
    for (start, end), link in zip(spans, m.links):
        if substituted_text[start:end] != link.value:
            raise OffsetMismatchError(
                f"canonical value {link.value!r} not found at offset {start}"
            )
    text = substituted_text
    for (start, end), link in sorted(zip(spans, m.links), key=lambda p: -p[0][0]):
        text = text[:start] + link.span + text[end:]
    return text


def substitute_backward(sql: SqlQuery, m: EntityMapping, restore: bool = True) -> SqlQuery:
    """Swap canonical literals back to their original question spans.

    With ``restore`` False the SQL keeps canonical values, guaranteeing every
    literal exists in the database.
    """
    if not restore or not m.links:
        return sql
    by_value: dict[str, str] = {}
    for link in m.links:
        by_value.setdefault(link.value, link.span)
    conjuncts: list[Condition] = []
    for cond in sql.where_conjuncts:
        if isinstance(cond.value, Literal) and cond.value.value in by_value:
            conjuncts.append(replace(cond, value=Literal(by_value[cond.value.value])))
        else:
            conjuncts.append(cond)
    return replace(sql, where_conjuncts=tuple(conjuncts))
