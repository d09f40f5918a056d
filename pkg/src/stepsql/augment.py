"""Data augmentation over question-SQL pairs and subtask records.

Three strategies: replace value keywords simultaneously in question and SQL,
perturb column listings in serialized records, and paraphrase questions
through a provider.  Everything is seeded and reproducible bit-for-bit.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field, replace
from typing import Protocol, runtime_checkable

from .errors import ProviderUnavailableError
from .records import (
    ColumnSelectRecord,
    QuestionSqlPair,
    SqlGenRecord,
    build_column_input,
    build_sqlgen_input,
    column_labels_for,
    parse_column_input,
    parse_sqlgen_input,
)
from .schema import Question, Schema, tokenize
from .sqlast import Literal, TemplatedSql, parse_templated, serialize
from .contracts import substitute_identifiers


@dataclass(frozen=True)
class AugmentationConfig:
    replace_keywords: bool = True
    keyword_samples: int = 2
    perturb_columns: bool = True
    column_add_p: float = 0.5
    column_delete_p: float = 0.5
    column_replace_p: float = 0.5
    paraphrase: bool = True
    similarity_threshold: float = 0.95
    multiplier: int | None = None
    seed: int = 0

    def __post_init__(self):
        for name in ("column_add_p", "column_delete_p", "column_replace_p"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if not 0.0 <= self.similarity_threshold <= 1.0:
            raise ValueError("similarity_threshold must be in [0, 1]")


@runtime_checkable
class ParaphraseProvider(Protocol):
    def paraphrases(self, question: str) -> list[tuple[str, float]]: ...


def _pair_rng(seed: int, salt, index: int) -> random.Random:
    return random.Random(f"{seed}:{salt}:{index}")


def _span_occurrence(question_text: str, value: str) -> tuple[int, int] | None:
    """First token-boundary occurrence of ``value`` in the question."""
    pattern = re.compile(
        r"(?<![A-Za-z0-9_])" + re.escape(value) + r"(?![A-Za-z0-9_])"
    )
    m = pattern.search(question_text)
    return (m.start(), m.end()) if m else None


def replace_keywords(
    pair: QuestionSqlPair, schema: Schema, n: int, seed: int = 0
) -> list[QuestionSqlPair]:
    """Swap a question-visible SQL literal for another value of its column,
    simultaneously in the question and the SQL.  Emits up to ``n`` variants.
    """
    options: list[tuple[int, tuple[int, int], str]] = []  # (conjunct idx, span, new value)
    for ci, cond in enumerate(pair.gold_sql.where_conjuncts):
        if not isinstance(cond.value, Literal):
            continue
        span = _span_occurrence(pair.question.text, cond.value.value)
        if span is None:
            continue
        col = schema.column(cond.column.table or "", cond.column.column)
        if col is None:
            continue
        for alt in col.values:
            if alt != cond.value.value:
                options.append((ci, span, alt))
    if not options:
        return []
    rng = _pair_rng(seed, "kw", 0)
    picked = options if len(options) <= n else rng.sample(options, n)
    variants = []
    for ci, (start, end), alt in picked:
        text = pair.question.text[:start] + alt + pair.question.text[end:]
        conjuncts = list(pair.gold_sql.where_conjuncts)
        conjuncts[ci] = replace(conjuncts[ci], value=Literal(alt))
        variants.append(
            QuestionSqlPair(
                question=Question.from_text(text),
                gold_sql=replace(pair.gold_sql, where_conjuncts=tuple(conjuncts)),
                db_name=pair.db_name,
            )
        )
    return variants


# ---------------------------------------------------------------------------
# Column perturbation
# ---------------------------------------------------------------------------


def _foreign_columns(schema: Schema, table: str, exclude: set[str]) -> list[tuple[str, str]]:
    out = []
    for t in schema.tables:
        if t.name == table:
            continue
        for c in t.columns:
            if c.name not in exclude:
                out.append((c.name, c.ctype))
    return out


def _perturb_column_record(
    rec: ColumnSelectRecord, schema: Schema, config: AugmentationConfig, rng: random.Random
) -> list[ColumnSelectRecord]:
    question, table, columns = parse_column_input(rec.input)
    sep_labels = [lab for lab in rec.labels if lab != "O"]
    gold = {col for (col, _), lab in zip(columns, sep_labels) if lab == "B-C"}
    listed = {col for col, _ in columns}

    def rebuild(new_columns: list[tuple[str, str]]) -> ColumnSelectRecord:
        parts = [question, "extra0", table]
        for name, ctype in new_columns:
            parts.extend(["extra1", name, ctype])
        text = " ".join(parts)
        return ColumnSelectRecord(input=text, labels=column_labels_for(text, gold))

    variants = []
    non_gold = [(c, t) for c, t in columns if c not in gold]
    if non_gold and rng.random() < config.column_delete_p:
        victim = rng.choice(non_gold)
        variants.append(rebuild([c for c in columns if c != victim]))
    pool = _foreign_columns(schema, table, listed)
    if pool and rng.random() < config.column_add_p:
        extra = rng.choice(pool)
        pos = rng.randrange(len(columns) + 1)
        variants.append(rebuild(columns[:pos] + [extra] + columns[pos:]))
    if non_gold and pool and rng.random() < config.column_replace_p:
        victim = rng.choice(non_gold)
        extra = rng.choice(pool)
        variants.append(rebuild([extra if c == victim else c for c in columns]))
    return variants


def _perturb_sqlgen_record(
    rec: SqlGenRecord, schema: Schema, config: AugmentationConfig, rng: random.Random
) -> list[SqlGenRecord]:
    question, tables, _ = parse_sqlgen_input(rec.input)
    old_table_map = {tok: name for tok, name, _ in tables}
    old_column_map = {tok: (name, col) for tok, name, cols in tables for tok, col in cols}
    templated = parse_templated(rec.output)
    real = substitute_identifiers(templated, old_table_map, old_column_map)
    gold_cols = {(r.table, r.column) for r in real.query.column_refs()}

    def rebuild(listing: list[tuple[str, list[str]]]) -> SqlGenRecord:
        text, table_map, column_map = build_sqlgen_input(question, listing)
        from .records import rename_identifiers

        renamed = rename_identifiers(real.query, table_map, column_map)
        return SqlGenRecord(input=text, output=serialize(TemplatedSql(renamed)))

    listing = [(name, [c for _, c in cols]) for _, name, cols in tables]
    variants = []
    for ti, (tname, cols) in enumerate(listing):
        non_gold = [c for c in cols if (tname, c) not in gold_cols]
        table = schema.table(tname)
        unlisted = (
            [c.name for c in table.columns if c.name not in cols] if table else []
        )
        if non_gold and len(cols) > 1 and rng.random() < config.column_delete_p:
            victim = rng.choice(non_gold)
            new = [
                (n, [c for c in cs if not (n == tname and c == victim)])
                for n, cs in listing
            ]
            variants.append(rebuild(new))
        if unlisted and rng.random() < config.column_add_p:
            extra = rng.choice(unlisted)
            new = [(n, cs + [extra] if n == tname else cs) for n, cs in listing]
            variants.append(rebuild(new))
        if non_gold and unlisted and rng.random() < config.column_replace_p:
            victim = rng.choice(non_gold)
            extra = rng.choice(unlisted)
            new = [
                (n, [extra if (n == tname and c == victim) else c for c in cs])
                for n, cs in listing
            ]
            variants.append(rebuild(new))
        del ti
    return variants


def perturb_columns(
    record: ColumnSelectRecord | SqlGenRecord,
    schema: Schema,
    config: AugmentationConfig,
    seed: int = 0,
):
    """Add, delete, or replace non-gold column listings in a record.

    Gold-referenced columns are never removed; labels and outputs are
    regenerated so each variant stays internally consistent.
    """
    rng = _pair_rng(seed, "col", 0)
    if isinstance(record, ColumnSelectRecord):
        return _perturb_column_record(record, schema, config, rng)
    if isinstance(record, SqlGenRecord):
        return _perturb_sqlgen_record(record, schema, config, rng)
    raise TypeError(f"cannot perturb {type(record).__name__}")


# ---------------------------------------------------------------------------
# Paraphrasing
# ---------------------------------------------------------------------------


def jaccard_similarity(a: str, b: str) -> float:
    sa = {t.casefold() for t in tokenize(a)}
    sb = {t.casefold() for t in tokenize(b)}
    if not sa and not sb:
        return 1.0
    return len(sa & sb) / len(sa | sb)


class RuleParaphraser:
    """Deterministic template rewrites scored by token Jaccard similarity."""

    _VERB_SWAPS = {"show": "list", "list": "show", "display": "show", "what": "which", "which": "what"}

    def paraphrases(self, question: str) -> list[tuple[str, float]]:
        if not question.strip():
            return []
        out = []
        seen = {question}

        def push(text: str) -> None:
            if text not in seen:
                seen.add(text)
                out.append((text, jaccard_similarity(question, text)))

        push("please " + question)
        toks = question.split(" ")
        head = toks[0].casefold()
        if head in self._VERB_SWAPS:
            push(" ".join([self._VERB_SWAPS[head]] + toks[1:]))
        push(question + " please")
        return out


def paraphrase(
    pair: QuestionSqlPair,
    provider: ParaphraseProvider,
    threshold: float,
) -> list[QuestionSqlPair]:
    """Keep provider outputs whose similarity exceeds ``threshold``.

    A paraphrase that drops the surface span of a bound literal is discarded
    (value anchoring), so each kept question still pairs with the gold SQL.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    anchored = []
    for cond in pair.gold_sql.where_conjuncts:
        if isinstance(cond.value, Literal) and _span_occurrence(
            pair.question.text, cond.value.value
        ):
            anchored.append(cond.value.value)
    try:
        outputs = provider.paraphrases(pair.question.text)
    except ProviderUnavailableError:
        raise
    except Exception as e:
        raise ProviderUnavailableError(str(e)) from e
    kept = []
    for text, similarity in outputs:
        if similarity <= threshold or text == pair.question.text:
            continue
        if any(_span_occurrence(text, v) is None for v in anchored):
            continue
        kept.append(
            QuestionSqlPair(
                question=Question.from_text(text),
                gold_sql=pair.gold_sql,
                db_name=pair.db_name,
            )
        )
    return kept


# ---------------------------------------------------------------------------
# Corpus-level driver
# ---------------------------------------------------------------------------


@dataclass
class AugmentationStats:
    originals: int = 0
    keyword_variants: int = 0
    paraphrase_variants: int = 0
    emitted: int = 0
    per_strategy: dict = field(default_factory=dict)


def augment_corpus(
    pairs: list[QuestionSqlPair],
    schema: Schema,
    config: AugmentationConfig,
    provider: ParaphraseProvider | None = None,
) -> tuple[list[QuestionSqlPair], AugmentationStats]:
    """Apply the pair-level strategies; originals always come first.

    With ``config.multiplier`` set, variants are appended (cycling through
    pairs) until the corpus reaches multiplier x the input size or the
    variant pool is exhausted.
    """
    stats = AugmentationStats(originals=len(pairs))
    provider = provider if provider is not None else RuleParaphraser()
    pool: list[QuestionSqlPair] = []
    seen: set[tuple[str, str]] = {
        (p.question.text, serialize(p.gold_sql, schema)) for p in pairs
    }

    def push(variant: QuestionSqlPair, kind: str) -> bool:
        key = (variant.question.text, serialize(variant.gold_sql, schema))
        if key in seen:
            return False
        seen.add(key)
        pool.append(variant)
        if kind == "keyword":
            stats.keyword_variants += 1
        else:
            stats.paraphrase_variants += 1
        return True

    for i, pair in enumerate(pairs):
        if config.replace_keywords:
            for v in replace_keywords(pair, schema, config.keyword_samples, seed=config.seed + i):
                push(v, "keyword")
        if config.paraphrase:
            for v in paraphrase(pair, provider, config.similarity_threshold):
                push(v, "paraphrase")

    out = list(pairs)
    if config.multiplier is None:
        out.extend(pool)
    else:
        target = config.multiplier * len(pairs)
        out.extend(pool[: max(0, target - len(out))])
    stats.emitted = len(out)
    stats.per_strategy = {
        "keyword_replacement": stats.keyword_variants,
        "paraphrase": stats.paraphrase_variants,
    }
    return out, stats
