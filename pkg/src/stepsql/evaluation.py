"""Corpus splitting, logic-form accuracy, ablation matrices, and the
synthetic corpus generator, plus a toy row-store for execution checks.

The shipped synthetic schema stands in for the original proprietary
database; accuracy figures measured here are properties of these corpora.
Externally reported reference accuracies are documentation-only and never
asserted (the report footer repeats this).
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field, replace
from decimal import Decimal
from fractions import Fraction

from .errors import StageFailureError, StepSqlError
from .pipeline import PipelineBackends, PipelineConfig, make_backends
from .pipeline import run as pipeline_run
from .records import QuestionSqlPair, check_no_reserved
from .schema import Question, Schema, tokenize
from .sqlast import (
    ColumnRef,
    Condition,
    Literal,
    Placeholder,
    SelectItem,
    SqlQuery,
    canonicalize,
    logic_form_equal,
    serialize,
)
from .baselines import BaselineColumnTagger, BaselineTableScorer
from .records import build_column_input, build_table_input
from .entities import link_entities

FOOTER = (
    "accuracy figures above are measured on the named corpora; externally "
    "reported reference accuracies are documentation-only (see README) and "
    "are never asserted by this harness."
)


# ---------------------------------------------------------------------------
# Split and evaluate
# ---------------------------------------------------------------------------


def split(
    corpus: list, ratio: float, seed: int = 0
) -> tuple[list, list]:
    """Deterministic shuffled split; partitions are disjoint and exhaustive."""
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must be in (0, 1)")
    order = list(range(len(corpus)))
    random.Random(seed).shuffle(order)
    train_n = int(round(len(corpus) * ratio))
    train_idx = sorted(order[:train_n])
    test_idx = sorted(order[train_n:])
    return [corpus[i] for i in train_idx], [corpus[i] for i in test_idx]


@dataclass
class SampleVerdict:
    question: str
    gold: str
    predicted: str | None
    match: bool
    failed_stage: str | None = None


@dataclass
class EvalResult:
    accuracy: Fraction
    verdicts: list[SampleVerdict]

    @property
    def matches(self) -> int:
        return sum(1 for v in self.verdicts if v.match)

    @property
    def samples(self) -> int:
        return len(self.verdicts)


def evaluate(
    config: PipelineConfig,
    corpus: list[QuestionSqlPair],
    schema: Schema,
    backends: PipelineBackends | None = None,
) -> EvalResult:
    """Logic-form accuracy of the pipeline; stage failures count as misses.

    Samples are evaluated serially, which also honors backends that declare
    themselves serial.
    """
    backends = backends or make_backends(schema, config)
    verdicts = []
    for pair in corpus:
        gold_text = serialize(pair.gold_sql, schema)
        try:
            predicted, _ = pipeline_run(pair.question, schema, config, backends)
        except StageFailureError as e:
            verdicts.append(
                SampleVerdict(
                    question=pair.question.text,
                    gold=gold_text,
                    predicted=None,
                    match=False,
                    failed_stage=e.stage,
                )
            )
            continue
        ok = logic_form_equal(predicted, pair.gold_sql, schema)
        verdicts.append(
            SampleVerdict(
                question=pair.question.text,
                gold=gold_text,
                predicted=serialize(predicted, schema),
                match=ok,
            )
        )
    n = len(verdicts)
    accuracy = Fraction(sum(1 for v in verdicts if v.match), n) if n else Fraction(0)
    return EvalResult(accuracy=accuracy, verdicts=verdicts)


@dataclass
class EvalReport:
    variants: list[str]
    datasets: list[str]
    cells: dict[tuple[str, str], EvalResult] = field(default_factory=dict)
    footer: str = FOOTER

    def accuracy(self, variant: str, dataset: str) -> Fraction:
        return self.cells[(variant, dataset)].accuracy

    def render_text(self) -> str:
        name_w = max(len(v) for v in self.variants) + 2
        col_w = max(12, max(len(d) for d in self.datasets) + 2)
        lines = ["".ljust(name_w) + "".join(d.rjust(col_w) for d in self.datasets)]
        for v in self.variants:
            row = v.ljust(name_w)
            for d in self.datasets:
                r = self.cells[(v, d)]
                row += f"{float(r.accuracy) * 100:.1f}% ({r.matches}/{r.samples})".rjust(col_w)
            lines.append(row)
        lines.append("")
        lines.append(f"note: {self.footer}")
        return "\n".join(lines)

    def render_jsonl(self) -> str:
        import json

        lines = [
            json.dumps(
                {"kind": "matrix", "variants": self.variants, "datasets": self.datasets},
                ensure_ascii=False,
            )
        ]
        for v in self.variants:
            for d in self.datasets:
                r = self.cells[(v, d)]
                lines.append(
                    json.dumps(
                        {
                            "kind": "cell",
                            "variant": v,
                            "dataset": d,
                            "accuracy": float(r.accuracy),
                            "matches": r.matches,
                            "samples": r.samples,
                        },
                        ensure_ascii=False,
                    )
                )
        lines.append(json.dumps({"kind": "footer", "note": self.footer}, ensure_ascii=False))
        return "\n".join(lines)


def ablation_matrix(
    variants: list[tuple[str, PipelineConfig]],
    datasets: list[tuple[str, list[QuestionSqlPair]]],
    schema: Schema,
) -> EvalReport:
    """Evaluate every (variant, dataset) cell independently."""
    if not variants:
        raise ValueError("at least one variant is required")
    if not datasets:
        raise ValueError("at least one dataset is required")
    report = EvalReport(variants=[n for n, _ in variants], datasets=[n for n, _ in datasets])
    for vname, config in variants:
        backends = make_backends(schema, config)
        for dname, corpus in datasets:
            report.cells[(vname, dname)] = evaluate(config, corpus, schema, backends)
    return report


# ---------------------------------------------------------------------------
# Toy row-store
# ---------------------------------------------------------------------------


class ToyStore:
    """In-memory executor for the supported subset: filter, project,
    aggregate over one table or one equi-join.  Mixing aggregated and plain
    select items is rejected (the subset has no GROUP BY)."""

    def __init__(self, schema: Schema):
        self.schema = schema

    def _typed(self, table: str, column: str, raw: str):
        col = self.schema.column(table, column)
        if col is not None and col.ctype == "number":
            return Decimal(raw)
        return raw

    def _rows(self, q: SqlQuery) -> tuple[list[tuple[str, str]], list[list]]:
        base = self.schema.table(q.from_table)
        if base is None:
            raise StepSqlError(f"unknown table {q.from_table!r}")
        cols = [(q.from_table, c.name) for c in base.columns]
        rows = [list(r) for r in self.schema.rows.get(q.from_table, ())]
        for j in q.joins:
            other = self.schema.table(j.table)
            if other is None:
                raise StepSqlError(f"unknown table {j.table!r}")
            right_cols = [(j.table, c.name) for c in other.columns]
            right_rows = [list(r) for r in self.schema.rows.get(j.table, ())]
            li = cols.index((j.left.table, j.left.column)) if (
                j.left.table,
                j.left.column,
            ) in cols else None
            ri = right_cols.index((j.right.table, j.right.column)) if (
                j.right.table,
                j.right.column,
            ) in right_cols else None
            if li is None or ri is None:
                # condition sides may come reversed
                li = cols.index((j.right.table, j.right.column))
                ri = right_cols.index((j.left.table, j.left.column))
            joined = []
            for a in rows:
                for b in right_rows:
                    if a[li] == b[ri]:
                        joined.append(a + b)
            cols = cols + right_cols
            rows = joined
        return cols, rows

    def _col_index(self, cols: list[tuple[str, str]], ref: ColumnRef) -> int:
        key = (ref.table, ref.column)
        if key not in cols:
            raise StepSqlError(f"column {ref.table!r} @ {ref.column!r} not in row shape")
        return cols.index(key)

    def execute(self, q: SqlQuery) -> list[tuple]:
        cols, rows = self._rows(q)
        for cond in q.where_conjuncts:
            if isinstance(cond.value, Placeholder):
                raise StepSqlError("cannot execute templated SQL")
            idx = self._col_index(cols, cond.column)
            want = self._typed(cond.column.table, cond.column.column, cond.value.value)

            def keep(row, idx=idx, want=want, op=cond.op, cond=cond):
                have = self._typed(cond.column.table, cond.column.column, row[idx])
                if op == "=":
                    return have == want
                if op == "!=":
                    return have != want
                if op == ">":
                    return have > want
                if op == "<":
                    return have < want
                if op == ">=":
                    return have >= want
                return have <= want

            rows = [r for r in rows if keep(r)]
        if q.order_by is not None:
            idx = self._col_index(cols, q.order_by.column)
            rows = sorted(
                rows,
                key=lambda r: self._typed(
                    q.order_by.column.table, q.order_by.column.column, r[idx]
                ),
                reverse=q.order_by.direction == "desc",
            )
        if q.limit is not None:
            rows = rows[: q.limit]
        aggregated = [it for it in q.select_items if it.aggregate != "none"]
        if aggregated and len(aggregated) != len(q.select_items):
            raise StepSqlError("cannot mix aggregated and plain select items")
        if aggregated:
            out = []
            for it in q.select_items:
                idx = self._col_index(cols, it.column)
                vals = [
                    self._typed(it.column.table, it.column.column, r[idx]) for r in rows
                ]
                if it.aggregate == "count":
                    out.append(Decimal(len(vals)))
                elif not vals:
                    out.append(None)
                elif it.aggregate == "sum":
                    out.append(sum(vals, Decimal(0)))
                elif it.aggregate == "avg":
                    out.append(sum(vals, Decimal(0)) / Decimal(len(vals)))
                elif it.aggregate == "max":
                    out.append(max(vals))
                else:
                    out.append(min(vals))
            return [tuple(out)]
        idxs = [self._col_index(cols, it.column) for it in q.select_items]
        return [tuple(r[i] for i in idxs) for r in rows]


def _blank_values(q: SqlQuery) -> SqlQuery:
    conjuncts = tuple(
        replace(c, value=Placeholder(0) if isinstance(c.value, Placeholder) else Literal(""))
        for c in q.where_conjuncts
    )
    return replace(q, where_conjuncts=conjuncts)


def execution_consistent(
    pair_a: QuestionSqlPair, pair_b: QuestionSqlPair, store: ToyStore
) -> bool:
    """True iff the two queries share one template (up to literal values)
    and both execute on the store; this is the keyword-swap relation."""
    a = canonicalize(pair_a.gold_sql, store.schema)
    b = canonicalize(pair_b.gold_sql, store.schema)
    if _blank_values(a) != _blank_values(b):
        return False
    try:
        store.execute(a)
        store.execute(b)
    except StepSqlError:
        return False
    return True


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------

_NUMERAL_RE = re.compile(r"-?(?:\d+\.?\d*|\.\d+)\Z")

# question patterns; sel = name-mentioned select column, vcol/value = a
# text column condition, ncol/num = a number column comparison
_TEMPLATES = (
    ("show {sel} for {value}", "none", None),
    ("show {sel} and {sel2} for {value}", "none", None),
    ("total {sel} for {value}", "sum", None),
    ("average {sel} for {value}", "avg", None),
    ("maximum {sel} for {value}", "max", None),
    ("minimum {sel} for {value}", "min", None),
    ("how many {sel} for {value}", "count", None),
    ("show {sel} with {ncol} more than {num}", "none", ">"),
    ("show {sel} with {ncol} less than {num}", "none", "<"),
    ("show {sel} with {ncol} at least {num}", "none", ">="),
    ("show {sel} for {value} in {value2}", "none", None),
)

_COMPARISON_NUMBERS = ("175", "275", "333", "425", "512", "780", "999", "1250", "3000")


@dataclass(frozen=True)
class TypoCase:
    original: str
    mutated: str
    span: str
    typo_span: str
    start: int
    value: str
    table: str
    column: str


class CorpusAuditError(StepSqlError):
    """A generated sample failed the lexical-unambiguity audit."""


def _audit_pair(
    pair: QuestionSqlPair,
    schema: Schema,
    scorer: BaselineTableScorer,
    tagger: BaselineColumnTagger,
    expected_hits: set[str],
    entity_spans: list[tuple[str, str, str, str]],  # (span, value, table, column)
) -> None:
    """Certify the sample is lexically unambiguous for the baselines."""
    check_no_reserved(pair.question.text)
    gold_table = pair.gold_sql.from_table
    scores = [
        (scorer.score(build_table_input(pair.question.text, t.name)).score, t.name)
        for t in schema.tables
    ]
    best = max(s for s, _ in scores)
    winners = [t for s, t in scores if s == best]
    if winners != [gold_table]:
        raise CorpusAuditError(
            f"table argmax {winners} is not uniquely {gold_table!r} for "
            f"{pair.question.text!r}"
        )
    tagging = tagger.tag(build_column_input(pair.question.text, schema, gold_table))
    hits = set(tagging.hit_columns())
    if hits != expected_hits:
        raise CorpusAuditError(
            f"tagger hits {sorted(hits)} differ from gold {sorted(expected_hits)} "
            f"for {pair.question.text!r}"
        )
    mapping = link_entities(pair.question, schema)
    found = [(l.span, l.value, l.table, l.column) for l in mapping.links]
    if found != entity_spans:
        raise CorpusAuditError(
            f"entity links {found} differ from placed spans {entity_spans} for "
            f"{pair.question.text!r}"
        )


def synth_corpus(
    schema: Schema, n: int, seed: int = 0
) -> list[QuestionSqlPair]:
    """Generate ``n`` lexically unambiguous question-SQL pairs.

    Each sample passes an audit: the gold table is the unique best lexical
    match, the tagger reproduces the gold column set exactly, and entity
    linking finds exactly the placed value spans.
    """
    rng = random.Random(seed)
    scorer = BaselineTableScorer(schema)
    tagger = BaselineColumnTagger(schema)
    pairs: list[QuestionSqlPair] = []
    seen: set[str] = set()
    attempts = 0
    while len(pairs) < n:
        attempts += 1
        if attempts > 200 * max(1, n):
            raise CorpusAuditError("sample space exhausted before reaching n")
        table = rng.choice(schema.tables)
        text_cols = [c for c in table.columns if c.ctype == "text" and c.values]
        num_cols = [c for c in table.columns if c.ctype == "number"]
        template, agg, op = rng.choice(_TEMPLATES)
        needs2 = "{sel2}" in template
        needs_value2 = "{value2}" in template
        needs_num = "{ncol}" in template
        if needs_num and not num_cols:
            continue
        if not text_cols:
            continue
        vcol = rng.choice(text_cols)
        pool = [c for c in table.columns if c.name != vcol.name]
        if agg in ("sum", "avg", "max", "min"):
            pool = [c for c in pool if c.ctype == "number"]
        if needs_num:
            pool = [c for c in pool if c.ctype == "text" and c.name != vcol.name]
        if not pool:
            continue
        sel = rng.choice(pool)
        sel2 = None
        if needs2:
            others = [c for c in table.columns if c.name not in (sel.name, vcol.name)]
            if not others:
                continue
            sel2 = rng.choice(others)
        value = rng.choice(vcol.values)
        fields = {"sel": sel.name, "value": value}
        entity_spans = []
        conjuncts = []
        if needs_num:
            ncol = rng.choice(num_cols)
            if ncol.name in (sel.name,):
                continue
            num = rng.choice(_COMPARISON_NUMBERS)
            fields.update({"ncol": ncol.name, "num": num})
            conjuncts.append(
                Condition(
                    column=ColumnRef(table=table.name, column=ncol.name),
                    op=op,
                    value=Literal(num),
                )
            )
            expected_hits = {sel.name, ncol.name}
            items = [SelectItem(aggregate="none", column=ColumnRef(table.name, sel.name))]
        else:
            conjuncts.append(
                Condition(
                    column=ColumnRef(table=table.name, column=vcol.name),
                    op="=",
                    value=Literal(value),
                )
            )
            entity_spans.append((value, value, table.name, vcol.name))
            expected_hits = {sel.name, vcol.name}
            items = [
                SelectItem(
                    aggregate=agg if agg != "none" else "none",
                    column=ColumnRef(table.name, sel.name),
                )
            ]
            if needs2:
                items.append(
                    SelectItem(aggregate="none", column=ColumnRef(table.name, sel2.name))
                )
                fields["sel2"] = sel2.name
                expected_hits.add(sel2.name)
            if needs_value2:
                vcol2_pool = [
                    c
                    for c in text_cols
                    if c.name not in (vcol.name, sel.name) and c.values
                ]
                if not vcol2_pool:
                    continue
                vcol2 = rng.choice(vcol2_pool)
                value2 = rng.choice(vcol2.values)
                fields["value2"] = value2
                conjuncts.append(
                    Condition(
                        column=ColumnRef(table=table.name, column=vcol2.name),
                        op="=",
                        value=Literal(value2),
                    )
                )
                entity_spans.append((value2, value2, table.name, vcol2.name))
                expected_hits.add(vcol2.name)
        question_text = template.format(**fields)
        if question_text in seen:
            continue
        gold = SqlQuery(
            select_items=tuple(items),
            from_table=table.name,
            where_conjuncts=tuple(conjuncts),
        )
        pair = QuestionSqlPair(
            question=Question.from_text(question_text),
            gold_sql=gold,
            db_name=schema.db_name,
        )
        entity_spans.sort(key=lambda s: question_text.index(s[0]))
        _audit_pair(pair, schema, scorer, tagger, expected_hits, entity_spans)
        seen.add(question_text)
        pairs.append(pair)
    return pairs


def _mutate(span: str, rng: random.Random) -> str:
    """One edit: substitution, deletion, insertion, or transposition."""
    letters = "abcdefghijklmnopqrstuvwxyz"
    kind = rng.choice(("sub", "del", "ins", "swap"))
    i = rng.randrange(len(span))
    if kind == "sub":
        repl = rng.choice([c for c in letters if c != span[i].lower()])
        return span[:i] + repl + span[i + 1 :]
    if kind == "del" and len(span) > 1:
        return span[:i] + span[i + 1 :]
    if kind == "swap" and len(span) > 1:
        i = min(i, len(span) - 2)
        return span[:i] + span[i + 1] + span[i] + span[i + 2 :]
    return span[:i] + rng.choice(letters) + span[i:]


def inject_typo(
    pair: QuestionSqlPair, schema: Schema, rng: random.Random
) -> TypoCase | None:
    """Corrupt one linked text-value span of the question with a <=2-edit typo.

    Returns None when the question has no typo-eligible entity span.  The
    mutated span stays uniquely closest to its original value.
    """
    mapping = link_entities(pair.question, schema)
    spots = [
        l
        for l in mapping.links
        if l.distance == 0 and not _NUMERAL_RE.fullmatch(l.span) and len(l.span) >= 4
    ]
    if not spots:
        return None
    link = rng.choice(spots)
    for _ in range(50):
        mutated_span = _mutate(link.span, rng)
        if mutated_span == link.span or not mutated_span:
            continue
        if any(ch.isspace() for ch in mutated_span):
            continue
        mutated = (
            pair.question.text[: link.start] + mutated_span + pair.question.text[link.end :]
        )
        try:
            check_no_reserved(mutated)
        except StepSqlError:
            continue
        # the typo must still link back to the same canonical value
        m2 = link_entities(Question.from_text(mutated), schema)
        back = [
            l
            for l in m2.links
            if l.start == link.start and l.value == link.value and l.distance <= 2
        ]
        if not back:
            continue
        return TypoCase(
            original=pair.question.text,
            mutated=mutated,
            span=link.span,
            typo_span=mutated_span,
            start=link.start,
            value=link.value,
            table=link.table,
            column=link.column,
        )
    return None


def typo_suite(
    pairs: list[QuestionSqlPair], schema: Schema, seed: int = 0
) -> list[QuestionSqlPair]:
    """Corrupt each pair's question inside one entity span where possible;
    gold SQL is unchanged.  Pairs without an eligible span pass through."""
    out = []
    for i, pair in enumerate(pairs):
        case = inject_typo(pair, schema, random.Random(f"{seed}:typo:{i}"))
        if case is None:
            out.append(pair)
        else:
            out.append(
                QuestionSqlPair(
                    question=Question.from_text(case.mutated),
                    gold_sql=pair.gold_sql,
                    db_name=pair.db_name,
                )
            )
    return out
