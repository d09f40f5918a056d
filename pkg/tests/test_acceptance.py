"""Acceptance suite: eight criteria, each printed as one pass/fail line.

Budgets are wall-clock seconds and every tolerance is asserted here; run
with ``pytest tests/test_acceptance.py -v -s`` to see the lines.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import replace
from fractions import Fraction

import pytest

from stepsql.augment import AugmentationConfig, augment_corpus, replace_keywords
from stepsql.cli import main as cli_main
from stepsql.entities import link_entities, reverse_substitute_text, substitute_forward
from stepsql.evaluation import (
    ToyStore,
    evaluate,
    execution_consistent,
    inject_typo,
    synth_corpus,
    typo_suite,
)
from stepsql.matching import edit_distance
from stepsql.pipeline import PipelineConfig
from stepsql.records import (
    build_column_records,
    build_sqlgen_record,
    build_table_records,
    build_valuefill_record,
    gold_column_refs,
    gold_tables,
    read_corpus,
    record_to_obj,
    read_records,
    write_corpus,
)
from stepsql.schema import Question
from stepsql.sqlast import (
    TemplatedSql,
    fill_values,
    parse_sql,
    parse_templated,
    resolve_query,
    serialize,
    strip_values,
)
from tests.astgen import random_query, random_templated
from tests.conftest import DATA_DIR, packaged
from tests.test_sqlast import permutation_equivalent

GOLDEN = DATA_DIR / "golden"


@pytest.fixture(scope="module", autouse=True)
def warm_kernel():
    # JIT warmup is not part of any measured budget
    edit_distance("warm", "up")


def report(name: str, ok: bool, detail: str) -> None:
    print(f"{name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name} failed: {detail}"


def test_p1_format_golden_files(fixture_schema):
    start = time.perf_counter()
    pairs = read_corpus(GOLDEN / "pairs.jsonl", fixture_schema)
    assert len(pairs) == 20
    built = {"table": [], "column": [], "sqlgen": [], "valuefill": []}
    for pair in pairs:
        built["table"].extend(build_table_records(pair, fixture_schema))
        built["column"].extend(build_column_records(pair, fixture_schema))
        built["sqlgen"].append(
            build_sqlgen_record(
                pair,
                fixture_schema,
                gold_tables(pair.gold_sql),
                gold_column_refs(pair.gold_sql),
            )
        )
        templated, assignment = strip_values(pair.gold_sql)
        built["valuefill"].append(build_valuefill_record(pair, templated, assignment))
    mismatches = 0
    for kind, records in built.items():
        want = (GOLDEN / f"{kind}_records.jsonl").read_text(encoding="utf-8")
        got = "".join(json.dumps(record_to_obj(r), ensure_ascii=False) + "\n" for r in records)
        if got != want:
            mismatches += 1
    elapsed = time.perf_counter() - start
    report(
        "P1 format golden files",
        mismatches == 0 and elapsed < 1.0,
        f"4 builders x 20 pairs byte-compared, {elapsed:.2f}s < 1s",
    )


def test_p2_ast_round_trip(fixture_schema):
    start = time.perf_counter()
    rng = random.Random(20240)
    failures = 0
    for i in range(1000):
        q = random_query(fixture_schema, rng)
        if parse_sql(serialize(q, fixture_schema), fixture_schema) != q:
            failures += 1
        templated, assignment = strip_values(q)
        if fill_values(templated, assignment) != q:
            failures += 1
        t = random_templated(fixture_schema, rng)
        if parse_templated(serialize(TemplatedSql(t))).query != t:
            failures += 1
    elapsed = time.perf_counter() - start
    report(
        "P2 AST round-trip",
        failures == 0 and elapsed < 5.0,
        f"1000 ASTs parse/serialize + strip/fill, {failures} failures, {elapsed:.2f}s < 5s",
    )


def test_p3_canonical_equality_oracle(fixture_schema):
    start = time.perf_counter()
    rng = random.Random(303)
    queries = []
    while len(queries) < 170:
        queries.append(
            random_query(fixture_schema, rng, max_select=3, max_conjuncts=3)
        )
    # clause-shuffled clones guarantee a population of equal pairs
    for q in rng.sample(queries, 30):
        items = list(q.select_items)
        conjuncts = list(q.where_conjuncts)
        rng.shuffle(items)
        rng.shuffle(conjuncts)
        queries.append(
            replace(q, select_items=tuple(items), where_conjuncts=tuple(conjuncts))
        )
    assert len(queries) == 200
    from stepsql.sqlast import logic_form_equal

    pairs = disagreements = equal_pairs = 0
    for i in range(len(queries)):
        for j in range(i + 1, len(queries)):
            pairs += 1
            got = logic_form_equal(queries[i], queries[j], fixture_schema)
            want = permutation_equivalent(queries[i], queries[j], fixture_schema)
            if got != want:
                disagreements += 1
            if want:
                equal_pairs += 1
    elapsed = time.perf_counter() - start
    report(
        "P3 canonical-equality oracle",
        pairs == 19900 and disagreements == 0 and equal_pairs >= 30 and elapsed < 30.0,
        f"{pairs} pairs, {disagreements} disagreements, "
        f"{equal_pairs} equal pairs exercised, {elapsed:.2f}s < 30s",
    )


def test_p4_end_to_end_regression(synth_schema):
    start = time.perf_counter()
    pairs = synth_corpus(synth_schema, 500, seed=7)
    result = evaluate(PipelineConfig(), pairs, synth_schema)
    elapsed = time.perf_counter() - start
    report(
        "P4 end-to-end regression",
        result.accuracy == 1 and elapsed < 60.0,
        f"accuracy {result.matches}/{result.samples} on synth corpus, {elapsed:.2f}s < 60s",
    )


def test_p5_entity_bridge_ordering(synth_schema):
    pairs = synth_corpus(synth_schema, 500, seed=7)
    typos = typo_suite(pairs, synth_schema, seed=7)
    ner_on = PipelineConfig(ner_enabled=True, restore_mode=False)
    ner_off = PipelineConfig(ner_enabled=False)
    acc_on_typo = evaluate(ner_on, typos, synth_schema).accuracy
    acc_off_typo = evaluate(ner_off, typos, synth_schema).accuracy
    acc_off_clean = evaluate(ner_off, pairs, synth_schema).accuracy
    report(
        "P5 entity-substitution ordering",
        acc_on_typo > acc_off_typo and acc_off_typo < acc_off_clean,
        f"typo suite: on={float(acc_on_typo):.3f} > off={float(acc_off_typo):.3f}; "
        f"off clean={float(acc_off_clean):.3f} (both strict)",
    )


def test_p6_augmentation_validity_closure(fixture_schema, synth_schema):
    pairs = read_corpus(GOLDEN / "pairs.jsonl", fixture_schema)
    store = ToyStore(fixture_schema)
    checked = swaps = 0
    for i, pair in enumerate(pairs):
        for variant in replace_keywords(pair, fixture_schema, n=10, seed=i):
            reparsed = parse_sql(serialize(variant.gold_sql, fixture_schema), fixture_schema)
            assert resolve_query(reparsed, fixture_schema) == reparsed
            assert execution_consistent(pair, variant, store)
            swaps += 1
        checked += 1
    config = AugmentationConfig(similarity_threshold=0.6, seed=17)
    out1, _ = augment_corpus(pairs, fixture_schema, config)
    out2, _ = augment_corpus(pairs, fixture_schema, config)
    lines1 = [
        (p.question.text, serialize(p.gold_sql, fixture_schema), p.db_name) for p in out1
    ]
    lines2 = [
        (p.question.text, serialize(p.gold_sql, fixture_schema), p.db_name) for p in out2
    ]
    all_valid = all(
        resolve_query(p.gold_sql, fixture_schema) == p.gold_sql for p in out1
    )
    report(
        "P6 augmentation validity closure",
        swaps > 0 and all_valid and lines1 == lines2,
        f"{swaps} keyword swaps execution-consistent over {checked} pairs; "
        f"{len(out1)} augmented pairs valid; reruns identical",
    )


def test_p7_entity_round_trip(synth_schema):
    pairs = synth_corpus(synth_schema, 300, seed=19)
    rng = random.Random(77)
    cases = []
    i = 0
    while len(cases) < 1000:
        case = inject_typo(pairs[i % len(pairs)], synth_schema, rng)
        if case is not None:
            cases.append(case)
        i += 1
        if i > 20000:
            break
    failures = 0
    for case in cases:
        q = Question.from_text(case.mutated)
        mapping = link_entities(q, synth_schema, max_distance=2)
        link = next((l for l in mapping.links if l.start == case.start), None)
        if link is None or link.value != case.value or link.distance > 2:
            failures += 1
            continue
        forward = substitute_forward(q, mapping)
        if case.value not in forward.text:
            failures += 1
            continue
        if reverse_substitute_text(forward.text, mapping) != case.mutated:
            failures += 1
    report(
        "P7 entity round-trip",
        len(cases) == 1000 and failures == 0,
        f"{len(cases)} injected-typo cases, {failures} failures",
    )


def test_p8_report_structure(synth_schema, tmp_path, capsys):
    pairs = synth_corpus(synth_schema, 40, seed=23)
    typos = typo_suite(pairs, synth_schema, seed=23)
    keyword_cfg = AugmentationConfig(paraphrase=False, keyword_samples=1, seed=1)
    keyword_exp, _ = augment_corpus(pairs, synth_schema, keyword_cfg)
    para_cfg = AugmentationConfig(
        replace_keywords=False, similarity_threshold=0.6, seed=1
    )
    para_exp, _ = augment_corpus(pairs, synth_schema, para_cfg)
    datasets = {
        "initial": pairs,
        "typo_suite": typos,
        "keyword_expanded": keyword_exp,
        "paraphrase_expanded": para_exp,
    }
    paths = {}
    for name, corpus in datasets.items():
        path = tmp_path / f"{name}.jsonl"
        write_corpus(path, corpus, synth_schema)
        paths[name] = path
    out = tmp_path / "report.jsonl"
    code = cli_main(
        [
            "eval",
            "--schema", str(packaged("synth_schema.json")),
            *[f"--corpus={name}={path}" for name, path in paths.items()],
            "--variants", str(packaged("demo_variants.jsonl")),
            "--out", str(out),
            "--format", "jsonl",
        ]
    )
    capsys.readouterr()
    lines = [json.loads(l) for l in out.read_text().splitlines()]
    header = lines[0]
    cells = [l for l in lines if l["kind"] == "cell"]
    footer = lines[-1]
    ok = (
        code == 0
        and header["kind"] == "matrix"
        and len(header["variants"]) == 3
        and len(header["datasets"]) == 4
        and len(cells) == 12
        and footer["kind"] == "footer"
        and all(0.0 <= c["accuracy"] <= 1.0 for c in cells)
    )
    report(
        "P8 report structure",
        ok,
        f"{len(header['variants'])} variants x {len(header['datasets'])} datasets, "
        f"{len(cells)} cells, footer present",
    )
