import pytest

from stepsql.augment import (
    AugmentationConfig,
    RuleParaphraser,
    augment_corpus,
    jaccard_similarity,
    paraphrase,
    perturb_columns,
    replace_keywords,
)
from stepsql.errors import ProviderUnavailableError
from stepsql.records import (
    QuestionSqlPair,
    build_column_records,
    build_sqlgen_record,
    gold_column_refs,
    gold_tables,
    validate_column_record,
    validate_sqlgen_record,
)
from stepsql.schema import Question
from stepsql.sqlast import logic_form_equal, parse_sql, resolve_query, serialize, strip_values


def pair(schema, question, sql):
    return QuestionSqlPair(
        question=Question.from_text(question),
        gold_sql=parse_sql(sql, schema),
        db_name=schema.db_name,
    )


class TestReplaceKeywords:
    def test_simultaneous_substitution(self, fixture_schema):
        p = pair(
            fixture_schema,
            "show amount for March",
            "select amount from power_bill where month = 'March'",
        )
        variants = replace_keywords(p, fixture_schema, n=5, seed=1)
        assert variants, "expected at least one variant"
        for v in variants:
            new_value = v.gold_sql.where_conjuncts[0].value.value
            assert new_value != "March"
            assert new_value in fixture_schema.column("power_bill", "month").values
            assert new_value in v.question.text
            assert "March" not in v.question.text

    def test_literal_absent_from_question_skipped(self, fixture_schema):
        p = pair(
            fixture_schema,
            "show the bill",
            "select amount from power_bill where month = 'March'",
        )
        assert replace_keywords(p, fixture_schema, n=5, seed=1) == []

    def test_single_value_column_yields_nothing(self, fixture_schema):
        # a column with one distinct value has no alternative to swap in
        from stepsql.schema import Column, Schema, Table

        schema = Schema(
            db_name="d",
            tables=(
                Table(
                    name="t",
                    columns=(
                        Column(name="a", ctype="text", values=("only",)),
                        Column(name="b", ctype="text", values=("x", "y")),
                    ),
                ),
            ),
        )
        p = pair(schema, "show b for only", "select b from t where a = 'only'")
        assert replace_keywords(p, schema, n=5, seed=1) == []

    def test_templates_stay_logic_form_equal(self, fixture_schema):
        p = pair(
            fixture_schema,
            "show amount for Alice in March",
            "select amount from power_bill where user_name = 'Alice' and month = 'March'",
        )
        for v in replace_keywords(p, fixture_schema, n=10, seed=2):
            ta, _ = strip_values(p.gold_sql)
            tb, _ = strip_values(v.gold_sql)
            assert logic_form_equal(ta.query, tb.query, fixture_schema)

    def test_seeded_reproducibility(self, fixture_schema):
        p = pair(
            fixture_schema,
            "show amount for Alice in March",
            "select amount from power_bill where user_name = 'Alice' and month = 'March'",
        )
        a = replace_keywords(p, fixture_schema, n=2, seed=42)
        b = replace_keywords(p, fixture_schema, n=2, seed=42)
        assert [(v.question.text, serialize(v.gold_sql, fixture_schema)) for v in a] == [
            (v.question.text, serialize(v.gold_sql, fixture_schema)) for v in b
        ]


class TestPerturbColumns:
    def _column_record(self, fixture_schema):
        p = pair(
            fixture_schema,
            "total amount for Alice",
            "select sum(amount) from power_bill where user_name = 'Alice'",
        )
        (rec,) = build_column_records(p, fixture_schema)
        return rec

    def test_variants_stay_consistent(self, fixture_schema):
        rec = self._column_record(fixture_schema)
        config = AugmentationConfig(column_add_p=1.0, column_delete_p=1.0, column_replace_p=1.0)
        variants = perturb_columns(rec, fixture_schema, config, seed=4)
        assert variants
        from stepsql.records import parse_column_input

        for v in variants:
            validate_column_record(v)
            # gold columns survive every perturbation
            hits = {
                col
                for (col, _), lab in zip(
                    parse_column_input(v.input)[2],
                    [l for l in v.labels if l != "O"],
                )
                if lab == "B-C"
            }
            assert {"amount", "user_name"} <= hits

    def test_delete_only_removes_non_gold(self, fixture_schema):
        rec = self._column_record(fixture_schema)
        config = AugmentationConfig(column_add_p=0.0, column_delete_p=1.0, column_replace_p=0.0)
        for v in perturb_columns(rec, fixture_schema, config, seed=4):
            assert "month" not in v.input
            assert "amount" in v.input and "user_name" in v.input

    def test_added_column_labelled_bn(self, fixture_schema):
        rec = self._column_record(fixture_schema)
        config = AugmentationConfig(column_add_p=1.0, column_delete_p=0.0, column_replace_p=0.0)
        variants = perturb_columns(rec, fixture_schema, config, seed=4)
        assert variants
        v = variants[0]
        assert "region" in v.input  # only foreign column available
        from stepsql.records import parse_column_input

        _, _, columns = parse_column_input(v.input)
        labels = [l for l in v.labels if l != "O"]
        assert labels[[c for c, _ in columns].index("region")] == "B-N"

    def test_sqlgen_record_perturbation_rebuilds_output(self, fixture_schema):
        p = pair(
            fixture_schema,
            "total amount for Alice",
            "select sum(amount) from power_bill where user_name = 'Alice'",
        )
        rec = build_sqlgen_record(
            p, fixture_schema, gold_tables(p.gold_sql), gold_column_refs(p.gold_sql)
        )
        config = AugmentationConfig(column_add_p=1.0, column_delete_p=1.0, column_replace_p=1.0)
        variants = perturb_columns(rec, fixture_schema, config, seed=4)
        assert variants
        for v in variants:
            validate_sqlgen_record(v)


class TestParaphrase:
    def test_jaccard_identity(self):
        assert jaccard_similarity("show amount", "show amount") == 1.0

    def test_rule_paraphraser_deterministic_with_derived_scores(self):
        question = "show amount for Alice"
        provider = RuleParaphraser()
        outs = provider.paraphrases(question)
        assert outs == provider.paraphrases(question)
        # oracle: token-set intersection computed by hand
        # {show, amount, for, alice} vs {please, show, amount, for, alice} -> 4/5
        by_text = dict(outs)
        assert by_text["please show amount for Alice"] == pytest.approx(4 / 5)
        # verb swap keeps set size: {list, amount, for, alice} -> 3/5
        assert by_text["list amount for Alice"] == pytest.approx(3 / 5)

    def test_empty_question_no_output(self):
        assert RuleParaphraser().paraphrases("") == []

    def test_threshold_strictly_greater(self, fixture_schema):
        p = pair(
            fixture_schema,
            "show amount for Alice",
            "select amount from power_bill where user_name = 'Alice'",
        )

        class Fixed:
            def paraphrases(self, q):
                return [("ok variant for Alice", 0.97), ("weak one for Alice", 0.90)]

        kept = paraphrase(p, Fixed(), threshold=0.95)
        assert [v.question.text for v in kept] == ["ok variant for Alice"]
        assert paraphrase(p, Fixed(), threshold=0.97) == []

    def test_value_anchoring_discards_lossy_paraphrase(self, fixture_schema):
        p = pair(
            fixture_schema,
            "show amount for Alice in March",
            "select amount from power_bill where user_name = 'Alice' and month = 'March'",
        )

        class DropsMarch:
            def paraphrases(self, q):
                return [("show amount for Alice", 0.99)]

        assert paraphrase(p, DropsMarch(), threshold=0.5) == []

    def test_provider_failure_wrapped(self, fixture_schema):
        p = pair(
            fixture_schema,
            "show amount for Alice",
            "select amount from power_bill where user_name = 'Alice'",
        )

        class Broken:
            def paraphrases(self, q):
                raise RuntimeError("socket closed")

        with pytest.raises(ProviderUnavailableError):
            paraphrase(p, Broken(), threshold=0.5)


class TestAugmentCorpus:
    def test_validity_closure(self, fixture_schema, golden_dir):
        from stepsql.records import read_corpus

        pairs = read_corpus(golden_dir / "pairs.jsonl", fixture_schema)
        config = AugmentationConfig(similarity_threshold=0.6, seed=1)
        augmented, stats = augment_corpus(pairs, fixture_schema, config)
        assert stats.emitted == len(augmented)
        for p in augmented:
            # parses, resolves, and re-validates against the schema
            reparsed = parse_sql(serialize(p.gold_sql, fixture_schema), fixture_schema)
            assert resolve_query(reparsed, fixture_schema) == reparsed

    def test_fixed_seed_bit_reproducible(self, fixture_schema, golden_dir, tmp_path):
        from stepsql.records import read_corpus, write_corpus

        pairs = read_corpus(golden_dir / "pairs.jsonl", fixture_schema)
        config = AugmentationConfig(similarity_threshold=0.6, seed=9)
        out1, _ = augment_corpus(pairs, fixture_schema, config)
        out2, _ = augment_corpus(pairs, fixture_schema, config)
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_corpus(a, out1, fixture_schema)
        write_corpus(b, out2, fixture_schema)
        assert a.read_bytes() == b.read_bytes()

    def test_multiplier_caps_output(self, fixture_schema, golden_dir):
        from stepsql.records import read_corpus

        pairs = read_corpus(golden_dir / "pairs.jsonl", fixture_schema)
        config = AugmentationConfig(similarity_threshold=0.5, multiplier=2, seed=1)
        augmented, stats = augment_corpus(pairs, fixture_schema, config)
        assert len(augmented) <= 2 * len(pairs)
        assert stats.emitted == len(augmented)

    def test_all_strategies_off_is_identity(self, fixture_schema, golden_dir):
        from stepsql.records import read_corpus

        pairs = read_corpus(golden_dir / "pairs.jsonl", fixture_schema)
        config = AugmentationConfig(replace_keywords=False, paraphrase=False)
        augmented, stats = augment_corpus(pairs, fixture_schema, config)
        assert len(augmented) == len(pairs)
        assert stats.per_strategy == {"keyword_replacement": 0, "paraphrase": 0}
