import itertools
import random
from dataclasses import replace
from decimal import Decimal

import pytest

from stepsql.errors import BindingError, SqlSyntaxError, SqlTypeError, UnknownNameError
from stepsql.schema import is_decimal
from stepsql.sqlast import (
    ColumnRef,
    Condition,
    Literal,
    Placeholder,
    SelectItem,
    SqlQuery,
    TemplatedSql,
    ValueAssignment,
    canonical_number,
    canonicalize,
    fill_values,
    logic_form_equal,
    parse_sql,
    parse_templated,
    serialize,
    strip_values,
)
from tests.astgen import random_query, random_templated


class TestParse:
    def test_two_conjunct_fixture(self, fixture_schema):
        q = parse_sql(
            "select amount from power_bill where user_name = 'Alice' and month = 'March'",
            fixture_schema,
        )
        assert len(q.where_conjuncts) == 2
        assert q.select_items[0].column == ColumnRef("power_bill", "amount")
        assert q.where_conjuncts[0].value == Literal("Alice")

    def test_qualified_placeholder_form(self, fixture_schema):
        q = parse_sql(
            "select power_bill @ amount from power_bill where power_bill @ month = 'extra1'",
            fixture_schema,
        )
        assert q.where_conjuncts[0].value == Placeholder(1)

    def test_unknown_column(self, fixture_schema):
        with pytest.raises(UnknownNameError, match="ghost"):
            parse_sql("select ghost from power_bill", fixture_schema)

    def test_unknown_table(self, fixture_schema):
        with pytest.raises(UnknownNameError, match="nope"):
            parse_sql("select amount from nope", fixture_schema)

    def test_type_error_on_number_column(self, fixture_schema):
        with pytest.raises(SqlTypeError):
            parse_sql("select amount from power_bill where amount = 'abc'", fixture_schema)

    def test_syntax_error_carries_position(self, fixture_schema):
        with pytest.raises(SqlSyntaxError) as exc:
            parse_sql("select amount frm power_bill", fixture_schema)
        assert exc.value.position >= 0

    def test_ambiguous_plain_column_in_join(self, fixture_schema):
        with pytest.raises(UnknownNameError, match="ambiguous"):
            parse_sql(
                "select user_name from power_bill "
                "join user_info on power_bill @ user_name = user_info @ user_name",
                fixture_schema,
            )

    def test_aggregates_parse(self, fixture_schema):
        for agg in ("count", "sum", "avg", "max", "min"):
            q = parse_sql(f"select {agg}(amount) from power_bill", fixture_schema)
            assert q.select_items[0].aggregate == agg

    def test_order_and_limit(self, fixture_schema):
        q = parse_sql(
            "select amount from power_bill order by amount desc limit 3", fixture_schema
        )
        assert q.order_by.direction == "desc"
        assert q.limit == 3

    def test_limit_must_be_positive(self, fixture_schema):
        with pytest.raises(SqlSyntaxError):
            parse_sql("select amount from power_bill limit 0", fixture_schema)

    def test_escaped_quote_in_literal(self, fixture_schema):
        q = parse_sql(
            "select amount from power_bill where user_name = 'O''Brien'", fixture_schema
        )
        assert q.where_conjuncts[0].value == Literal("O'Brien")


class TestSerialize:
    def test_round_trip_fixture(self, fixture_schema):
        q = parse_sql(
            "select amount from power_bill where user_name = 'Alice' and month = 'March'",
            fixture_schema,
        )
        assert parse_sql(serialize(q, fixture_schema), fixture_schema) == q

    def test_count_rendering(self, fixture_schema):
        q = parse_sql("select count(amount) from power_bill", fixture_schema)
        assert "count(" in serialize(q, fixture_schema)

    def test_placeholder_rendering(self, fixture_schema):
        q = parse_sql(
            "select amount from power_bill where month = 'extra2'", fixture_schema
        )
        assert "'extra2'" in serialize(q, fixture_schema)

    def test_templated_serializes_qualified(self, fixture_schema):
        q = parse_sql(
            "select amount from power_bill where month = 'March'", fixture_schema
        )
        templated, _ = strip_values(q)
        text = serialize(templated)
        assert "power_bill @ amount" in text
        assert "power_bill @ month = 'extra1'" in text

    def test_final_sql_uses_plain_names_without_join(self, fixture_schema):
        q = parse_sql(
            "select amount from power_bill where month = 'March'", fixture_schema
        )
        assert serialize(q, fixture_schema) == (
            "select amount from power_bill where month = 'March'"
        )


class TestStripFill:
    def test_strip_two_literals(self, fixture_schema):
        q = parse_sql(
            "select amount from power_bill where user_name = 'Alice' and month = 'March'",
            fixture_schema,
        )
        templated, assignment = strip_values(q)
        assert templated.placeholder_indices() == [1, 2]
        assert assignment.as_dict() == {1: "Alice", 2: "March"}
        assert fill_values(templated, assignment) == q

    def test_empty_where(self, fixture_schema):
        q = parse_sql("select amount from power_bill", fixture_schema)
        templated, assignment = strip_values(q)
        assert templated.query == q
        assert assignment.as_dict() == {}

    def test_numeric_literal(self, fixture_schema):
        q = parse_sql("select amount from power_bill where amount > 100", fixture_schema)
        _, assignment = strip_values(q)
        assert assignment.as_dict() == {1: "100"}

    def test_missing_binding(self, fixture_schema):
        q = parse_sql(
            "select amount from power_bill where user_name = 'Alice' and month = 'March'",
            fixture_schema,
        )
        templated, _ = strip_values(q)
        with pytest.raises(BindingError, match="missing"):
            fill_values(templated, ValueAssignment.from_dict({1: "Alice"}))

    def test_extra_binding(self, fixture_schema):
        q = parse_sql("select amount from power_bill where month = 'March'", fixture_schema)
        templated, _ = strip_values(q)
        with pytest.raises(BindingError, match="no placeholder"):
            fill_values(templated, ValueAssignment.from_dict({1: "March", 3: "x"}))


class TestCanonical:
    def test_commuted_select_and_where(self, fixture_schema):
        a = parse_sql(
            "select user_name, amount from power_bill where month = 'March' and amount > 100",
            fixture_schema,
        )
        b = parse_sql(
            "select amount, user_name from power_bill where amount > 100 and month = 'March'",
            fixture_schema,
        )
        assert canonicalize(a, fixture_schema) == canonicalize(b, fixture_schema)
        assert logic_form_equal(a, b, fixture_schema)

    def test_idempotent(self, fixture_schema):
        rng = random.Random(11)
        for _ in range(100):
            q = random_query(fixture_schema, rng)
            c = canonicalize(q, fixture_schema)
            assert canonicalize(c, fixture_schema) == c

    def test_limit_differs(self, fixture_schema):
        a = parse_sql("select amount from power_bill limit 1", fixture_schema)
        b = parse_sql("select amount from power_bill limit 2", fixture_schema)
        assert not logic_form_equal(a, b, fixture_schema)

    def test_literal_mismatch(self, fixture_schema):
        a = parse_sql("select amount from power_bill where month = 'March'", fixture_schema)
        b = parse_sql("select amount from power_bill where month = 'April'", fixture_schema)
        assert not logic_form_equal(a, b, fixture_schema)

    def test_text_literals_case_sensitive(self, fixture_schema):
        a = parse_sql("select amount from power_bill where month = 'March'", fixture_schema)
        b = parse_sql("select amount from power_bill where month = 'march'", fixture_schema)
        assert not logic_form_equal(a, b, fixture_schema)

    def test_numeric_equality_on_number_columns(self, fixture_schema):
        a = parse_sql("select amount from power_bill where amount = 100", fixture_schema)
        b = parse_sql("select amount from power_bill where amount = 100.0", fixture_schema)
        assert logic_form_equal(a, b, fixture_schema)

    def test_canonicalize_preserves_equivalence(self, fixture_schema):
        rng = random.Random(5)
        for _ in range(50):
            p = random_query(fixture_schema, rng)
            g = random_query(fixture_schema, rng)
            want = logic_form_equal(p, g, fixture_schema)
            assert (
                logic_form_equal(
                    canonicalize(p, fixture_schema), canonicalize(g, fixture_schema), fixture_schema
                )
                == want
            )


def test_canonical_number():
    assert canonical_number("100.0") == "100"
    assert canonical_number("0.500") == "0.5"
    assert canonical_number("007") == "7"
    assert canonical_number("-0") == "0"
    assert canonical_number("-12.30") == "-12.3"


# ---------------------------------------------------------------------------
# property tests over the random generator
# ---------------------------------------------------------------------------


def test_round_trip_property(fixture_schema):
    rng = random.Random(1234)
    for _ in range(300):
        q = random_query(fixture_schema, rng)
        assert parse_sql(serialize(q, fixture_schema), fixture_schema) == q


def test_strip_fill_inverse_property(fixture_schema):
    rng = random.Random(98)
    for _ in range(300):
        q = random_query(fixture_schema, rng)
        templated, assignment = strip_values(q)
        assert fill_values(templated, assignment) == q


def test_templated_round_trip_property(fixture_schema):
    rng = random.Random(55)
    for _ in range(200):
        q = random_templated(fixture_schema, rng)
        text = serialize(TemplatedSql(q))
        assert parse_templated(text).query == q


def literal_equal(a, b, number_column: bool) -> bool:
    # comparison oracle: numeric compare on number columns, exact otherwise
    if isinstance(a, Placeholder) or isinstance(b, Placeholder):
        return a == b
    if number_column and is_decimal(a.value) and is_decimal(b.value):
        return Decimal(a.value) == Decimal(b.value)
    return a.value == b.value


def permutation_equivalent(p: SqlQuery, g: SqlQuery, schema) -> bool:
    """Exhaustive oracle: some reordering of select items, conjuncts, and
    joins makes the two queries element-wise identical."""

    def is_number(ref: ColumnRef) -> bool:
        col = schema.column(ref.table, ref.column)
        return col is not None and col.ctype == "number"

    def cond_equal(x: Condition, y: Condition) -> bool:
        return (
            x.column == y.column
            and x.op == y.op
            and literal_equal(x.value, y.value, is_number(x.column))
        )

    if p.from_table != g.from_table or p.order_by != g.order_by or p.limit != g.limit:
        return False
    if (
        len(p.select_items) != len(g.select_items)
        or len(p.where_conjuncts) != len(g.where_conjuncts)
        or len(p.joins) != len(g.joins)
    ):
        return False
    select_ok = any(
        list(perm) == list(g.select_items)
        for perm in itertools.permutations(p.select_items)
    )
    if not select_ok:
        return False
    join_ok = any(
        list(perm) == list(g.joins) for perm in itertools.permutations(p.joins)
    )
    if not join_ok:
        return False
    return any(
        all(cond_equal(x, y) for x, y in zip(perm, g.where_conjuncts))
        for perm in itertools.permutations(p.where_conjuncts)
    )


def test_logic_form_equal_matches_permutation_oracle(fixture_schema):
    rng = random.Random(77)
    queries = [random_query(fixture_schema, rng) for _ in range(40)]
    # seed some guaranteed-equal pairs by shuffling clause order
    for q in list(queries[:10]):
        items = list(q.select_items)
        conjuncts = list(q.where_conjuncts)
        rng.shuffle(items)
        rng.shuffle(conjuncts)
        queries.append(
            replace(q, select_items=tuple(items), where_conjuncts=tuple(conjuncts))
        )
    for a in queries:
        for b in queries:
            assert logic_form_equal(a, b, fixture_schema) == permutation_equivalent(
                a, b, fixture_schema
            ), f"disagreement on:\n  {a}\n  {b}"
