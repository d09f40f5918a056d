import pytest

from stepsql.contracts import (
    CandidateSql,
    ColumnDecision,
    ColumnTagging,
    TableScore,
    binding_maps,
    check_candidates,
    check_column_tagging,
    check_table_score,
    resolve_candidate,
    validity_filter,
)
from stepsql.errors import ContractViolationError, NoValidCandidatesError
from stepsql.sqlast import serialize

GEN_INPUT = (
    "ask extra50 extra54 power_bill "
    "extra51 extra0 amount extra51 extra1 user_name extra51 extra2 month "
    "extra53 ask"
)


class TestContractChecks:
    def test_score_range(self):
        with pytest.raises(ContractViolationError):
            check_table_score(TableScore(table="t", score=1.5), "t")

    def test_score_table_must_match_record(self):
        with pytest.raises(ContractViolationError):
            check_table_score(TableScore(table="u", score=0.5), "t")

    def test_tagging_must_cover_listed_columns(self):
        tagging = ColumnTagging(decisions=(ColumnDecision("a", True),))
        with pytest.raises(ContractViolationError):
            check_column_tagging(tagging, ["a", "b"])

    def test_candidates_beam_bound(self):
        cands = [CandidateSql(output="x", score=0.9), CandidateSql(output="y", score=0.8)]
        with pytest.raises(ContractViolationError):
            check_candidates(cands, beam_width=1)

    def test_candidates_sorted(self):
        cands = [CandidateSql(output="x", score=0.1), CandidateSql(output="y", score=0.8)]
        with pytest.raises(ContractViolationError):
            check_candidates(cands, beam_width=4)


class TestBindingMaps:
    def test_maps_recovered_from_input(self):
        table_map, column_map = binding_maps(GEN_INPUT)
        assert table_map == {"extra54": "power_bill"}
        assert column_map == {
            "extra0": ("power_bill", "amount"),
            "extra1": ("power_bill", "user_name"),
            "extra2": ("power_bill", "month"),
        }


class TestValidityFilter:
    def test_unbound_identifier_removed(self, fixture_schema):
        cands = [
            CandidateSql(output="select extra54 @ extra99 from extra54", score=0.9),
            CandidateSql(output="select extra54 @ extra0 from extra54", score=0.5),
        ]
        kept = validity_filter(cands, GEN_INPUT, fixture_schema)
        assert [c.output for c in kept] == ["select extra54 @ extra0 from extra54"]

    def test_bound_candidate_retained(self, fixture_schema):
        cands = [CandidateSql(output="select extra54 @ extra0 from extra54", score=1.0)]
        assert validity_filter(cands, GEN_INPUT, fixture_schema) == cands

    def test_unparseable_candidate_removed(self, fixture_schema):
        cands = [
            CandidateSql(output="select select from from", score=0.9),
            CandidateSql(output="select extra54 @ extra0 from extra54", score=0.5),
        ]
        kept = validity_filter(cands, GEN_INPUT, fixture_schema)
        assert len(kept) == 1

    def test_literal_values_fail_templated_grammar(self, fixture_schema):
        cands = [
            CandidateSql(
                output="select extra54 @ extra0 from extra54 "
                "where extra54 @ extra1 = 'Alice'",
                score=0.9,
            )
        ]
        with pytest.raises(NoValidCandidatesError):
            validity_filter(cands, GEN_INPUT, fixture_schema)

    def test_all_invalid_signals_empty_result(self, fixture_schema):
        cands = [CandidateSql(output="select extra99 @ extra98 from extra99", score=0.9)]
        with pytest.raises(NoValidCandidatesError) as exc:
            validity_filter(cands, GEN_INPUT, fixture_schema)
        assert exc.value.rejected == cands

    def test_empty_input_passes_through(self, fixture_schema):
        assert validity_filter([], GEN_INPUT, fixture_schema) == []

    def test_order_preserving_and_idempotent(self, fixture_schema):
        cands = [
            CandidateSql(
                output="select extra54 @ extra0 from extra54 "
                "where extra54 @ extra1 = 'extra1'",
                score=0.9,
            ),
            CandidateSql(output="select extra54 @ extra0 from extra54", score=0.4),
        ]
        once = validity_filter(cands, GEN_INPUT, fixture_schema)
        assert once == cands
        assert validity_filter(once, GEN_INPUT, fixture_schema) == once

    def test_resolution_after_substitution(self, fixture_schema):
        # extra2 is bound to month; qualifying it with the wrong table must fail
        bad = CandidateSql(output="select extra99 @ extra2 from extra54", score=0.9)
        assert resolve_candidate(bad, GEN_INPUT, fixture_schema) is None
        good = CandidateSql(output="select extra54 @ extra2 from extra54", score=0.9)
        resolved = resolve_candidate(good, GEN_INPUT, fixture_schema)
        assert serialize(resolved) == "select power_bill @ month from power_bill"
