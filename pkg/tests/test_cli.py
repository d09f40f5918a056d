import json
from pathlib import Path

import pytest

from stepsql.cli import main
from tests.conftest import DATA_DIR, packaged

GOLDEN_PAIRS = DATA_DIR / "golden" / "pairs.jsonl"
FIXTURE_SCHEMA = str(packaged("fixture_schema.json"))
SYNTH_SCHEMA = str(packaged("synth_schema.json"))
VARIANTS = str(packaged("demo_variants.jsonl"))


def run_cli(*argv):
    return main(list(argv))


class TestBuild:
    def test_table_record_count(self, tmp_path, capsys):
        out = tmp_path / "table.jsonl"
        code = run_cli(
            "build",
            "--schema", FIXTURE_SCHEMA,
            "--corpus", str(GOLDEN_PAIRS),
            "--subtask", "table",
            "--out", str(out),
        )
        assert code == 0
        # count oracle: pairs x tables
        assert len(out.read_text().splitlines()) == 20 * 2
        assert "40 table records" in capsys.readouterr().out

    def test_unknown_subtask_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run_cli(
                "build",
                "--schema", FIXTURE_SCHEMA,
                "--corpus", str(GOLDEN_PAIRS),
                "--subtask", "nope",
                "--out", str(tmp_path / "x.jsonl"),
            )
        assert exc.value.code == 2

    def test_missing_schema_reports_error(self, tmp_path, capsys):
        code = run_cli(
            "build",
            "--schema", str(tmp_path / "absent.json"),
            "--corpus", str(GOLDEN_PAIRS),
            "--subtask", "table",
            "--out", str(tmp_path / "x.jsonl"),
        )
        assert code == 1
        assert capsys.readouterr().err.startswith("error:")

    def test_negative_ratio_downsamples(self, tmp_path):
        out = tmp_path / "table.jsonl"
        run_cli(
            "build",
            "--schema", FIXTURE_SCHEMA,
            "--corpus", str(GOLDEN_PAIRS),
            "--subtask", "table",
            "--out", str(out),
            "--negative-ratio", "0.0",
        )
        records = [json.loads(l) for l in out.read_text().splitlines()]
        assert all(r["label"] == 1 for r in records)

    def test_reproducible_outputs(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        for out in (a, b):
            run_cli(
                "build",
                "--schema", FIXTURE_SCHEMA,
                "--corpus", str(GOLDEN_PAIRS),
                "--subtask", "sqlgen",
                "--out", str(out),
                "--seed", "3",
            )
        assert a.read_bytes() == b.read_bytes()


class TestAsk:
    def test_fixture_question(self, capsys):
        code = run_cli(
            "ask", "--schema", SYNTH_SCHEMA, "--question", "total amount for Watkins"
        )
        assert code == 0
        out = capsys.readouterr().out.strip()
        assert out == "select sum(amount) from power_bill where customer = 'Watkins'"

    def test_stage_failure_nonzero_exit(self, capsys):
        code = run_cli("ask", "--schema", SYNTH_SCHEMA, "--question", "zzz qqq")
        assert code == 1
        err = capsys.readouterr().err
        assert err.startswith("error:")
        assert "table-selection" in err

    def test_verbose_prints_trace(self, capsys):
        code = run_cli(
            "ask",
            "--schema", SYNTH_SCHEMA,
            "--question", "show region for Hammond",
            "--verbose",
        )
        assert code == 0
        out = capsys.readouterr().out
        assert '"kind": "run"' in out and '"kind": "final"' in out

    def test_no_ner_flag_changes_typo_questions_only(self, capsys):
        run_cli(
            "ask",
            "--schema", SYNTH_SCHEMA,
            "--question", "show region for Hammond",
            "--no-ner",
        )
        clean_no_ner = capsys.readouterr().out.strip()
        run_cli("ask", "--schema", SYNTH_SCHEMA, "--question", "show region for Hammond")
        clean_ner = capsys.readouterr().out.strip()
        assert clean_no_ner == clean_ner
        run_cli(
            "ask",
            "--schema", SYNTH_SCHEMA,
            "--question", "show region for Hammomd",
            "--restore-mode", "off",
        )
        typo_ner = capsys.readouterr().out.strip()
        assert "Hammond" in typo_ner


class TestSynthAndEval:
    def test_synth_writes_both_suites(self, tmp_path, capsys):
        out = tmp_path / "corpus.jsonl"
        typo_out = tmp_path / "typos.jsonl"
        code = run_cli(
            "synth",
            "--schema", SYNTH_SCHEMA,
            "--n", "12",
            "--seed", "5",
            "--out", str(out),
            "--typo-out", str(typo_out),
        )
        assert code == 0
        assert len(out.read_text().splitlines()) == 12
        assert len(typo_out.read_text().splitlines()) == 12

    def test_synth_reproducible(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / f"{name}.jsonl"
            run_cli(
                "synth",
                "--schema", SYNTH_SCHEMA,
                "--n", "8",
                "--seed", "5",
                "--out", str(out),
                "--typo-out", str(tmp_path / f"{name}.typos.jsonl"),
            )
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_eval_matrix_and_formats(self, tmp_path, capsys):
        corpus = tmp_path / "corpus.jsonl"
        typos = tmp_path / "typos.jsonl"
        run_cli(
            "synth",
            "--schema", SYNTH_SCHEMA,
            "--n", "10",
            "--seed", "5",
            "--out", str(corpus),
            "--typo-out", str(typos),
        )
        capsys.readouterr()
        report = tmp_path / "report.jsonl"
        code = run_cli(
            "eval",
            "--schema", SYNTH_SCHEMA,
            "--corpus", f"clean={corpus}",
            "--corpus", f"typo={typos}",
            "--variants", VARIANTS,
            "--out", str(report),
            "--format", "jsonl",
        )
        assert code == 0
        lines = [json.loads(l) for l in report.read_text().splitlines()]
        header = lines[0]
        assert header["kind"] == "matrix"
        assert len(header["variants"]) == 3
        cells = [l for l in lines if l["kind"] == "cell"]
        assert len(cells) == 6
        assert lines[-1]["kind"] == "footer"

    def test_eval_missing_corpus_errors(self, tmp_path, capsys):
        code = run_cli(
            "eval",
            "--schema", SYNTH_SCHEMA,
            "--corpus", f"clean={tmp_path / 'absent.jsonl'}",
            "--variants", VARIANTS,
        )
        assert code == 1
        assert capsys.readouterr().err.startswith("error:")


class TestAugmentCli:
    def test_strategies_off_identity(self, tmp_path, capsys):
        out = tmp_path / "aug.jsonl"
        code = run_cli(
            "augment",
            "--schema", FIXTURE_SCHEMA,
            "--corpus", str(GOLDEN_PAIRS),
            "--out", str(out),
            "--no-keywords",
            "--no-paraphrase",
        )
        assert code == 0
        assert len(out.read_text().splitlines()) == 20

    def test_multiplier_reported_exactly(self, tmp_path, capsys):
        out = tmp_path / "aug.jsonl"
        code = run_cli(
            "augment",
            "--schema", FIXTURE_SCHEMA,
            "--corpus", str(GOLDEN_PAIRS),
            "--out", str(out),
            "--multiplier", "2",
            "--paraphrase-threshold", "0.5",
            "--keyword-samples", "4",
        )
        assert code == 0
        stdout = capsys.readouterr().out
        emitted = len(out.read_text().splitlines())
        assert f"wrote {emitted} pairs" in stdout
        assert emitted <= 2 * 20

    def test_fixed_seed_byte_identical(self, tmp_path):
        blobs = []
        for name in ("a", "b"):
            out = tmp_path / f"{name}.jsonl"
            run_cli(
                "augment",
                "--schema", FIXTURE_SCHEMA,
                "--corpus", str(GOLDEN_PAIRS),
                "--out", str(out),
                "--seed", "11",
                "--paraphrase-threshold", "0.5",
            )
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]
