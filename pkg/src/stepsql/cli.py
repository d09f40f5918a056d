"""Command-line entry point.

Subcommands: build (subtask record files), augment (corpus expansion),
ask (single-question inference), eval (variant x dataset matrix), and
synth (synthetic corpus plus its typo suite).  All outputs are
byte-reproducible under a fixed seed.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

from .augment import AugmentationConfig, RuleParaphraser, augment_corpus, perturb_columns
from .bridge import BridgeParaphraseProvider
from .errors import StageFailureError, StepSqlError
from .evaluation import ablation_matrix, evaluate, synth_corpus, typo_suite
from .pipeline import PipelineConfig, run
from .records import (
    build_column_records,
    build_sqlgen_record,
    build_table_records,
    build_valuefill_record,
    gold_column_refs,
    gold_tables,
    read_corpus,
    write_corpus,
    write_records,
)
from .schema import load_schema
from .sqlast import serialize, strip_values

SUBTASKS = ("table", "column", "sqlgen", "valuefill")


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--schema", required=True, help="schema JSON file")
    p.add_argument("--seed", type=int, default=0)


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beam", type=int, default=4)
    p.add_argument("--table-threshold", type=float, default=0.0)
    p.add_argument("--top-k", type=int, default=1)
    p.add_argument("--no-ner", action="store_true", help="disable entity substitution")
    p.add_argument(
        "--restore-mode",
        choices=("on", "off"),
        default="on",
        help="restore original entity spans into the final SQL",
    )
    p.add_argument(
        "--backend",
        action="append",
        default=[],
        metavar="STAGE=IMPL",
        help="per-stage backend, e.g. table=bridge or all=bridge",
    )
    p.add_argument("--bridge-url", default=None)


def _pipeline_config(args) -> PipelineConfig:
    backends = {}
    for spec in args.backend:
        if "=" not in spec:
            raise StepSqlError(f"bad --backend value {spec!r}, expected STAGE=IMPL")
        stage, impl = spec.split("=", 1)
        backends[stage] = impl
    return PipelineConfig(
        table_threshold=args.table_threshold,
        top_k=args.top_k,
        beam_width=args.beam,
        ner_enabled=not args.no_ner,
        restore_mode=args.restore_mode == "on",
        backends=backends,
        bridge_url=args.bridge_url,
    )


def cmd_build(args) -> int:
    schema = load_schema(args.schema)
    pairs = read_corpus(args.corpus, schema)
    records = []
    rng = random.Random(args.seed)
    for pair in pairs:
        if args.subtask == "table":
            recs = build_table_records(pair, schema)
            if args.negative_ratio is not None:
                recs = [
                    r
                    for r in recs
                    if r.label == 1 or rng.random() < args.negative_ratio
                ]
            records.extend(recs)
        elif args.subtask == "column":
            records.extend(build_column_records(pair, schema))
        elif args.subtask == "sqlgen":
            tables = gold_tables(pair.gold_sql)
            columns = [(t, c) for t, c in gold_column_refs(pair.gold_sql)]
            records.append(build_sqlgen_record(pair, schema, tables, columns))
        else:
            templated, assignment = strip_values(pair.gold_sql)
            records.append(build_valuefill_record(pair, templated, assignment))
    if args.perturb > 0 and args.subtask in ("column", "sqlgen"):
        config = AugmentationConfig(seed=args.seed)
        extra = []
        for i, rec in enumerate(records):
            for j, variant in enumerate(
                perturb_columns(rec, schema, config, seed=args.seed + i)
            ):
                if j < args.perturb:
                    extra.append(variant)
        print(f"perturbed records: {len(extra)}")
        records.extend(extra)
    write_records(args.out, records)
    print(f"wrote {len(records)} {args.subtask} records to {args.out}")
    return 0


def cmd_augment(args) -> int:
    schema = load_schema(args.schema)
    pairs = read_corpus(args.corpus, schema)
    provider = (
        BridgeParaphraseProvider(args.bridge_url)
        if args.paraphrase_provider == "bridge"
        else RuleParaphraser()
    )
    if args.paraphrase_provider == "bridge" and not args.bridge_url:
        raise StepSqlError("--paraphrase-provider bridge requires --bridge-url")
    config = AugmentationConfig(
        replace_keywords=not args.no_keywords,
        keyword_samples=args.keyword_samples,
        paraphrase=not args.no_paraphrase,
        similarity_threshold=args.paraphrase_threshold,
        multiplier=args.multiplier,
        seed=args.seed,
    )
    augmented, stats = augment_corpus(pairs, schema, config, provider)
    write_corpus(args.out, augmented, schema)
    print(f"originals: {stats.originals}")
    for name, count in stats.per_strategy.items():
        print(f"{name}: {count}")
    print(f"wrote {stats.emitted} pairs to {args.out}")
    return 0


def cmd_ask(args) -> int:
    schema = load_schema(args.schema)
    config = _pipeline_config(args)
    try:
        sql, trace = run(args.question, schema, config)
    except StageFailureError as e:
        _err(f"stage failure: {e.stage}: {e}")
        if args.verbose and e.trace is not None:
            print(e.trace.to_jsonl(), file=sys.stderr)
        return 1
    print(serialize(sql, schema))
    if args.verbose:
        print(trace.to_jsonl())
    return 0


def cmd_eval(args) -> int:
    schema = load_schema(args.schema)
    datasets = []
    for spec in args.corpus:
        if "=" in spec:
            name, path = spec.split("=", 1)
        else:
            name, path = Path(spec).stem, spec
        datasets.append((name, read_corpus(path, schema)))
    variants = []
    with open(args.variants, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            variants.append(
                (
                    obj.get("name", f"variant{lineno}"),
                    PipelineConfig(
                        table_threshold=obj.get("table_threshold", 0.0),
                        top_k=obj.get("top_k", 1),
                        beam_width=obj.get("beam", 4),
                        ner_enabled=obj.get("ner", True),
                        restore_mode=obj.get("restore", False),
                        backends=obj.get("backends", {}),
                        bridge_url=obj.get("bridge_url"),
                    ),
                )
            )
    report = ablation_matrix(variants, datasets, schema)
    text = report.render_jsonl() if args.format == "jsonl" else report.render_text()
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"wrote report to {args.out}")
    else:
        print(text)
    return 0


def cmd_synth(args) -> int:
    schema = load_schema(args.schema)
    pairs = synth_corpus(schema, args.n, seed=args.seed)
    write_corpus(args.out, pairs, schema)
    typos = typo_suite(pairs, schema, seed=args.seed)
    typo_out = args.typo_out or (str(args.out) + ".typos.jsonl")
    write_corpus(typo_out, typos, schema)
    print(f"wrote {len(pairs)} pairs to {args.out}")
    print(f"wrote {len(typos)} typo-suite pairs to {typo_out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stepsql",
        description="Stepwise text-to-SQL: dataset building, augmentation, "
        "inference, and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="write a subtask record file")
    _add_common(p)
    p.add_argument("--corpus", required=True, help="question-SQL pair JSONL")
    p.add_argument("--subtask", required=True, choices=SUBTASKS)
    p.add_argument("--out", required=True)
    p.add_argument(
        "--negative-ratio",
        type=float,
        default=None,
        help="keep this fraction of label-0 table records",
    )
    p.add_argument(
        "--perturb",
        type=int,
        default=0,
        help="append up to N column-perturbed variants per record",
    )
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("augment", help="expand a question-SQL corpus")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--keyword-samples", type=int, default=2)
    p.add_argument("--paraphrase-threshold", type=float, default=0.95)
    p.add_argument("--multiplier", type=int, default=None)
    p.add_argument("--no-keywords", action="store_true")
    p.add_argument("--no-paraphrase", action="store_true")
    p.add_argument("--paraphrase-provider", choices=("rule", "bridge"), default="rule")
    p.add_argument("--bridge-url", default=None)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("ask", help="translate one question")
    _add_common(p)
    p.add_argument("--question", required=True)
    p.add_argument("--verbose", action="store_true", help="print the full trace")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_ask)

    p = sub.add_parser("eval", help="variant x dataset accuracy matrix")
    _add_common(p)
    p.add_argument(
        "--corpus",
        action="append",
        required=True,
        metavar="NAME=PATH",
        help="dataset (repeatable)",
    )
    p.add_argument("--variants", required=True, help="variants JSONL file")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("text", "jsonl"), default="text")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic corpus + typo suite")
    _add_common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--typo-out", default=None)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StepSqlError as e:
        _err(str(e))
        return 1
    except OSError as e:
        _err(str(e))
        return 1


if __name__ == "__main__":
    sys.exit(main())
