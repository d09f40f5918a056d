"""Stepwise text-to-SQL: table selection, column selection, templated SQL
generation, and value filling, with entity substitution wrapped around the
pipeline."""

from .schema import Column, Question, Schema, Table, find_value, load_schema, tokenize
from .sqlast import (
    SqlQuery,
    TemplatedSql,
    ValueAssignment,
    canonicalize,
    fill_values,
    logic_form_equal,
    parse_sql,
    serialize,
    strip_values,
)
from .records import QuestionSqlPair, read_corpus, write_corpus
from .pipeline import PipelineConfig, run
from .evaluation import ablation_matrix, evaluate, split, synth_corpus, typo_suite

__version__ = "0.1.0"

__all__ = [
    "Column",
    "PipelineConfig",
    "Question",
    "QuestionSqlPair",
    "Schema",
    "SqlQuery",
    "Table",
    "TemplatedSql",
    "ValueAssignment",
    "ablation_matrix",
    "canonicalize",
    "evaluate",
    "fill_values",
    "find_value",
    "load_schema",
    "logic_form_equal",
    "parse_sql",
    "read_corpus",
    "run",
    "serialize",
    "split",
    "strip_values",
    "synth_corpus",
    "tokenize",
    "typo_suite",
    "write_corpus",
]
