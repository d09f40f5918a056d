"""Record-file readers for the four subtask formats.

These parse the line-delimited files the pipeline's ``build`` command
writes; the formats are the shared external contract between the two
packages.
"""

from __future__ import annotations

import json
import re
from pathlib import Path


class RecordFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


_TOKEN_RE = re.compile(r"[A-Za-z0-9_]+|[^\sA-Za-z0-9_]")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def _read_jsonl(path: str | Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as e:
                raise RecordFormatError(f"invalid JSON: {e.msg}", line=lineno) from e


def read_table_records(path: str | Path) -> list[tuple[str, int]]:
    out = []
    for lineno, obj in _read_jsonl(path):
        try:
            label = int(obj["label"])
            if label not in (0, 1):
                raise ValueError(f"label must be 0 or 1, got {label}")
            out.append((str(obj["input"]), label))
        except (KeyError, ValueError) as e:
            raise RecordFormatError(str(e), line=lineno) from e
    return out


def read_column_records(path: str | Path) -> list[tuple[str, list[str]]]:
    out = []
    for lineno, obj in _read_jsonl(path):
        try:
            labels = [str(l) for l in obj["labels"]]
            input_text = str(obj["input"])
        except KeyError as e:
            raise RecordFormatError(f"missing field {e.args[0]!r}", line=lineno) from e
        if len(labels) != len(tokenize(input_text)):
            raise RecordFormatError("labels do not align with input tokens", line=lineno)
        out.append((input_text, labels))
    return out


def read_generation_records(path: str | Path) -> list[tuple[str, str]]:
    out = []
    for lineno, obj in _read_jsonl(path):
        try:
            out.append((str(obj["input"]), str(obj["output"])))
        except KeyError as e:
            raise RecordFormatError(f"missing field {e.args[0]!r}", line=lineno) from e
    return out


def split_column_input(input_text: str) -> tuple[str, str, list[tuple[str, str]]]:
    """Split 'question extra0 table extra1 col type ...' into parts."""
    if " extra0 " not in input_text:
        raise RecordFormatError("column input needs an 'extra0' separator")
    question, rest = input_text.split(" extra0 ", 1)
    chunks = rest.split(" extra1 ")
    table = chunks[0]
    columns = []
    for chunk in chunks[1:]:
        fields = chunk.split(" ")
        if len(fields) != 2:
            raise RecordFormatError(f"malformed column entry {chunk!r}")
        columns.append((fields[0], fields[1]))
    return question, table, columns
