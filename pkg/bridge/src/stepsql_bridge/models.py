"""Trainable stand-in models for the four stages, with JSON artifacts.

Classification and tagging train hashed-feature logistic regressions;
the two generation stages use a nearest-neighbor memorizer over the
training records.  Transformer hyperparameters (12 encoders, 12 attention
heads, 768 hidden dims) ride along in the training config as the defaults
a transformer backend would consume; the stand-ins ignore them.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .records import (
    read_column_records,
    read_generation_records,
    read_table_records,
    split_column_input,
    tokenize,
)
from .wire import value_output_ok

MODEL_VERSION_PREFIX = "finetuned"


@dataclass
class TrainingConfig:
    epochs: int = 300
    learning_rate: float = 0.5
    hash_dim: int = 4096
    seed: int = 0
    # consumed only by transformer backends; documented defaults
    transformer: dict = field(
        default_factory=lambda: {"encoders": 12, "attention_heads": 12, "hidden_dim": 768}
    )

    @classmethod
    def load(cls, path: str | Path | None) -> "TrainingConfig":
        if path is None:
            return cls()
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        base = cls()
        for key, value in doc.items():
            if hasattr(base, key):
                setattr(base, key, value)
        return base


def _bucket(token: str, dim: int) -> int:
    return zlib.crc32(token.encode("utf-8")) % dim


def featurize(tokens: list[str], dim: int) -> np.ndarray:
    x = np.zeros(dim, dtype=np.float64)
    for tok in tokens:
        x[_bucket(tok, dim)] += 1.0
    return x


def _table_tokens(record_input: str) -> list[str]:
    toks = [t.casefold() for t in tokenize(record_input)]
    table = toks[-1] if toks else ""
    crossed = [f"{table}|{t}" for t in toks[:-1]]
    return toks + crossed


def _column_tokens(question: str, column: str, ctype: str) -> list[str]:
    qtoks = [t.casefold() for t in tokenize(question)]
    base = [f"col={column.casefold()}", f"type={ctype.casefold()}"]
    crossed = [f"{column.casefold()}|{t}" for t in qtoks]
    return base + crossed


class LogisticModel:
    def __init__(self, dim: int, weights=None, bias: float = 0.0):
        self.dim = dim
        self.weights = (
            np.asarray(weights, dtype=np.float64) if weights is not None else np.zeros(dim)
        )
        self.bias = float(bias)

    def predict(self, x: np.ndarray) -> float:
        z = float(x @ self.weights + self.bias)
        return float(1.0 / (1.0 + np.exp(-z)))

    def fit(self, xs: np.ndarray, ys: np.ndarray, config: TrainingConfig) -> dict:
        n = xs.shape[0]
        for _ in range(config.epochs):
            z = xs @ self.weights + self.bias
            p = 1.0 / (1.0 + np.exp(-z))
            grad_w = xs.T @ (p - ys) / n
            grad_b = float(np.mean(p - ys))
            self.weights -= config.learning_rate * grad_w
            self.bias -= config.learning_rate * grad_b
        z = xs @ self.weights + self.bias
        p = 1.0 / (1.0 + np.exp(-z))
        predictions = (p >= 0.5).astype(np.float64)
        accuracy = float(np.mean(predictions == ys))
        loss = float(
            -np.mean(ys * np.log(p + 1e-12) + (1 - ys) * np.log(1 - p + 1e-12))
        )
        return {"train_accuracy": accuracy, "train_loss": loss, "samples": n}


def majority_baseline(labels: list[int]) -> float:
    """Accuracy of always predicting the most frequent class."""
    if not labels:
        return 0.0
    ones = sum(labels)
    return max(ones, len(labels) - ones) / len(labels)


# ---------------------------------------------------------------------------
# Stage models
# ---------------------------------------------------------------------------


class TableModel:
    kind = "table-logistic"

    def __init__(self, dim: int, logistic: LogisticModel):
        self.dim = dim
        self.logistic = logistic

    def score(self, record_input: str) -> float:
        return self.logistic.predict(featurize(_table_tokens(record_input), self.dim))

    @classmethod
    def train(cls, records_path: str | Path, config: TrainingConfig) -> tuple["TableModel", dict]:
        records = read_table_records(records_path)
        xs = np.stack([featurize(_table_tokens(i), config.hash_dim) for i, _ in records])
        ys = np.array([l for _, l in records], dtype=np.float64)
        logistic = LogisticModel(config.hash_dim)
        stats = logistic.fit(xs, ys, config)
        stats["majority_baseline"] = majority_baseline([l for _, l in records])
        return cls(config.hash_dim, logistic), stats

    def to_obj(self) -> dict:
        return {
            "kind": self.kind,
            "dim": self.dim,
            "weights": self.logistic.weights.tolist(),
            "bias": self.logistic.bias,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "TableModel":
        return cls(obj["dim"], LogisticModel(obj["dim"], obj["weights"], obj["bias"]))


class ColumnModel:
    kind = "column-logistic"

    def __init__(self, dim: int, logistic: LogisticModel):
        self.dim = dim
        self.logistic = logistic

    def tag(self, record_input: str) -> list[tuple[str, bool]]:
        question, _table, columns = split_column_input(record_input)
        return [
            (
                name,
                self.logistic.predict(featurize(_column_tokens(question, name, ctype), self.dim))
                >= 0.5,
            )
            for name, ctype in columns
        ]

    @classmethod
    def train(cls, records_path: str | Path, config: TrainingConfig) -> tuple["ColumnModel", dict]:
        examples: list[tuple[list[str], int]] = []
        for input_text, labels in read_column_records(records_path):
            question, _table, columns = split_column_input(input_text)
            separator_labels = [l for l in labels if l != "O"]
            if len(separator_labels) != len(columns):
                continue
            for (name, ctype), lab in zip(columns, separator_labels):
                examples.append((_column_tokens(question, name, ctype), 1 if lab == "B-C" else 0))
        xs = np.stack([featurize(toks, config.hash_dim) for toks, _ in examples])
        ys = np.array([l for _, l in examples], dtype=np.float64)
        logistic = LogisticModel(config.hash_dim)
        stats = logistic.fit(xs, ys, config)
        stats["majority_baseline"] = majority_baseline([l for _, l in examples])
        return cls(config.hash_dim, logistic), stats

    def to_obj(self) -> dict:
        return {
            "kind": self.kind,
            "dim": self.dim,
            "weights": self.logistic.weights.tolist(),
            "bias": self.logistic.bias,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "ColumnModel":
        return cls(obj["dim"], LogisticModel(obj["dim"], obj["weights"], obj["bias"]))


class RetrievalModel:
    """Nearest-neighbor memorizer: rank stored outputs by token Jaccard."""

    def __init__(self, kind: str, examples: list[tuple[str, str]]):
        self.kind = kind
        self.examples = examples
        self._sets = [frozenset(t.casefold() for t in tokenize(i)) for i, _ in examples]

    def retrieve(self, record_input: str, k: int) -> list[tuple[str, float]]:
        query = frozenset(t.casefold() for t in tokenize(record_input))
        scored: list[tuple[float, int, str]] = []
        for idx, ((input_text, output), toks) in enumerate(zip(self.examples, self._sets)):
            if input_text == record_input:
                similarity = 1.0
            elif not query or not toks:
                similarity = 0.0
            else:
                similarity = len(query & toks) / len(query | toks)
            scored.append((similarity, idx, output))
        scored.sort(key=lambda s: (-s[0], s[1]))
        out: list[tuple[str, float]] = []
        for similarity, _, output in scored:
            if any(o == output for o, _ in out):
                continue
            out.append((output, similarity))
            if len(out) == k:
                break
        return out

    @classmethod
    def train(
        cls, kind: str, records_path: str | Path, config: TrainingConfig
    ) -> tuple["RetrievalModel", dict]:
        examples = read_generation_records(records_path)
        model = cls(kind, examples)
        # memorizer: training-set accuracy is exactness of top-1 retrieval
        hits = sum(1 for i, o in examples if model.retrieve(i, 1)[0][0] == o)
        stats = {"train_accuracy": hits / len(examples) if examples else 0.0, "samples": len(examples)}
        del config
        return model, stats

    def to_obj(self) -> dict:
        return {"kind": self.kind, "examples": [[i, o] for i, o in self.examples]}

    @classmethod
    def from_obj(cls, obj: dict) -> "RetrievalModel":
        return cls(obj["kind"], [(i, o) for i, o in obj["examples"]])


class ValueFillModel(RetrievalModel):
    """Retrieval plus the output-grammar post-filter."""

    def fill(self, record_input: str) -> str:
        for output, _ in self.retrieve(record_input, 4):
            if value_output_ok(output):
                return output
        return ""


STAGE_KINDS = {
    "table": TableModel,
    "column": ColumnModel,
    "sqlgen": RetrievalModel,
    "valuefill": ValueFillModel,
}


def finetune(
    stage: str,
    records_path: str | Path,
    out_path: str | Path,
    config: TrainingConfig | None = None,
) -> dict:
    """Train the stage's stand-in model and write a loadable artifact.

    Returns the training stats (logged into the artifact as well).
    """
    if stage not in STAGE_KINDS:
        raise ValueError(f"unknown stage {stage!r}")
    config = config or TrainingConfig()
    if stage == "table":
        model, stats = TableModel.train(records_path, config)
    elif stage == "column":
        model, stats = ColumnModel.train(records_path, config)
    elif stage == "sqlgen":
        model, stats = RetrievalModel.train("sqlgen-retrieval", records_path, config)
    else:
        model, stats = ValueFillModel.train("valuefill-retrieval", records_path, config)
    artifact = {
        "stage": stage,
        "model_version": f"{MODEL_VERSION_PREFIX}-{stage}-v1",
        "model": model.to_obj(),
        "training": {**stats, "config": asdict(config)},
    }
    Path(out_path).write_text(json.dumps(artifact, ensure_ascii=False) + "\n", encoding="utf-8")
    return stats


def load_artifact(path: str | Path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    stage = doc["stage"]
    cls = STAGE_KINDS[stage]
    if stage == "valuefill":
        model = ValueFillModel.from_obj(doc["model"])
    elif stage == "sqlgen":
        model = RetrievalModel.from_obj(doc["model"])
    else:
        model = cls.from_obj(doc["model"])
    return stage, doc["model_version"], model
