"""File formats: JSONL record streams and keyed text configuration.

Labeled datasets, unlabeled pools, prediction dumps, provenance logs, and
training logs are all JSON-lines files (one self-describing object per
line). Configuration files are keyed text:

    # comment
    beta = 0.3
    epochs = 12

Environment variables override individual config keys using the prefix
CALREX_ plus the upper-cased key name (for example CALREX_BETA=0.5).
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Iterable

import numpy as np

from .calibration import PredictionRecord, make_record
from .corpus import LabeledExample
from .selftrain import UnlabeledExample

ENV_PREFIX = "CALREX_"


class ConfigError(ValueError):
    """A configuration file line or value cannot be parsed."""


# ----------------------------------------------------------------------
# JSONL streams
# ----------------------------------------------------------------------

def write_jsonl(path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def read_jsonl(path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def write_examples(path, examples: Iterable[LabeledExample]) -> None:
    write_jsonl(
        path,
        ({"example_id": e.example_id, "text": e.text, "label": e.label} for e in examples),
    )


def read_examples(path) -> list[LabeledExample]:
    return [
        LabeledExample(row["example_id"], row["text"], row["label"])
        for row in read_jsonl(path)
    ]


def write_pool(path, pool: Iterable[UnlabeledExample]) -> None:
    write_jsonl(path, ({"example_id": p.example_id, "text": p.text} for p in pool))


def read_pool(path) -> list[UnlabeledExample]:
    return [UnlabeledExample(row["example_id"], row["text"]) for row in read_jsonl(path)]


def write_predictions(path, records: Iterable[PredictionRecord], classes) -> None:
    """Dump prediction records with probabilities keyed by class name."""
    classes = list(classes)
    rows = []
    for r in records:
        rows.append(
            {
                "example_id": r.example_id,
                "probs": {classes[i]: float(p) for i, p in enumerate(r.probs)},
                "gold": None if r.gold is None else classes[r.gold],
            }
        )
    write_jsonl(path, rows)


def read_predictions(path) -> tuple[list[PredictionRecord], list[str]]:
    """Load a prediction dump; class order is the sorted union of prob keys."""
    rows = read_jsonl(path)
    classes = sorted({c for row in rows for c in row["probs"]})
    index = {c: i for i, c in enumerate(classes)}
    records = []
    for row in rows:
        probs = np.zeros(len(classes))
        for c, p in row["probs"].items():
            probs[index[c]] = p
        gold = None if row.get("gold") is None else index[row["gold"]]
        records.append(make_record(row["example_id"], probs, gold))
    return records, classes


# ----------------------------------------------------------------------
# Keyed text configuration
# ----------------------------------------------------------------------

def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = stripped.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def load_config(path=None, env: dict | None = None) -> dict[str, str]:
    """Read a keyed config file and apply CALREX_* environment overrides."""
    values: dict[str, str] = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        values = parse_config_text(text, source=str(path))
    env = os.environ if env is None else env
    for name, value in env.items():
        if name.startswith(ENV_PREFIX):
            values[name[len(ENV_PREFIX) :].lower()] = value
    return values
