"""Versioned binary serialization for fitted classifiers.

File layout (little-endian throughout):

    bytes 0-7    magic b"CALREXML"
    bytes 8-11   format version (u32)
    u64          header length, then that many bytes of UTF-8 JSON holding
                 the hyperparameters, class names, and vocabulary tokens
    u32          tensor count; for each tensor:
                     u16 name length + name bytes
                     u8 rank, then rank u64 dimension sizes
                     float64 raw data, C order

The same inputs always produce byte-identical files, which the pipeline
determinism guarantee relies on.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .encoder import EncoderParams, Vocabulary
from .training import ClassifierHead, MixupPenaltyClassifier

MAGIC = b"CALREXML"
VERSION = 1

_TENSOR_ORDER = ("embed", "w1", "b1", "w2", "b2", "w_out", "b_out", "head_weight", "head_bias")


class ModelFormatError(ValueError):
    """The file is not a readable model of a supported version."""


def _pack_tensor(name: str, arr: np.ndarray) -> bytes:
    data = np.ascontiguousarray(arr, dtype="<f8")
    name_b = name.encode("utf-8")
    parts = [struct.pack("<H", len(name_b)), name_b, struct.pack("<B", data.ndim)]
    parts.extend(struct.pack("<Q", d) for d in data.shape)
    parts.append(data.tobytes())
    return b"".join(parts)


def save_model(clf: MixupPenaltyClassifier, path) -> None:
    """Write a fitted classifier (hyperparameters, vocab, weights) to disk."""
    header = {
        "params": clf.get_params(),
        "classes": [str(c) for c in clf.classes_],
        "vocab": list(clf.vocab_.tokens),
    }
    header_b = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    tensors = dict(clf.params_.tensors())
    tensors["head_weight"] = clf.head_.weight
    tensors["head_bias"] = clf.head_.bias
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(header_b)))
        fh.write(header_b)
        fh.write(struct.pack("<I", len(_TENSOR_ORDER)))
        for name in _TENSOR_ORDER:
            fh.write(_pack_tensor(name, tensors[name]))


def _read_exact(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise ModelFormatError("model file truncated")
    return data


def load_model(path) -> MixupPenaltyClassifier:
    """Read a model file back into a fitted classifier."""
    path = Path(path)
    with open(path, "rb") as fh:
        if _read_exact(fh, len(MAGIC)) != MAGIC:
            raise ModelFormatError(f"{path}: bad magic, not a model file")
        (version,) = struct.unpack("<I", _read_exact(fh, 4))
        if version != VERSION:
            raise ModelFormatError(f"{path}: unsupported model version {version}")
        (header_len,) = struct.unpack("<Q", _read_exact(fh, 8))
        header = json.loads(_read_exact(fh, header_len).decode("utf-8"))
        (count,) = struct.unpack("<I", _read_exact(fh, 4))
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2))
            name = _read_exact(fh, name_len).decode("utf-8")
            (rank,) = struct.unpack("<B", _read_exact(fh, 1))
            shape = tuple(
                struct.unpack("<Q", _read_exact(fh, 8))[0] for _ in range(rank)
            )
            n_items = int(np.prod(shape, dtype=np.int64)) if shape else 1
            data = np.frombuffer(_read_exact(fh, 8 * n_items), dtype="<f8")
            tensors[name] = data.reshape(shape).copy()

    missing = [n for n in _TENSOR_ORDER if n not in tensors]
    if missing:
        raise ModelFormatError(f"{path}: missing tensors {missing}")
    clf = MixupPenaltyClassifier(**header["params"])
    clf.classes_ = np.array(header["classes"])
    tokens = tuple(header["vocab"])
    clf.vocab_ = Vocabulary(tokens, {tok: i for i, tok in enumerate(tokens)})
    clf.params_ = EncoderParams(
        embed=tensors["embed"],
        w1=tensors["w1"],
        b1=tensors["b1"],
        w2=tensors["w2"],
        b2=tensors["b2"],
        w_out=tensors["w_out"],
        b_out=tensors["b_out"],
    )
    clf.params_.check()
    clf.head_ = ClassifierHead(weight=tensors["head_weight"], bias=tensors["head_bias"])
    clf.log_ = []
    return clf
