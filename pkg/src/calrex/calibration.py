"""Binned confidence-calibration metrics for multi-class classifiers.

Predictions are grouped into M equal-width reliability bins over their
confidence (the maximum class probability). Bin boundaries are owned by the
lower bin: bin 0 covers [0, 1/M] and bin m covers (m/M, (m+1)/M] for m >= 1.
From the per-bin accuracy acc(B_m) and mean confidence conf(B_m) we compute

    ECE = sum_m (|B_m| / n) * |acc(B_m) - conf(B_m)|
    OE  = sum_m (|B_m| / n) * conf(B_m) * max(conf(B_m) - acc(B_m), 0)

Empty bins carry zero accuracy, zero confidence, and zero weight. OE <= ECE
always holds (term-wise, since conf(B_m) <= 1).

Alongside the binned metrics, reports carry overall accuracy, mean confidence,
and micro-averaged precision/recall/F1 over the positive (non-"false") classes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

NEGATIVE_LABEL = "false"


class MissingGold(ValueError):
    """A metric that needs gold labels was given a record without one."""


class EmptyInput(ValueError):
    """A report was requested for an empty record collection."""


@dataclass(frozen=True)
class PredictionRecord:
    """One classifier output: full probability vector plus derived fields.

    `predicted` is the argmax of `probs` (ties resolve to the lowest index)
    and `confidence` equals `probs[predicted]`. `gold` is the reference class
    index, or None for unlabeled pool predictions.
    """

    example_id: str
    probs: np.ndarray
    predicted: int
    confidence: float
    gold: int | None = None


def make_record(example_id: str, probs, gold: int | None = None) -> PredictionRecord:
    """Build a PredictionRecord, deriving predicted class and confidence."""
    p = np.asarray(probs, dtype=np.float64)
    predicted = int(np.argmax(p))
    return PredictionRecord(example_id, p, predicted, float(p[predicted]), gold)


@dataclass(frozen=True)
class BinStats:
    bin_index: int
    count: int
    accuracy: float
    mean_confidence: float


@dataclass
class CalibrationReport:
    bins: list[BinStats]
    ece: float
    oe: float
    overall_accuracy: float
    overall_mean_confidence: float
    n: int
    histogram: list[int] = field(default_factory=list)
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None


def assign_bins(confidences, n_bins: int) -> np.ndarray:
    """Map confidences in [0, 1] to bin indices in [0, n_bins).

    Boundaries belong to the lower bin: bin 0 is [0, 1/M], bin m is
    (m/M, (m+1)/M]. A confidence of exactly 1.0 lands in the last bin.
    """
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    conf = np.asarray(confidences, dtype=np.float64)
    edges = np.arange(1, n_bins) / n_bins
    return np.searchsorted(edges, conf, side="left")


def _require_gold(records: Sequence[PredictionRecord]) -> tuple[np.ndarray, np.ndarray]:
    conf = np.empty(len(records))
    correct = np.empty(len(records))
    for i, r in enumerate(records):
        if r.gold is None:
            raise MissingGold(f"record {r.example_id!r} has no gold label")
        conf[i] = r.confidence
        correct[i] = 1.0 if r.predicted == r.gold else 0.0
    return conf, correct


def bin_stats(records: Sequence[PredictionRecord], n_bins: int) -> list[BinStats]:
    """Per-bin counts, accuracy, and mean confidence over the records."""
    conf, correct = _require_gold(records)
    idx = assign_bins(conf, n_bins)
    counts = np.bincount(idx, minlength=n_bins).astype(np.int64)
    conf_sum = np.bincount(idx, weights=conf, minlength=n_bins)
    correct_sum = np.bincount(idx, weights=correct, minlength=n_bins)
    stats = []
    for m in range(n_bins):
        c = int(counts[m])
        acc = correct_sum[m] / c if c else 0.0
        mean_conf = conf_sum[m] / c if c else 0.0
        stats.append(BinStats(m, c, float(acc), float(mean_conf)))
    return stats


def ece(records: Sequence[PredictionRecord], n_bins: int = 10) -> float:
    """Expected calibration error: bin-weighted |acc - conf| gap."""
    stats = bin_stats(records, n_bins)
    n = sum(b.count for b in stats)
    if n == 0:
        return 0.0
    return float(
        sum(b.count / n * abs(b.accuracy - b.mean_confidence) for b in stats)
    )


def oe(records: Sequence[PredictionRecord], n_bins: int = 10) -> float:
    """Over-confidence error: bin-weighted, confidence-scaled positive gap.

    Under-confident bins (acc >= conf) contribute nothing.
    """
    stats = bin_stats(records, n_bins)
    n = sum(b.count for b in stats)
    if n == 0:
        return 0.0
    return float(
        sum(
            b.count / n * b.mean_confidence * max(b.mean_confidence - b.accuracy, 0.0)
            for b in stats
        )
    )


def micro_prf1(
    records: Sequence[PredictionRecord], negative_index: int
) -> tuple[float, float, float]:
    """Micro-averaged precision/recall/F1 over all classes except the negative.

    A prediction of a positive class counts as a true positive when it matches
    gold, and as a false positive otherwise; every positive gold example that
    is not predicted as its gold class counts as a false negative.
    """
    tp = fp = fn = 0
    for r in records:
        if r.gold is None:
            raise MissingGold(f"record {r.example_id!r} has no gold label")
        if r.predicted != negative_index:
            if r.predicted == r.gold:
                tp += 1
            else:
                fp += 1
        if r.gold != negative_index and r.predicted != r.gold:
            fn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def report(
    records: Sequence[PredictionRecord],
    n_bins: int = 10,
    classes: Sequence[str] | None = None,
    negative_label: str = NEGATIVE_LABEL,
) -> CalibrationReport:
    """Assemble the full calibration report for a labeled record set.

    The histogram is the per-bin count of max probabilities, i.e. the bin
    counts themselves. When `classes` is given and contains `negative_label`,
    micro precision/recall/F1 over the remaining classes are included.
    """
    if not records:
        raise EmptyInput("cannot build a calibration report from zero records")
    stats = bin_stats(records, n_bins)
    conf, correct = _require_gold(records)
    n = len(records)
    rep = CalibrationReport(
        bins=stats,
        ece=ece(records, n_bins),
        oe=oe(records, n_bins),
        overall_accuracy=float(correct.mean()),
        overall_mean_confidence=float(conf.mean()),
        n=n,
        histogram=[b.count for b in stats],
    )
    if classes is not None and negative_label in classes:
        neg = list(classes).index(negative_label)
        rep.precision, rep.recall, rep.f1 = micro_prf1(records, neg)
    return rep


def histogram_table(rep: CalibrationReport) -> str:
    """Two-column text table (bin midpoint, count) for external plotting."""
    n_bins = len(rep.histogram)
    lines = ["# bin_midpoint\tcount"]
    for m, count in enumerate(rep.histogram):
        mid = (m + 0.5) / n_bins
        lines.append(f"{mid:.6f}\t{count}")
    return "\n".join(lines) + "\n"
