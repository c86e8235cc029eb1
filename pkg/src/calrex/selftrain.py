"""Calibration-aware self-training over an unlabeled sentence pool.

One round: train a model on the labeled data, predict every pool sentence,
select the highest-confidence predictions per positive class, pseudo-label
them with their predicted class, and train a fresh model from scratch on
the union of labeled and pseudo-labeled data.

Selection is rate-based: each class receives round(k * pool_size / 1e6)
slots, i.e. "top k per million pool sentences", so the batch size scales
with the pool. The negative class is never pseudo-labeled because the
labeled distribution is already heavily skewed toward it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .calibration import NEGATIVE_LABEL, PredictionRecord
from .training import MixupPenaltyClassifier, TrainConfig, classifier_from_config, predict_records

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class UnlabeledExample:
    example_id: str
    text: str


@dataclass(frozen=True)
class PseudoEntry:
    """One selected pool sentence with its assigned class and score."""

    example_id: str
    label: str
    probability: float


@dataclass
class PseudoLabeledBatch:
    entries: list[PseudoEntry]
    k: float
    pool_size: int

    def per_class_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for e in self.entries:
            counts[e.label] = counts.get(e.label, 0) + 1
        return counts


@dataclass
class SelfTrainConfig:
    """Selection rate and loop shape for self-training."""

    k: float = 200.0
    rounds: int = 1
    excluded_labels: tuple[str, ...] = (NEGATIVE_LABEL,)

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"k must be >= 0, got {self.k}")
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")


def _round_half_up(x: float) -> int:
    return int(x + 0.5)


def class_quota(k: float, pool_size: int) -> int:
    """Per-class selection budget: round(k * pool_size / 1e6), half rounds up."""
    return _round_half_up(k * pool_size / 1_000_000.0)


def predict_pool(
    clf: MixupPenaltyClassifier, pool: list[UnlabeledExample]
) -> list[PredictionRecord]:
    """Score every pool sentence; records carry no gold label."""
    return predict_records(clf, [p.text for p in pool], example_ids=[p.example_id for p in pool])


def select_topk(
    records: list[PredictionRecord],
    config: SelfTrainConfig,
    classes,
) -> PseudoLabeledBatch:
    """Pick the top-confidence records per non-excluded predicted class.

    Candidates for a class are the records whose argmax is that class,
    ordered by that class's probability descending with example_id as the
    tie-break; the first `class_quota` of them are kept. Because the
    ordering is fixed, the batch at a larger k is always a superset of the
    batch at a smaller k.
    """
    pool_size = len(records)
    quota = class_quota(config.k, pool_size)
    entries: list[PseudoEntry] = []
    classes = list(classes)
    for class_idx, label in enumerate(classes):
        if label in config.excluded_labels:
            continue
        candidates = [r for r in records if r.predicted == class_idx]
        candidates.sort(key=lambda r: (-r.probs[class_idx], r.example_id))
        entries.extend(
            PseudoEntry(r.example_id, label, float(r.probs[class_idx]))
            for r in candidates[:quota]
        )
    return PseudoLabeledBatch(entries=entries, k=config.k, pool_size=pool_size)


def selftrain_round(
    labeled: tuple[list[str], list[str]],
    pool: list[UnlabeledExample],
    train_config: TrainConfig,
    selftrain_config: SelfTrainConfig,
    dev=None,
) -> tuple[MixupPenaltyClassifier, list[dict]]:
    """Run the self-training loop and return the final model plus provenance.

    The provenance log lists every pseudo-labeled example with the round it
    was selected in and its selection probability, so augmented data can be
    excluded from ablation reruns. Each retraining starts from a fresh
    initialization with the same config, never warm-starting, to avoid
    compounding the previous model's biases.
    """
    texts, labels = list(labeled[0]), list(labeled[1])
    clf = classifier_from_config(train_config).fit(texts, labels, dev=dev)
    provenance: list[dict] = []
    for rnd in range(selftrain_config.rounds):
        if selftrain_config.k == 0:
            logger.info("k = 0: skipping pool prediction in round %d", rnd + 1)
            break
        records = predict_pool(clf, pool)
        batch = select_topk(records, selftrain_config, clf.classes_)
        logger.info(
            "round %d: selected %d pseudo-labeled examples (%s)",
            rnd + 1,
            len(batch.entries),
            batch.per_class_counts(),
        )
        by_id = {p.example_id: p for p in pool}
        aug_texts = list(texts)
        aug_labels = list(labels)
        for entry in batch.entries:
            aug_texts.append(by_id[entry.example_id].text)
            aug_labels.append(entry.label)
            provenance.append(
                {
                    "example_id": entry.example_id,
                    "label": entry.label,
                    "probability": entry.probability,
                    "round": rnd + 1,
                    "pseudo_labeled": True,
                }
            )
        clf = classifier_from_config(train_config).fit(aug_texts, aug_labels, dev=dev)
    return clf, provenance
