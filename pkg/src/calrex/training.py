"""Classifier training with feature-level mixup and a confidence penalty.

Each training item is a convex combination of two encoded sentences and
their one-hot labels: feature = lam * f(x_i) + (1 - lam) * f(x_j), label
mixed the same way, with lam drawn uniformly from [0, 1]. Every original
example is always trained as its own lam = 1 item; `mix_per_example`
additional partners are sampled per example per epoch, with replacement,
from the whole training set.

The loss is cross-entropy with soft targets minus beta times the entropy of
the predicted distribution, mean-reduced over the batch. The entropy term
penalizes low-entropy (over-confident) outputs; beta = 0 recovers plain
cross-entropy. No dropout is used anywhere in the classification path, so
the penalty is the only regularizer.

Optimization is mini-batch gradient descent with momentum and a linear
learning-rate decay. All randomness flows from one seed, so training is
bit-reproducible.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, asdict, fields

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from . import calibration
from .encoder import (
    _backward,
    _forward,
    build_vocab,
    encode_batch,
    init_encoder_params,
    pad_batch,
    tokenize,
    zeros_like_params,
)

logger = logging.getLogger(__name__)

_PROB_FLOOR = 1e-12
_PREDICT_CHUNK = 512


class DimensionMismatch(ValueError):
    """Features or label vectors being mixed disagree in dimension."""


class NonFiniteLoss(RuntimeError):
    """Training produced a NaN or infinite loss."""

    def __init__(self, batch_index: int, value: float):
        super().__init__(f"non-finite loss {value!r} in batch {batch_index}")
        self.batch_index = batch_index


@dataclass(frozen=True)
class MixedExample:
    """A convex combination of two encoded examples and their labels."""

    feature: np.ndarray
    label: np.ndarray
    lam: float
    source_ids: tuple[int, int]


def mixup_pair(
    feat_i, label_i, feat_j, label_j, lam: float, source_ids: tuple[int, int] = (-1, -1)
) -> MixedExample:
    """Convexly combine two feature/label pairs at ratio lam.

    lam = 1 reproduces (feat_i, label_i) exactly and lam = 0 reproduces
    (feat_j, label_j); the mixed label always sums to 1 when the inputs do.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"mixing ratio must lie in [0, 1], got {lam}")
    fi = np.asarray(feat_i, dtype=np.float64)
    fj = np.asarray(feat_j, dtype=np.float64)
    li = np.asarray(label_i, dtype=np.float64)
    lj = np.asarray(label_j, dtype=np.float64)
    if fi.shape != fj.shape:
        raise DimensionMismatch(f"feature shapes differ: {fi.shape} vs {fj.shape}")
    if li.shape != lj.shape:
        raise DimensionMismatch(f"label shapes differ: {li.shape} vs {lj.shape}")
    return MixedExample(
        feature=lam * fi + (1.0 - lam) * fj,
        label=lam * li + (1.0 - lam) * lj,
        lam=float(lam),
        source_ids=source_ids,
    )


@dataclass
class ClassifierHead:
    """Linear layer feeding the softmax: logits = features @ weight.T + bias."""

    weight: np.ndarray  # (classes, dim)
    bias: np.ndarray  # (classes,)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Max-shifted softmax along the last axis."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_forward(features: np.ndarray, head: ClassifierHead) -> np.ndarray:
    """Class probability distribution(s) for one feature vector or a batch."""
    return softmax(np.asarray(features) @ head.weight.T + head.bias)


def entropy(probs: np.ndarray):
    """Shannon entropy in nats, with 0 * log 0 treated as 0.

    Returns a scalar for a single distribution, a vector for a batch.
    """
    p = np.asarray(probs, dtype=np.float64)
    terms = np.where(p > 0.0, p * np.log(np.maximum(p, _PROB_FLOOR)), 0.0)
    h = -terms.sum(axis=-1)
    return float(h) if h.ndim == 0 else h


def loss(probs: np.ndarray, targets: np.ndarray, beta: float) -> float:
    """Soft-target cross-entropy minus beta * entropy, mean over the batch."""
    p = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    t = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    ce = -(t * np.log(np.maximum(p, _PROB_FLOOR))).sum(axis=-1)
    return float((ce - beta * entropy(p)).mean())


def loss_backward(probs: np.ndarray, targets: np.ndarray, beta: float) -> np.ndarray:
    """Gradient of `loss` with respect to the logits behind `probs`.

    For a (B, C) batch this is the gradient of the mean loss, shape (B, C).
    """
    p = np.asarray(probs, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    single = p.ndim == 1
    p2 = np.atleast_2d(p)
    t2 = np.atleast_2d(t)
    h = np.atleast_1d(entropy(p2))
    logp = np.log(np.maximum(p2, _PROB_FLOOR))
    grad = (p2 - t2) + beta * p2 * (logp + h[:, None])
    grad /= p2.shape[0]
    return grad[0] if single else grad


@dataclass
class TrainConfig:
    """Hyperparameters for one training run; mirrors the config-file keys."""

    beta: float = 0.3
    mix_per_example: int = 3
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 0.25
    momentum: float = 0.9
    seed: int = 0
    dim: int = 64
    hidden_dim: int = 128
    max_len: int = 200
    min_freq: int = 1

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.mix_per_example < 0:
            raise ValueError(f"mix_per_example must be >= 0, got {self.mix_per_example}")

    _FLOAT_FIELDS = ("beta", "learning_rate", "momentum")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_mapping(cls, raw: dict) -> "TrainConfig":
        """Build a config from a string-keyed mapping, ignoring foreign keys.

        Values may be strings (as parsed from a config file) or numbers.
        """
        kwargs = {}
        for f in fields(cls):
            if f.name in raw:
                conv = float if f.name in cls._FLOAT_FIELDS else int
                kwargs[f.name] = conv(raw[f.name])
        return cls(**kwargs)


class MixupPenaltyClassifier(ClassifierMixin, BaseEstimator):
    """Sentence classifier trained with feature mixup and entropy penalty.

    Follows the scikit-learn estimator conventions: hyperparameters are
    constructor arguments (see `get_params`), state learned by `fit` lives
    in trailing-underscore attributes, and `predict` / `predict_proba`
    accept lists of raw sentence strings.
    """

    def __init__(
        self,
        dim: int = 64,
        hidden_dim: int = 128,
        max_len: int = 200,
        min_freq: int = 1,
        beta: float = 0.3,
        mix_per_example: int = 3,
        epochs: int = 10,
        batch_size: int = 32,
        learning_rate: float = 0.25,
        momentum: float = 0.9,
        seed: int = 0,
    ):
        self.dim = dim
        self.hidden_dim = hidden_dim
        self.max_len = max_len
        self.min_freq = min_freq
        self.beta = beta
        self.mix_per_example = mix_per_example
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.seed = seed

    # ------------------------------------------------------------------
    def fit(self, X, y, dev=None):
        """Train on sentences X and labels y.

        `dev` is an optional (sentences, labels) pair; when given, each
        epoch's log entry records dev accuracy and dev ECE (10 bins).
        """
        texts = list(X)
        if not texts:
            raise ValueError("training set is empty")
        y = np.asarray(list(y))
        if len(y) != len(texts):
            raise ValueError("X and y lengths differ")
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        n_classes = len(self.classes_)
        if n_classes < 2:
            raise ValueError("need at least two classes to train")

        rng = np.random.default_rng(self.seed)
        self.vocab_ = build_vocab(texts, self.min_freq)
        seqs = [tokenize(t, self.vocab_, self.max_len) for t in texts]
        self.params_ = init_encoder_params(self.vocab_.size, self.dim, self.hidden_dim, rng)
        self.head_ = ClassifierHead(
            weight=np.zeros((n_classes, self.dim)), bias=np.zeros(n_classes)
        )
        self.log_ = []

        onehot = np.eye(n_classes)
        n = len(texts)
        items_per_epoch = n * (1 + self.mix_per_example)
        n_batches = max(1, -(-items_per_epoch // self.batch_size))
        total_steps = self.epochs * n_batches

        velocity = zeros_like_params(self.params_)
        param_tensors = self.params_.tensors()
        velocity_tensors = velocity.tensors()
        v_head_w = np.zeros_like(self.head_.weight)
        v_head_b = np.zeros_like(self.head_.bias)
        step = 0

        for epoch in range(self.epochs):
            left = np.concatenate(
                [np.arange(n)] + [np.arange(n)] * self.mix_per_example
            )
            right = np.concatenate(
                [np.arange(n), rng.integers(0, n, size=n * self.mix_per_example)]
            )
            lams = np.concatenate(
                [np.ones(n), rng.uniform(size=n * self.mix_per_example)]
            )
            order = rng.permutation(items_per_epoch)
            left, right, lams = left[order], right[order], lams[order]

            epoch_loss = 0.0
            for start in range(0, items_per_epoch, self.batch_size):
                bi = left[start : start + self.batch_size]
                bj = right[start : start + self.batch_size]
                bl = lams[start : start + self.batch_size]
                uniq, inverse = np.unique(np.concatenate([bi, bj]), return_inverse=True)
                ui, uj = inverse[: len(bi)], inverse[len(bi) :]

                x, mask, lengths = pad_batch([seqs[k] for k in uniq])
                cache = _forward(x, mask, lengths, self.params_)
                feats = cache.features
                mixed = bl[:, None] * feats[ui] + (1.0 - bl)[:, None] * feats[uj]
                targets = bl[:, None] * onehot[y_idx[bi]] + (1.0 - bl)[:, None] * onehot[y_idx[bj]]

                logits = mixed @ self.head_.weight.T + self.head_.bias
                probs = softmax(logits)
                batch_loss = loss(probs, targets, self.beta)
                if not np.isfinite(batch_loss):
                    raise NonFiniteLoss(step, batch_loss)
                epoch_loss += batch_loss * len(bi)

                d_logits = loss_backward(probs, targets, self.beta)
                d_head_w = d_logits.T @ mixed
                d_head_b = d_logits.sum(axis=0)
                d_mixed = d_logits @ self.head_.weight
                d_feats = np.zeros_like(feats)
                np.add.at(d_feats, ui, bl[:, None] * d_mixed)
                np.add.at(d_feats, uj, (1.0 - bl)[:, None] * d_mixed)
                grads = _backward(cache, self.params_, d_feats)

                lr = self.learning_rate * (1.0 - step / total_steps)
                for name, g in grads.tensors().items():
                    v = velocity_tensors[name]
                    v *= self.momentum
                    v -= lr * g
                    param_tensors[name] += v
                v_head_w = self.momentum * v_head_w - lr * d_head_w
                v_head_b = self.momentum * v_head_b - lr * d_head_b
                self.head_.weight += v_head_w
                self.head_.bias += v_head_b
                step += 1

            entry = {"epoch": epoch + 1, "loss": epoch_loss / items_per_epoch}
            if dev is not None:
                dev_x, dev_y = dev
                records = self._dev_records(dev_x, dev_y)
                correct = [r for r in records if r.predicted == r.gold]
                entry["dev_accuracy"] = len(correct) / len(records)
                entry["dev_ece"] = calibration.ece(records, 10)
            self.log_.append(entry)
            logger.debug("epoch %d: %s", epoch + 1, entry)
        return self

    # ------------------------------------------------------------------
    def _encode_texts(self, texts) -> np.ndarray:
        out = []
        for start in range(0, len(texts), _PREDICT_CHUNK):
            chunk = texts[start : start + _PREDICT_CHUNK]
            seqs = [tokenize(t, self.vocab_, self.max_len) for t in chunk]
            out.append(encode_batch(seqs, self.params_))
        return np.concatenate(out) if out else np.zeros((0, self.dim))

    def _dev_records(self, texts, labels) -> list[calibration.PredictionRecord]:
        label_to_idx = {c: i for i, c in enumerate(self.classes_)}
        golds = []
        for lab in labels:
            if lab not in label_to_idx:
                raise ValueError(f"dev label {lab!r} not present in training labels")
            golds.append(label_to_idx[lab])
        probs = self.predict_proba(list(texts))
        return [
            calibration.make_record(str(i), probs[i], golds[i])
            for i in range(len(golds))
        ]

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "params_")
        feats = self._encode_texts(list(X))
        return softmax_forward(feats, self.head_)

    def predict(self, X) -> np.ndarray:
        probs = self.predict_proba(X)
        return self.classes_[np.argmax(probs, axis=1)]

    def config(self) -> TrainConfig:
        return TrainConfig(**{f.name: getattr(self, f.name) for f in fields(TrainConfig)})


def classifier_from_config(config: TrainConfig) -> MixupPenaltyClassifier:
    return MixupPenaltyClassifier(**config.to_dict())


def predict_records(
    clf: MixupPenaltyClassifier, texts, example_ids=None, gold_labels=None
) -> list[calibration.PredictionRecord]:
    """Run the classifier and wrap each output as a PredictionRecord."""
    texts = list(texts)
    if example_ids is None:
        example_ids = [str(i) for i in range(len(texts))]
    golds: list[int | None]
    if gold_labels is None:
        golds = [None] * len(texts)
    else:
        label_to_idx = {c: i for i, c in enumerate(clf.classes_)}
        golds = []
        for lab in gold_labels:
            if lab not in label_to_idx:
                raise ValueError(f"gold label {lab!r} not present in model classes")
            golds.append(label_to_idx[lab])
    probs = clf.predict_proba(texts)
    return [
        calibration.make_record(example_ids[i], probs[i], golds[i])
        for i in range(len(texts))
    ]


def evaluate_split(
    clf: MixupPenaltyClassifier, texts, labels, n_bins: int = 10
) -> dict:
    """Classification and calibration metrics of a fitted model on one split."""
    records = predict_records(clf, texts, gold_labels=labels)
    rep = calibration.report(records, n_bins, classes=list(clf.classes_))
    return {
        "precision": rep.precision,
        "recall": rep.recall,
        "f1": rep.f1,
        "accuracy": rep.overall_accuracy,
        "confidence": rep.overall_mean_confidence,
        "ece": rep.ece,
        "oe": rep.oe,
    }


def grid_search_beta(
    train_data,
    dev_data,
    candidates,
    base_config: TrainConfig,
    replicates: int = 3,
) -> tuple[float, list[dict]]:
    """Pick the penalty weight with the best dev-set calibration.

    Trains `replicates` models per candidate (seeds derived from the base
    seed), reports the mean and variance of F1, accuracy, confidence, ECE,
    and OE on the dev set, and returns the candidate with the lowest mean
    ECE; ties break toward higher mean F1.
    """
    if not candidates:
        raise ValueError("candidate list is empty")
    train_x, train_y = train_data
    dev_x, dev_y = dev_data
    rows = []
    for beta in candidates:
        runs = []
        for r in range(replicates):
            cfg = TrainConfig(**{**base_config.to_dict(), "beta": beta, "seed": base_config.seed + r})
            clf = classifier_from_config(cfg).fit(train_x, train_y)
            runs.append(evaluate_split(clf, dev_x, dev_y))
        row = {"beta": float(beta), "replicates": replicates}
        for metric in ("f1", "accuracy", "confidence", "ece", "oe"):
            values = np.array([run[metric] for run in runs], dtype=np.float64)
            row[f"{metric}_mean"] = float(values.mean())
            row[f"{metric}_var"] = float(values.var(ddof=1)) if replicates > 1 else 0.0
        rows.append(row)
    return select_best_row(rows)["beta"], rows


def select_best_row(rows: list[dict]) -> dict:
    """Grid-search winner: lowest mean ECE, ties broken by higher mean F1."""
    return min(rows, key=lambda row: (row["ece_mean"], -row["f1_mean"]))
