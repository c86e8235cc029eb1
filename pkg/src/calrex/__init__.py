"""Calibrated chemical-protein sentence classification toolkit."""

__version__ = "0.1.0"

from .calibration import (
    BinStats,
    CalibrationReport,
    PredictionRecord,
    assign_bins,
    ece,
    make_record,
    micro_prf1,
    oe,
    report,
)
from .corpus import (
    AbstractRecord,
    EntityKind,
    EntityMention,
    GoldRelation,
    LabeledExample,
    dataset_stats,
    extract_pairs,
    preprocess,
    split_sentences,
)
from .encoder import (
    EncoderParams,
    TokenSequence,
    Vocabulary,
    build_vocab,
    encode,
    encode_backward,
    encode_batch,
    tokenize,
)
from .modelio import load_model, save_model
from .selftrain import (
    PseudoLabeledBatch,
    SelfTrainConfig,
    UnlabeledExample,
    predict_pool,
    select_topk,
    selftrain_round,
)
from .training import (
    ClassifierHead,
    MixedExample,
    MixupPenaltyClassifier,
    TrainConfig,
    entropy,
    grid_search_beta,
    loss,
    loss_backward,
    mixup_pair,
    softmax_forward,
)

__all__ = [
    "__version__",
    "AbstractRecord",
    "BinStats",
    "CalibrationReport",
    "ClassifierHead",
    "EncoderParams",
    "EntityKind",
    "EntityMention",
    "GoldRelation",
    "LabeledExample",
    "MixedExample",
    "MixupPenaltyClassifier",
    "PredictionRecord",
    "PseudoLabeledBatch",
    "SelfTrainConfig",
    "TokenSequence",
    "TrainConfig",
    "UnlabeledExample",
    "Vocabulary",
    "assign_bins",
    "build_vocab",
    "dataset_stats",
    "ece",
    "encode",
    "encode_backward",
    "encode_batch",
    "entropy",
    "extract_pairs",
    "grid_search_beta",
    "load_model",
    "loss",
    "loss_backward",
    "make_record",
    "micro_prf1",
    "mixup_pair",
    "oe",
    "predict_pool",
    "preprocess",
    "report",
    "save_model",
    "select_topk",
    "selftrain_round",
    "softmax_forward",
    "split_sentences",
    "tokenize",
]
