"""Multilingual multi-label dysfluency event detection.

Corpus manifests, overlapped-window inference, a dual-head classifier over
a pluggable audio encoder, focal multi-task training, and per-class F1
evaluation, with a CLI binding the pipeline end to end.
"""

from .audio import CANONICAL_RATE_HZ, WaveformBuffer, load_wav, save_wav, seconds_to_samples
from .corpus import (
    CLASS_NAMES,
    DEFAULT_LANGUAGES,
    NUM_CLASSES,
    ClipRecord,
    CorpusStats,
    LabelVector,
    ManifestError,
    RetentionStats,
    filter_by_max_length,
    load_manifest,
    mix_corpora,
    save_manifest,
    split_stats,
    unify_labels,
)
from .evaluation import (
    ClipPrediction,
    MetricsReport,
    evaluate_corpus,
    f1_per_class,
    format_f1_table,
    infer_clip,
    length_ablation,
)
from .loss import MTLLossConfig, bce_aux, focal_loss_multilabel, focal_term, mtl_combine
from .model import (
    DysfluencyModel,
    EncoderSpec,
    FrameFeatures,
    PredictionLogits,
    load_checkpoint,
    pool_mean,
    predict_probs,
    save_checkpoint,
)
from .segmentation import Window, aggregate_predictions, extract_window, plan_windows
from .training import AdamW, EpochRecord, TrainConfig, should_stop, train

__version__ = "0.1.0"

__all__ = [
    "AdamW",
    "CANONICAL_RATE_HZ",
    "CLASS_NAMES",
    "ClipPrediction",
    "ClipRecord",
    "CorpusStats",
    "DEFAULT_LANGUAGES",
    "DysfluencyModel",
    "EncoderSpec",
    "EpochRecord",
    "FrameFeatures",
    "LabelVector",
    "ManifestError",
    "MetricsReport",
    "MTLLossConfig",
    "NUM_CLASSES",
    "PredictionLogits",
    "RetentionStats",
    "TrainConfig",
    "WaveformBuffer",
    "Window",
    "aggregate_predictions",
    "bce_aux",
    "evaluate_corpus",
    "extract_window",
    "f1_per_class",
    "filter_by_max_length",
    "focal_loss_multilabel",
    "focal_term",
    "format_f1_table",
    "infer_clip",
    "length_ablation",
    "load_checkpoint",
    "load_manifest",
    "load_wav",
    "mix_corpora",
    "mtl_combine",
    "plan_windows",
    "pool_mean",
    "predict_probs",
    "save_checkpoint",
    "save_manifest",
    "save_wav",
    "seconds_to_samples",
    "should_stop",
    "split_stats",
    "train",
    "unify_labels",
]
