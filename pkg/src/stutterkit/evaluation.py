"""Clip-level inference and per-class precision/recall/F1 reporting.

Long clips are scored through the windowing pipeline (plan, extract,
forward per window, per-class max); clips no longer than one window take a
single forward pass.  Metrics are per-class binary scores over clips with
full confusion counts; undefined ratios (zero denominators) are reported
as 0 and flagged rather than raising, so degenerate models score badly
instead of crashing the harness.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import tinynet
from .audio import WaveformBuffer, load_clip
from .corpus import CLASS_NAMES, NUM_CLASSES, ClipRecord, LabelVector, RetentionStats, \
    filter_by_max_length
from .model import DysfluencyModel, predict_probs
from .segmentation import OVERLAP_S, WINDOW_S, aggregate_predictions, extract_window, \
    plan_windows

DEFAULT_THRESHOLD = 0.5


def load_record_wave(record: ClipRecord) -> WaveformBuffer:
    """Default audio resolver: cut the clip out of its source file."""
    return load_clip(record.audio_path, record.offset_s, record.duration_s)


@dataclass(frozen=True)
class ClipPrediction:
    """Aggregated per-class probabilities and thresholded decisions."""

    clip_id: str
    probs: np.ndarray
    decisions: np.ndarray

    @staticmethod
    def from_probs(clip_id: str, probs: np.ndarray, threshold: float) -> "ClipPrediction":
        probs = np.asarray(probs, dtype=np.float64)
        if probs.shape != (NUM_CLASSES,):
            raise ValueError(f"probs must have shape ({NUM_CLASSES},), got {probs.shape}")
        return ClipPrediction(clip_id=clip_id, probs=probs, decisions=probs >= threshold)


@dataclass(frozen=True)
class ClassMetrics:
    """Binary detection scores for one class, with raw confusion counts."""

    tp: int
    fp: int
    fn: int
    support: int
    precision: float
    recall: float
    f1: float
    precision_undefined: bool
    recall_undefined: bool
    f1_undefined: bool


@dataclass(frozen=True)
class MetricsReport:
    classes: dict[str, ClassMetrics]
    threshold: float
    n_clips: int
    test_set_id: str = ""
    model_id: str = ""

    @property
    def mean_f1(self) -> float:
        return float(np.mean([m.f1 for m in self.classes.values()]))

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "n_clips": self.n_clips,
            "test_set_id": self.test_set_id,
            "model_id": self.model_id,
            "mean_f1": self.mean_f1,
            "classes": {
                name: {
                    "tp": m.tp, "fp": m.fp, "fn": m.fn, "support": m.support,
                    "precision": m.precision, "recall": m.recall, "f1": m.f1,
                    "precision_undefined": m.precision_undefined,
                    "recall_undefined": m.recall_undefined,
                    "f1_undefined": m.f1_undefined,
                }
                for name, m in self.classes.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def save_report(report: MetricsReport, path: str | Path) -> None:
    Path(path).write_text(report.to_json() + "\n", encoding="utf-8")


def load_report_dict(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def report_from_dict(payload: dict) -> MetricsReport:
    """Inverse of MetricsReport.to_dict, for merging saved reports."""
    try:
        classes = {
            name: ClassMetrics(
                tp=int(c["tp"]), fp=int(c["fp"]), fn=int(c["fn"]),
                support=int(c["support"]),
                precision=float(c["precision"]), recall=float(c["recall"]),
                f1=float(c["f1"]),
                precision_undefined=bool(c["precision_undefined"]),
                recall_undefined=bool(c["recall_undefined"]),
                f1_undefined=bool(c["f1_undefined"]),
            )
            for name, c in payload["classes"].items()
        }
        report = MetricsReport(
            classes=classes,
            threshold=float(payload["threshold"]),
            n_clips=int(payload["n_clips"]),
            test_set_id=payload.get("test_set_id", ""),
            model_id=payload.get("model_id", ""),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"not a metrics report: missing {exc}") from None
    if set(report.classes) != set(CLASS_NAMES):
        raise ValueError(f"metrics report covers classes {sorted(report.classes)}, "
                         f"expected {sorted(CLASS_NAMES)}")
    return report


# ---------------------------------------------------------------------------
# Inference
# ---------------------------------------------------------------------------

def infer_clip(
    model: DysfluencyModel,
    record: ClipRecord,
    threshold: float = DEFAULT_THRESHOLD,
    window_s: float = WINDOW_S,
    overlap_s: float = OVERLAP_S,
    wave_provider: Callable[[ClipRecord], WaveformBuffer] = load_record_wave,
) -> ClipPrediction:
    """Score one clip, windowing it when longer than one window.

    Clips no longer than ``window_s`` get a single forward pass (their one
    planned window); a clip of exactly ``window_s`` reproduces the direct
    forward output bit for bit.  Longer clips are scored per window and
    reduced by the per-class maximum.
    """
    wave = wave_provider(record)
    windows = plan_windows(wave.duration_s, window_s, overlap_s, clip_id=record.clip_id)
    window_probs = []
    for w in windows:
        chunk = extract_window(wave, w)
        main_probs, _ = predict_probs(model.forward(chunk))
        window_probs.append(main_probs)
    return ClipPrediction.from_probs(
        record.clip_id, aggregate_predictions(window_probs), threshold
    )


def evaluate_corpus(
    model: DysfluencyModel,
    test_set: Sequence[ClipRecord],
    threshold: float = DEFAULT_THRESHOLD,
    window_s: float = WINDOW_S,
    overlap_s: float = OVERLAP_S,
    wave_provider: Callable[[ClipRecord], WaveformBuffer] = load_record_wave,
    test_set_id: str = "",
    model_id: str = "",
) -> MetricsReport:
    """Windowed inference over a test set followed by per-class scoring.

    Deterministic, and invariant to the ordering of ``test_set`` (counts
    commute).
    """
    if not test_set:
        raise ValueError("test_set must be non-empty")
    predictions = [
        infer_clip(model, r, threshold, window_s, overlap_s, wave_provider)
        for r in test_set
    ]
    return f1_per_class(predictions, test_set, threshold=threshold,
                        test_set_id=test_set_id, model_id=model_id)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def _class_metrics(tp: int, fp: int, fn: int, support: int) -> ClassMetrics:
    precision_undefined = (tp + fp) == 0
    recall_undefined = (tp + fn) == 0
    precision = 0.0 if precision_undefined else tp / (tp + fp)
    recall = 0.0 if recall_undefined else tp / (tp + fn)
    f1_undefined = (precision + recall) == 0.0 and (precision_undefined or recall_undefined)
    f1 = 0.0 if precision + recall == 0.0 else 2 * precision * recall / (precision + recall)
    return ClassMetrics(
        tp=int(tp), fp=int(fp), fn=int(fn), support=int(support),
        precision=precision, recall=recall, f1=f1,
        precision_undefined=precision_undefined,
        recall_undefined=recall_undefined,
        f1_undefined=f1_undefined,
    )


def metrics_from_counts(decisions: np.ndarray, gold: np.ndarray, threshold: float,
                        test_set_id: str = "", model_id: str = "") -> MetricsReport:
    """Per-class report from aligned boolean matrices (N, 5)."""
    decisions = np.asarray(decisions, dtype=bool)
    gold = np.asarray(gold, dtype=bool)
    if decisions.shape != gold.shape or decisions.ndim != 2 \
            or decisions.shape[1] != NUM_CLASSES:
        raise ValueError(
            f"need matching (N, {NUM_CLASSES}) matrices, got "
            f"{decisions.shape} vs {gold.shape}"
        )
    classes = {}
    for j, name in enumerate(CLASS_NAMES):
        d, g = decisions[:, j], gold[:, j]
        classes[name] = _class_metrics(
            tp=int(np.sum(d & g)), fp=int(np.sum(d & ~g)),
            fn=int(np.sum(~d & g)), support=int(np.sum(g)),
        )
    return MetricsReport(classes=classes, threshold=threshold,
                         n_clips=decisions.shape[0],
                         test_set_id=test_set_id, model_id=model_id)


def f1_per_class(
    predictions: Sequence[ClipPrediction],
    gold: Sequence[ClipRecord],
    threshold: float = DEFAULT_THRESHOLD,
    test_set_id: str = "",
    model_id: str = "",
) -> MetricsReport:
    """Score predictions against gold records, matched by clip_id."""
    if len(predictions) != len(gold):
        raise ValueError(f"{len(predictions)} predictions vs {len(gold)} gold records")
    gold_by_id: dict[str, LabelVector] = {}
    for r in gold:
        if r.clip_id in gold_by_id:
            raise ValueError(f"duplicate clip_id in gold: {r.clip_id!r}")
        gold_by_id[r.clip_id] = r.labels
    decision_rows, gold_rows = [], []
    seen = set()
    for p in predictions:
        if p.clip_id not in gold_by_id:
            raise ValueError(f"prediction for unknown clip_id {p.clip_id!r}")
        if p.clip_id in seen:
            raise ValueError(f"duplicate prediction for clip_id {p.clip_id!r}")
        seen.add(p.clip_id)
        decision_rows.append(p.decisions)
        gold_rows.append(gold_by_id[p.clip_id].as_bools())
    return metrics_from_counts(np.array(decision_rows), np.array(gold_rows),
                               threshold, test_set_id, model_id)


def mean_f1_whole_clip(
    model: DysfluencyModel,
    waves: Sequence[np.ndarray],
    targets: np.ndarray,
    threshold: float = DEFAULT_THRESHOLD,
    batch_size: int = 8,
) -> float:
    """Mean F1 over classes from whole-clip forward passes.

    Used as the optional early-stopping metric during training, where clips
    are already decoded; no windowing.
    """
    rows = []
    for start in range(0, len(waves), batch_size):
        chunk = waves[start:start + batch_size]
        lengths = np.array([w.size for w in chunk], dtype=np.int64)
        batch = np.zeros((len(chunk), int(lengths.max())), dtype=np.float64)
        for i, w in enumerate(chunk):
            batch[i, :w.size] = w
        main_z, _, _ = model.forward_batch(batch, lengths)
        rows.append(tinynet.sigmoid(main_z) >= threshold)
    report = metrics_from_counts(np.vstack(rows), targets, threshold)
    return report.mean_f1


def format_f1_table(rows: dict[str, MetricsReport]) -> str:
    """Aligned text table of per-class F1, one row per labeled report."""
    header_names = ("Bl", "Int", "Pro", "Snd", "Wd")
    label_width = max([len(k) for k in rows] + [len("test set")])
    out = ["  ".join(["test set".ljust(label_width)] + [h.rjust(6) for h in header_names])]
    for label, report in rows.items():
        cells = [f"{report.classes[name].f1:.4f}".rjust(6) for name in CLASS_NAMES]
        out.append("  ".join([label.ljust(label_width)] + cells))
    return "\n".join(out)


# ---------------------------------------------------------------------------
# Length-threshold ablation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AblationRow:
    threshold_s: float
    eval_set_id: str
    f1: dict[str, float]
    retention: RetentionStats


def length_ablation(
    train_pipeline: Callable[[Sequence[ClipRecord]], DysfluencyModel],
    train_set: Sequence[ClipRecord],
    thresholds: Sequence[float],
    eval_sets: dict[str, Sequence[ClipRecord]],
    threshold: float = DEFAULT_THRESHOLD,
    wave_provider: Callable[[ClipRecord], WaveformBuffer] = load_record_wave,
) -> list[AblationRow]:
    """Sweep maximum training-clip length: filter, train, evaluate.

    ``train_pipeline`` receives the filtered training records and returns a
    trained model; one output row per (length threshold, eval set) pair.
    """
    if list(thresholds) != sorted(thresholds):
        raise ValueError("thresholds must be sorted ascending")
    if not thresholds:
        raise ValueError("need at least one threshold")
    rows: list[AblationRow] = []
    for max_len in thresholds:
        kept, retention = filter_by_max_length(train_set, max_len)
        if not kept:
            raise ValueError(f"threshold {max_len} s leaves an empty training set")
        trained = train_pipeline(kept)
        for set_id, records in eval_sets.items():
            report = evaluate_corpus(trained, records, threshold,
                                     wave_provider=wave_provider,
                                     test_set_id=set_id)
            rows.append(AblationRow(
                threshold_s=max_len,
                eval_set_id=set_id,
                f1={name: report.classes[name].f1 for name in CLASS_NAMES},
                retention=retention,
            ))
    return rows


def save_ablation_table(rows: Sequence[AblationRow], path: str | Path) -> None:
    """Delimited ablation results, one line per (threshold, eval set)."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        fh.write("threshold_s,eval_set,"
                 + ",".join(f"f1_{name}" for name in CLASS_NAMES)
                 + ",clips_kept_fraction,duration_kept_fraction\n")
        for r in rows:
            cells = [repr(float(r.threshold_s)), r.eval_set_id]
            cells += [repr(r.f1[name]) for name in CLASS_NAMES]
            cells += [repr(r.retention.clips_kept_fraction),
                      repr(r.retention.duration_kept_fraction)]
            fh.write(",".join(cells) + "\n")
