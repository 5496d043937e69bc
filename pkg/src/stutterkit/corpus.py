"""Unified clip manifests for multi-corpus dysfluency data.

Every source corpus is normalized by an upstream adapter into one flat,
comma-separated manifest with a header row::

    clip_id,corpus_id,language,audio_path,offset_s,duration_s,bl,int,pro,snd,wd,split

One row describes one labeled audio clip: where its samples live
(``audio_path`` plus ``offset_s``/``duration_s`` within that file), which
language it is, its five binary dysfluency labels (0/1 columns), and its
partition assignment (``train``/``dev``/``test``).  Clip ids must be unique
within a manifest.  An all-zero label row is a fluent clip.

This module owns the manifest schema and the dataset-construction
operations built on it: label binarization from annotator counts, length
filtering with retention statistics, deterministic multi-corpus mixing,
and per-language / per-class summary statistics.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

# Canonical class order; every label vector, model head and report follows it.
CLASS_NAMES = ("bl", "int", "pro", "snd", "wd")
NUM_CLASSES = len(CLASS_NAMES)

DEFAULT_LANGUAGES = ("EN", "DE", "ZH")
SPLITS = ("train", "dev", "test")

MANIFEST_COLUMNS = (
    "clip_id", "corpus_id", "language", "audio_path",
    "offset_s", "duration_s", "bl", "int", "pro", "snd", "wd", "split",
)

BINARIZATION_RULES = ("majority", "any", "unanimous")


class ManifestError(ValueError):
    """Raised for malformed manifest files; message carries file and line."""


@dataclass(frozen=True)
class LabelVector:
    """Five binary dysfluency indicators in canonical class order."""

    bl: bool = False
    int_: bool = False
    pro: bool = False
    snd: bool = False
    wd: bool = False

    def as_bools(self) -> tuple[bool, ...]:
        return (self.bl, self.int_, self.pro, self.snd, self.wd)

    def as_array(self) -> np.ndarray:
        """Targets as a float64 vector (0.0/1.0) in canonical order."""
        return np.array(self.as_bools(), dtype=np.float64)

    def any(self) -> bool:
        return any(self.as_bools())

    @staticmethod
    def from_bools(bits: Sequence[bool]) -> "LabelVector":
        if len(bits) != NUM_CLASSES:
            raise ValueError(f"expected {NUM_CLASSES} label bits, got {len(bits)}")
        return LabelVector(*(bool(b) for b in bits))


@dataclass(frozen=True)
class ClipRecord:
    """One labeled audio clip of a corpus manifest."""

    clip_id: str
    corpus_id: str
    language: str
    audio_path: str
    offset_s: float
    duration_s: float
    labels: LabelVector
    split: str

    def validate(self, languages: Sequence[str] = DEFAULT_LANGUAGES) -> None:
        if not self.clip_id:
            raise ValueError("clip_id must be non-empty")
        if not self.corpus_id:
            raise ValueError("corpus_id must be non-empty")
        if self.language not in languages:
            raise ValueError(
                f"unknown language {self.language!r} (expected one of {', '.join(languages)})"
            )
        if self.split not in SPLITS:
            raise ValueError(
                f"unknown split {self.split!r} (expected one of {', '.join(SPLITS)})"
            )
        if not math.isfinite(self.offset_s) or self.offset_s < 0:
            raise ValueError(f"offset_s must be >= 0, got {self.offset_s}")
        if not math.isfinite(self.duration_s) or self.duration_s <= 0:
            raise ValueError(f"duration_s must be > 0, got {self.duration_s}")


@dataclass(frozen=True)
class RetentionStats:
    """Fractions of clips and of total audio surviving a length filter."""

    clips_kept_fraction: float
    duration_kept_fraction: float
    threshold_s: float  # math.inf means "no limit"


# ---------------------------------------------------------------------------
# Manifest I/O
# ---------------------------------------------------------------------------

def load_manifest(
    path: str | Path,
    languages: Sequence[str] = DEFAULT_LANGUAGES,
) -> list[ClipRecord]:
    """Parse a manifest file into validated records, preserving file order.

    Raises ManifestError with the offending line number for parse failures,
    duplicate clip ids, or invariant violations.
    """
    path = Path(path)
    records: list[ClipRecord] = []
    seen_ids: set[str] = set()
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError(f"{path}: empty file, expected header row") from None
        if tuple(header) != MANIFEST_COLUMNS:
            raise ManifestError(
                f"{path}:1: bad header {header!r}, expected {','.join(MANIFEST_COLUMNS)}"
            )
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(MANIFEST_COLUMNS):
                raise ManifestError(
                    f"{path}:{line}: expected {len(MANIFEST_COLUMNS)} columns, got {len(row)}"
                )
            rec = _parse_row(row, path, line)
            try:
                rec.validate(languages)
            except ValueError as exc:
                raise ManifestError(f"{path}:{line}: {exc}") from None
            if rec.clip_id in seen_ids:
                raise ManifestError(f"{path}:{line}: duplicate clip_id {rec.clip_id!r}")
            seen_ids.add(rec.clip_id)
            records.append(rec)
    return records


def _parse_row(row: Sequence[str], path: Path, line: int) -> ClipRecord:
    def fail(msg: str) -> ManifestError:
        return ManifestError(f"{path}:{line}: {msg}")

    clip_id, corpus_id, language, audio_path = row[0], row[1], row[2], row[3]
    try:
        offset_s = float(row[4])
        duration_s = float(row[5])
    except ValueError:
        raise fail(f"bad numeric field in {row[4]!r}/{row[5]!r}") from None
    bits = []
    for name, cell in zip(CLASS_NAMES, row[6:11]):
        if cell not in ("0", "1"):
            raise fail(f"label column {name!r} must be 0 or 1, got {cell!r}")
        bits.append(cell == "1")
    return ClipRecord(
        clip_id=clip_id,
        corpus_id=corpus_id,
        language=language,
        audio_path=audio_path,
        offset_s=offset_s,
        duration_s=duration_s,
        labels=LabelVector.from_bools(bits),
        split=row[11],
    )


def save_manifest(records: Iterable[ClipRecord], path: str | Path) -> None:
    """Write records in manifest format; load(save(records)) round-trips."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for r in records:
            writer.writerow([
                r.clip_id, r.corpus_id, r.language, r.audio_path,
                repr(float(r.offset_s)), repr(float(r.duration_s)),
                *("1" if b else "0" for b in r.labels.as_bools()),
                r.split,
            ])


# ---------------------------------------------------------------------------
# Dataset construction
# ---------------------------------------------------------------------------

def unify_labels(
    raw_counts: Sequence[int],
    total_annotators: int,
    rule: str = "majority",
) -> LabelVector:
    """Binarize per-class annotator counts into a label vector.

    ``majority`` keeps a class iff strictly more than half of the annotators
    marked it; ``any`` needs a single vote; ``unanimous`` needs all of them.
    """
    if total_annotators < 1:
        raise ValueError(f"total_annotators must be >= 1, got {total_annotators}")
    if len(raw_counts) != NUM_CLASSES:
        raise ValueError(f"expected {NUM_CLASSES} class counts, got {len(raw_counts)}")
    if rule not in BINARIZATION_RULES:
        raise ValueError(f"unknown rule {rule!r} (expected one of {BINARIZATION_RULES})")
    bits = []
    for name, count in zip(CLASS_NAMES, raw_counts):
        if not 0 <= count <= total_annotators:
            raise ValueError(
                f"count for {name!r} is {count}, outside 0..{total_annotators}"
            )
        if rule == "majority":
            bits.append(count > total_annotators / 2)
        elif rule == "any":
            bits.append(count >= 1)
        else:
            bits.append(count == total_annotators)
    return LabelVector.from_bools(bits)


def filter_by_max_length(
    records: Sequence[ClipRecord],
    threshold_s: float,
) -> tuple[list[ClipRecord], RetentionStats]:
    """Drop clips longer than ``threshold_s`` (inclusive boundary is kept).

    Retention fractions are computed over the input totals; an empty input
    yields both fractions 1.0.
    """
    if not threshold_s > 0:
        raise ValueError(f"threshold_s must be > 0, got {threshold_s}")
    kept = [r for r in records if r.duration_s <= threshold_s]
    total_n = len(records)
    total_dur = sum(r.duration_s for r in records)
    kept_dur = sum(r.duration_s for r in kept)
    stats = RetentionStats(
        clips_kept_fraction=len(kept) / total_n if total_n else 1.0,
        duration_kept_fraction=kept_dur / total_dur if total_dur else 1.0,
        threshold_s=threshold_s,
    )
    return kept, stats


def mix_corpora(
    manifests: Sequence[Sequence[ClipRecord]],
    seed: int,
) -> list[ClipRecord]:
    """Combine manifests and shuffle deterministically.

    Clip ids are namespaced as ``<corpus_id>/<clip_id>`` before combination;
    a collision after prefixing is an error.  The same seed always yields
    the same output order.
    """
    combined: list[ClipRecord] = []
    seen: set[str] = set()
    for manifest in manifests:
        for r in manifest:
            prefixed = replace(r, clip_id=f"{r.corpus_id}/{r.clip_id}")
            if prefixed.clip_id in seen:
                raise ValueError(f"clip_id collision after prefixing: {prefixed.clip_id!r}")
            seen.add(prefixed.clip_id)
            combined.append(prefixed)
    order = np.random.default_rng(seed).permutation(len(combined))
    return [combined[i] for i in order]


@dataclass
class CorpusStats:
    """Counts and durations over one record list."""

    n_clips: int
    total_duration_s: float
    language_counts: dict[str, int] = field(default_factory=dict)
    language_fractions: dict[str, float] = field(default_factory=dict)
    language_durations_s: dict[str, float] = field(default_factory=dict)
    class_counts: dict[str, int] = field(default_factory=dict)
    split_counts: dict[str, int] = field(default_factory=dict)
    fluent_count: int = 0

    def to_dict(self) -> dict:
        return {
            "n_clips": self.n_clips,
            "total_duration_s": self.total_duration_s,
            "language_counts": self.language_counts,
            "language_fractions": self.language_fractions,
            "language_durations_s": self.language_durations_s,
            "class_counts": self.class_counts,
            "split_counts": self.split_counts,
            "fluent_count": self.fluent_count,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        """Key-value report block, one ``key = value`` pair per line."""
        lines = [
            f"n_clips = {self.n_clips}",
            f"total_duration_s = {self.total_duration_s:.3f}",
            f"fluent_count = {self.fluent_count}",
        ]
        for lang in sorted(self.language_counts):
            lines.append(
                f"language.{lang} = {self.language_counts[lang]} "
                f"({self.language_fractions[lang]:.1%}, "
                f"{self.language_durations_s[lang]:.1f} s)"
            )
        for name in CLASS_NAMES:
            lines.append(f"class.{name} = {self.class_counts.get(name, 0)}")
        for split in SPLITS:
            if split in self.split_counts:
                lines.append(f"split.{split} = {self.split_counts[split]}")
        return "\n".join(lines)


def split_stats(records: Sequence[ClipRecord]) -> CorpusStats:
    """Per-language and per-class counts plus total duration.

    Language fractions partition the input (they sum to 1 over the languages
    present); an empty input yields an all-zero report.
    """
    stats = CorpusStats(
        n_clips=len(records),
        total_duration_s=sum(r.duration_s for r in records),
        class_counts={name: 0 for name in CLASS_NAMES},
    )
    for r in records:
        stats.language_counts[r.language] = stats.language_counts.get(r.language, 0) + 1
        stats.language_durations_s[r.language] = (
            stats.language_durations_s.get(r.language, 0.0) + r.duration_s
        )
        stats.split_counts[r.split] = stats.split_counts.get(r.split, 0) + 1
        for name, bit in zip(CLASS_NAMES, r.labels.as_bools()):
            if bit:
                stats.class_counts[name] += 1
        if not r.labels.any():
            stats.fluent_count += 1
    if records:
        stats.language_fractions = {
            lang: count / len(records) for lang, count in stats.language_counts.items()
        }
    return stats
