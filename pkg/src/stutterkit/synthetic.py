"""Deterministic synthetic corpora for tests and demos.

Real dysfluency corpora are licensed and cannot ship with the package, so
tests and demos run on constructed audio whose labels are separable by
design: each label class adds a pure tone at a class-specific frequency,
and each language adds a low carrier tone, so a small encoder can overfit
the mapping.  A second generator reproduces a right-skewed clip-length
profile (most clips a few seconds, a long tail up to ~14 s) for exercising
length filters, and a third appends long pure-noise clips with random
labels to make longer training clips actively harmful.

Everything derives from explicit seeds; the same seed always produces the
same corpus, byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .audio import CANONICAL_RATE_HZ, WaveformBuffer, save_wav, seconds_to_samples
from .corpus import CLASS_NAMES, DEFAULT_LANGUAGES, ClipRecord, LabelVector, save_manifest

# One tone per label class, one carrier per language; all far below the
# 8 kHz Nyquist limit and mutually distinct.
CLASS_TONES_HZ = {"bl": 1500.0, "int": 2250.0, "pro": 3000.0, "snd": 3750.0, "wd": 4500.0}
LANGUAGE_TONES_HZ = {"EN": 400.0, "DE": 700.0, "ZH": 1000.0}

_CLASS_AMP = 0.15
_CARRIER_AMP = 0.20
_NOISE_AMP = 0.005


@dataclass(frozen=True)
class _ClipSpec:
    kind: str  # "tones" or "noise"
    language: str
    labels: LabelVector
    duration_s: float
    seed: int


class SyntheticCorpus:
    """Clip records plus the generator that renders their audio."""

    def __init__(self, records: list[ClipRecord], specs: dict[str, _ClipSpec]) -> None:
        self.records = records
        self._specs = specs

    def wave(self, record: ClipRecord) -> WaveformBuffer:
        """Render one clip's samples; usable as a train/eval wave provider."""
        spec = self._specs[record.clip_id]
        rng = np.random.default_rng(spec.seed)
        n = seconds_to_samples(spec.duration_s)
        t = np.arange(n) / CANONICAL_RATE_HZ
        if spec.kind == "noise":
            samples = 0.3 * rng.standard_normal(n)
        else:
            samples = _CARRIER_AMP * np.sin(
                2 * np.pi * LANGUAGE_TONES_HZ[spec.language] * t + rng.uniform(0, 2 * np.pi)
            )
            for name, bit in zip(CLASS_NAMES, spec.labels.as_bools()):
                if bit:
                    samples = samples + _CLASS_AMP * np.sin(
                        2 * np.pi * CLASS_TONES_HZ[name] * t + rng.uniform(0, 2 * np.pi)
                    )
            samples = samples + _NOISE_AMP * rng.standard_normal(n)
        return WaveformBuffer(np.clip(samples, -1.0, 1.0))

    def write_wavs(self, out_dir: str | Path) -> list[ClipRecord]:
        """Render every clip to a wav file; returns records with real paths."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        updated = []
        for r in self.records:
            path = out_dir / f"{r.clip_id}.wav"
            save_wav(self.wave(r), path)
            updated.append(replace(r, audio_path=str(path)))
        return updated

    def write_manifest(self, out_dir: str | Path, name: str = "manifest.csv") -> Path:
        """Render wavs and write a loadable manifest next to them."""
        out_dir = Path(out_dir)
        records = self.write_wavs(out_dir)
        manifest_path = out_dir / name
        save_manifest(records, manifest_path)
        return manifest_path


def _balanced_labels(n_clips: int, rng: np.random.Generator) -> list[LabelVector]:
    # Each class gets an exactly half-positive column, shuffled independently,
    # so every class has both positives and negatives to learn from.
    columns = []
    for _ in CLASS_NAMES:
        col = np.zeros(n_clips, dtype=bool)
        col[: n_clips // 2] = True
        rng.shuffle(col)
        columns.append(col)
    matrix = np.stack(columns, axis=1)
    return [LabelVector.from_bools(matrix[i]) for i in range(n_clips)]


def make_separable_corpus(
    n_clips: int = 32,
    seed: int = 0,
    languages: tuple[str, ...] = DEFAULT_LANGUAGES,
    duration_range: tuple[float, float] = (1.8, 3.0),
    corpus_id: str = "synth",
    split: str = "train",
) -> SyntheticCorpus:
    """Tone-coded clips with balanced labels and round-robin languages."""
    if n_clips < len(languages):
        raise ValueError(f"need at least {len(languages)} clips to cover every language")
    lo, hi = duration_range
    if not 0 < lo <= hi:
        raise ValueError(f"bad duration range {duration_range}")
    rng = np.random.default_rng(seed)
    labels = _balanced_labels(n_clips, rng)
    records, specs = [], {}
    for i in range(n_clips):
        clip_id = f"{corpus_id}{i:03d}"
        language = languages[i % len(languages)]
        duration = float(rng.uniform(lo, hi))
        records.append(ClipRecord(
            clip_id=clip_id, corpus_id=corpus_id, language=language,
            audio_path=f"{clip_id}.wav", offset_s=0.0, duration_s=duration,
            labels=labels[i], split=split,
        ))
        specs[clip_id] = _ClipSpec(
            kind="tones", language=language, labels=labels[i],
            duration_s=duration, seed=int(rng.integers(2 ** 31)),
        )
    return SyntheticCorpus(records, specs)


def add_noise_clips(
    corpus: SyntheticCorpus,
    n_clips: int,
    seed: int = 0,
    duration_range: tuple[float, float] = (8.0, 12.0),
    corpus_id: str = "noise",
    split: str = "train",
) -> SyntheticCorpus:
    """Append long pure-noise clips with random labels.

    Their labels carry no signal, so keeping them in a training set hurts;
    used to demonstrate the benefit of a length cap.
    """
    rng = np.random.default_rng(seed)
    languages = tuple(LANGUAGE_TONES_HZ)
    records = list(corpus.records)
    specs = dict(corpus._specs)
    for i in range(n_clips):
        clip_id = f"{corpus_id}{i:03d}"
        labels = LabelVector.from_bools(rng.integers(0, 2, size=len(CLASS_NAMES)) == 1)
        duration = float(rng.uniform(*duration_range))
        records.append(ClipRecord(
            clip_id=clip_id, corpus_id=corpus_id,
            language=languages[i % len(languages)],
            audio_path=f"{clip_id}.wav", offset_s=0.0, duration_s=duration,
            labels=labels, split=split,
        ))
        specs[clip_id] = _ClipSpec(
            kind="noise", language=languages[i % len(languages)], labels=labels,
            duration_s=duration, seed=int(rng.integers(2 ** 31)),
        )
    return SyntheticCorpus(records, specs)


def make_duration_profile_manifest(
    n_clips: int = 2000,
    seed: int = 7,
    long_fraction: float = 0.14,
    corpus_id: str = "profile",
) -> list[ClipRecord]:
    """Records whose clip lengths follow a right-skewed profile.

    Most clips sit between 0.5 and 7 s with a mode around 3 s; a
    ``long_fraction`` tail runs from just above 7 s up to 14.375 s.  Only
    the duration column matters; audio paths are placeholders.
    """
    if not 0.0 <= long_fraction < 1.0:
        raise ValueError(f"long_fraction must be in [0, 1), got {long_fraction}")
    rng = np.random.default_rng(seed)
    n_long = int(round(n_clips * long_fraction))
    n_short = n_clips - n_long
    short = 0.5 + 6.49 * rng.beta(1.6, 2.2, size=n_short)
    long_tail = 7.01 + (14.375 - 7.01) * rng.beta(0.9, 2.4, size=n_long)
    durations = np.concatenate([short, long_tail])
    rng.shuffle(durations)
    records = []
    for i, duration in enumerate(durations):
        records.append(ClipRecord(
            clip_id=f"{corpus_id}{i:04d}", corpus_id=corpus_id,
            language=DEFAULT_LANGUAGES[int(rng.integers(len(DEFAULT_LANGUAGES)))],
            audio_path="unrendered.wav", offset_s=0.0, duration_s=float(duration),
            labels=LabelVector(), split="train",
        ))
    return records
