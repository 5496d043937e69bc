"""Constructed corpora: determinism, balance, spectral coding, durations."""

from __future__ import annotations

import numpy as np
import pytest

from stutterkit.audio import load_wav
from stutterkit.corpus import CLASS_NAMES, filter_by_max_length, load_manifest
from stutterkit.synthetic import (
    CLASS_TONES_HZ,
    SyntheticCorpus,
    add_noise_clips,
    make_duration_profile_manifest,
    make_separable_corpus,
)


def band_energy(samples: np.ndarray, freq: float, half_width: float = 60.0) -> float:
    spectrum = np.abs(np.fft.rfft(samples))
    freqs = np.fft.rfftfreq(samples.size, d=1.0 / 16000.0)
    band = (freqs > freq - half_width) & (freqs < freq + half_width)
    return float(spectrum[band].sum())


def test_corpus_is_seed_deterministic():
    a = make_separable_corpus(n_clips=8, seed=5, duration_range=(0.3, 0.5))
    b = make_separable_corpus(n_clips=8, seed=5, duration_range=(0.3, 0.5))
    assert a.records == b.records
    for r in a.records:
        assert np.array_equal(a.wave(r).samples, b.wave(r).samples)


def test_corpus_different_seeds_differ():
    a = make_separable_corpus(n_clips=8, seed=5, duration_range=(0.3, 0.5))
    b = make_separable_corpus(n_clips=8, seed=6, duration_range=(0.3, 0.5))
    assert a.records != b.records


def test_labels_are_balanced_per_class():
    corpus = make_separable_corpus(n_clips=32, seed=0, duration_range=(0.3, 0.4))
    matrix = np.array([r.labels.as_bools() for r in corpus.records])
    assert matrix.sum(axis=0).tolist() == [16, 16, 16, 16, 16]


def test_languages_round_robin():
    corpus = make_separable_corpus(n_clips=9, seed=0, duration_range=(0.3, 0.4))
    langs = [r.language for r in corpus.records]
    assert langs.count("EN") == langs.count("DE") == langs.count("ZH") == 3


def test_durations_respect_range_and_amplitudes_are_legal():
    corpus = make_separable_corpus(n_clips=8, seed=1, duration_range=(0.4, 0.9))
    for r in corpus.records:
        assert 0.4 <= r.duration_s <= 0.9
        samples = corpus.wave(r).samples
        assert np.max(np.abs(samples)) <= 1.0


def test_class_tone_is_present_exactly_when_labeled():
    corpus = make_separable_corpus(n_clips=12, seed=2, duration_range=(0.5, 0.8))
    for name, freq in CLASS_TONES_HZ.items():
        j = CLASS_NAMES.index(name)
        positives = [r for r in corpus.records if r.labels.as_bools()[j]]
        negatives = [r for r in corpus.records if not r.labels.as_bools()[j]]
        pos_mean = np.mean([band_energy(corpus.wave(r).samples, freq) for r in positives])
        neg_mean = np.mean([band_energy(corpus.wave(r).samples, freq) for r in negatives])
        assert pos_mean > 10 * neg_mean, name


def test_corpus_validation():
    with pytest.raises(ValueError):
        make_separable_corpus(n_clips=2, seed=0)  # fewer clips than languages
    with pytest.raises(ValueError):
        make_separable_corpus(n_clips=8, seed=0, duration_range=(2.0, 1.0))


def test_noise_clips_are_appended_long_and_toneless():
    base = make_separable_corpus(n_clips=4, seed=3, duration_range=(0.3, 0.5))
    extended = add_noise_clips(base, n_clips=3, seed=4, duration_range=(2.0, 3.0))
    assert len(extended.records) == 7
    noise = extended.records[4:]
    assert all(r.clip_id.startswith("noise") for r in noise)
    for r in noise:
        assert 2.0 <= r.duration_s <= 3.0
        samples = extended.wave(r).samples
        # broadband noise: no single class tone dominates
        energies = [band_energy(samples, f) for f in CLASS_TONES_HZ.values()]
        assert max(energies) < 3 * min(energies)
    # the original clips are untouched
    assert extended.records[:4] == base.records


def test_write_wavs_and_manifest_roundtrip(tmp_path):
    corpus = make_separable_corpus(n_clips=4, seed=6, duration_range=(0.3, 0.5))
    manifest_path = corpus.write_manifest(tmp_path)
    records = load_manifest(manifest_path)
    assert len(records) == 4
    for r in records:
        wave = load_wav(r.audio_path)
        rendered = corpus.wave(corpus.records[records.index(r)])
        assert wave.samples.size == rendered.samples.size
        assert np.max(np.abs(wave.samples - rendered.samples)) < 1e-4  # 16-bit quantization


# ---------------------------------------------------------------------------
# Duration profile
# ---------------------------------------------------------------------------

def test_duration_profile_shape():
    records = make_duration_profile_manifest()
    durations = np.array([r.duration_s for r in records])
    assert len(records) == 2000
    assert durations.min() >= 0.5
    assert durations.max() <= 14.375
    assert 3.5 < durations.mean() < 4.6


def test_duration_profile_retention_at_seven_seconds():
    records = make_duration_profile_manifest()
    _, stats = filter_by_max_length(records, 7.0)
    assert stats.clips_kept_fraction == pytest.approx(0.86, abs=0.02)
    assert stats.duration_kept_fraction == pytest.approx(0.69, abs=0.02)


def test_duration_profile_long_fraction_controls_the_tail():
    records = make_duration_profile_manifest(n_clips=500, seed=1, long_fraction=0.3)
    durations = np.array([r.duration_s for r in records])
    assert np.mean(durations > 7.0) == pytest.approx(0.3, abs=0.01)
    with pytest.raises(ValueError):
        make_duration_profile_manifest(long_fraction=1.0)


def test_duration_profile_is_deterministic():
    assert make_duration_profile_manifest(n_clips=50, seed=9) == \
        make_duration_profile_manifest(n_clips=50, seed=9)
