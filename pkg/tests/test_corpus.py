"""Manifest parsing, label binarization, length filtering, corpus mixing."""

from __future__ import annotations

import math

import numpy as np
import pytest

from stutterkit.corpus import (
    CLASS_NAMES,
    ClipRecord,
    LabelVector,
    ManifestError,
    filter_by_max_length,
    load_manifest,
    mix_corpora,
    save_manifest,
    split_stats,
    unify_labels,
)

HEADER = "clip_id,corpus_id,language,audio_path,offset_s,duration_s,bl,int,pro,snd,wd,split"


def make_record(clip_id="c1", corpus_id="k", language="EN", duration_s=3.0,
                labels=None, split="train", offset_s=0.0):
    return ClipRecord(
        clip_id=clip_id, corpus_id=corpus_id, language=language,
        audio_path=f"{clip_id}.wav", offset_s=offset_s, duration_s=duration_s,
        labels=labels or LabelVector(), split=split,
    )


def write_manifest_text(tmp_path, *rows):
    path = tmp_path / "m.csv"
    path.write_text("\n".join([HEADER, *rows]) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# LabelVector
# ---------------------------------------------------------------------------

def test_label_vector_roundtrip_and_order():
    lv = LabelVector(bl=True, int_=False, pro=True, snd=False, wd=True)
    assert lv.as_bools() == (True, False, True, False, True)
    assert np.array_equal(lv.as_array(), [1.0, 0.0, 1.0, 0.0, 1.0])
    assert LabelVector.from_bools(lv.as_bools()) == lv


def test_label_vector_wrong_length():
    with pytest.raises(ValueError):
        LabelVector.from_bools([True, False])


# ---------------------------------------------------------------------------
# Manifest I/O
# ---------------------------------------------------------------------------

def test_load_manifest_parses_fields(tmp_path):
    path = write_manifest_text(
        tmp_path,
        "a1,ksof,DE,audio/a1.wav,0.0,3.5,1,0,0,1,0,train",
        "a2,ksof,DE,audio/a2.wav,1.25,2.0,0,0,0,0,0,test",
    )
    records = load_manifest(path)
    assert len(records) == 2
    assert records[0].clip_id == "a1"
    assert records[0].labels == LabelVector(bl=True, snd=True)
    assert records[1].offset_s == 1.25
    assert not records[1].labels.any()  # all-zero row is a fluent clip


def test_save_load_roundtrip(tmp_path):
    records = [
        make_record("x1", duration_s=4.12, labels=LabelVector(int_=True)),
        make_record("x2", language="ZH", duration_s=0.5, offset_s=2.75, split="dev"),
    ]
    path = tmp_path / "out.csv"
    save_manifest(records, path)
    assert load_manifest(path) == records


def test_load_rejects_bad_header(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("clip,lang\nx,EN\n", encoding="utf-8")
    with pytest.raises(ManifestError, match="header"):
        load_manifest(path)


def test_load_error_carries_line_number(tmp_path):
    path = write_manifest_text(
        tmp_path,
        "a1,k,EN,a1.wav,0.0,3.0,1,0,0,0,0,train",
        "a2,k,EN,a2.wav,0.0,3.0,2,0,0,0,0,train",  # label must be 0/1
    )
    with pytest.raises(ManifestError, match=r":3:"):
        load_manifest(path)


def test_load_rejects_duplicate_clip_id(tmp_path):
    path = write_manifest_text(
        tmp_path,
        "a1,k,EN,a1.wav,0.0,3.0,0,0,0,0,0,train",
        "a1,k,EN,a1.wav,0.0,3.0,0,0,0,0,0,train",
    )
    with pytest.raises(ManifestError, match="duplicate clip_id"):
        load_manifest(path)


def test_load_rejects_unknown_language_and_split(tmp_path):
    path = write_manifest_text(tmp_path, "a1,k,FR,a1.wav,0.0,3.0,0,0,0,0,0,train")
    with pytest.raises(ManifestError, match="language"):
        load_manifest(path)
    path2 = write_manifest_text(tmp_path, "a1,k,EN,a1.wav,0.0,3.0,0,0,0,0,0,val")
    with pytest.raises(ManifestError, match="split"):
        load_manifest(path2)


def test_load_rejects_bad_numbers_and_column_count(tmp_path):
    path = write_manifest_text(tmp_path, "a1,k,EN,a1.wav,zero,3.0,0,0,0,0,0,train")
    with pytest.raises(ManifestError, match=r":2:"):
        load_manifest(path)
    path2 = write_manifest_text(tmp_path, "a1,k,EN,a1.wav,0.0,3.0,0,0,0,0,0")
    with pytest.raises(ManifestError, match="columns"):
        load_manifest(path2)


def test_load_rejects_nonpositive_duration(tmp_path):
    path = write_manifest_text(tmp_path, "a1,k,EN,a1.wav,0.0,0.0,0,0,0,0,0,train")
    with pytest.raises(ManifestError, match="duration"):
        load_manifest(path)


def test_custom_language_set(tmp_path):
    path = write_manifest_text(tmp_path, "a1,k,FR,a1.wav,0.0,3.0,0,0,0,0,0,train")
    records = load_manifest(path, languages=("FR", "EN"))
    assert records[0].language == "FR"


# ---------------------------------------------------------------------------
# Label binarization
# ---------------------------------------------------------------------------

def test_unify_labels_majority_is_strict():
    # 3 annotators: 2 votes is a majority (2 > 1.5), 1 is not.
    lv = unify_labels([2, 1, 3, 0, 2], total_annotators=3)
    assert lv.as_bools() == (True, False, True, False, True)
    # 4 annotators: an even 2-2 split is NOT a majority (2 > 2 is false).
    lv4 = unify_labels([2, 3, 4, 1, 0], total_annotators=4)
    assert lv4.as_bools() == (False, True, True, False, False)


def test_unify_labels_any_and_unanimous():
    counts = [0, 1, 2, 3, 0]
    assert unify_labels(counts, 3, rule="any").as_bools() == (
        False, True, True, True, False)
    assert unify_labels(counts, 3, rule="unanimous").as_bools() == (
        False, False, False, True, False)


def test_unify_labels_matches_enumeration_oracle():
    # Brute force over every (count, total) pair for every rule.
    for total in range(1, 6):
        for count in range(0, total + 1):
            got = unify_labels([count] * 5, total, rule="majority").bl
            assert got == (count * 2 > total)
            got = unify_labels([count] * 5, total, rule="any").bl
            assert got == (count >= 1)
            got = unify_labels([count] * 5, total, rule="unanimous").bl
            assert got == (count == total)


def test_unify_labels_validation():
    with pytest.raises(ValueError):
        unify_labels([4, 0, 0, 0, 0], total_annotators=3)  # count > total
    with pytest.raises(ValueError):
        unify_labels([1, 1, 1], total_annotators=3)  # wrong arity
    with pytest.raises(ValueError):
        unify_labels([1] * 5, 3, rule="plurality")
    with pytest.raises(ValueError):
        unify_labels([0] * 5, 0)


# ---------------------------------------------------------------------------
# Length filtering
# ---------------------------------------------------------------------------

def test_filter_hand_computed_fractions():
    """Durations {2, 3, 9} at threshold 7: keeps {2, 3}.

    Clip fraction 2/3; duration fraction (2+3)/(2+3+9) = 5/14.
    """
    records = [make_record(f"c{i}", duration_s=d) for i, d in enumerate([2.0, 3.0, 9.0])]
    kept, stats = filter_by_max_length(records, 7.0)
    assert [r.duration_s for r in kept] == [2.0, 3.0]
    assert stats.clips_kept_fraction == pytest.approx(2 / 3)
    assert stats.duration_kept_fraction == pytest.approx(5 / 14)
    assert stats.threshold_s == 7.0


def test_filter_boundary_is_inclusive():
    records = [make_record("c0", duration_s=7.0), make_record("c1", duration_s=7.0001)]
    kept, _ = filter_by_max_length(records, 7.0)
    assert [r.clip_id for r in kept] == ["c0"]


def test_filter_empty_input_yields_unit_fractions():
    kept, stats = filter_by_max_length([], 7.0)
    assert kept == []
    assert stats.clips_kept_fraction == 1.0
    assert stats.duration_kept_fraction == 1.0


def test_filter_infinite_threshold_keeps_everything():
    records = [make_record(f"c{i}", duration_s=d) for i, d in enumerate([1.0, 500.0])]
    kept, stats = filter_by_max_length(records, math.inf)
    assert kept == records
    assert stats.clips_kept_fraction == 1.0


def test_filter_rejects_nonpositive_threshold():
    with pytest.raises(ValueError):
        filter_by_max_length([], 0.0)


def test_filter_matches_brute_force_oracle():
    rng = np.random.default_rng(123)
    for _ in range(20):
        n = int(rng.integers(1, 60))
        durations = rng.uniform(0.2, 15.0, n)
        records = [make_record(f"c{i}", duration_s=float(d)) for i, d in enumerate(durations)]
        threshold = float(rng.uniform(0.5, 14.0))
        kept, stats = filter_by_max_length(records, threshold)
        oracle_kept = [r for r in records if r.duration_s <= threshold]
        assert kept == oracle_kept
        assert stats.clips_kept_fraction == pytest.approx(len(oracle_kept) / n)
        oracle_dur = sum(r.duration_s for r in oracle_kept) / sum(r.duration_s for r in records)
        assert stats.duration_kept_fraction == pytest.approx(oracle_dur)


# ---------------------------------------------------------------------------
# Mixing
# ---------------------------------------------------------------------------

def test_mix_prefixes_ids_and_is_seed_deterministic():
    a = [make_record(f"a{i}", corpus_id="ksof") for i in range(5)]
    b = [make_record(f"b{i}", corpus_id="sep28k") for i in range(5)]
    mixed1 = mix_corpora([a, b], seed=42)
    mixed2 = mix_corpora([a, b], seed=42)
    assert mixed1 == mixed2
    assert sorted(r.clip_id for r in mixed1) == sorted(
        [f"ksof/a{i}" for i in range(5)] + [f"sep28k/b{i}" for i in range(5)])


def test_mix_different_seeds_differ():
    a = [make_record(f"a{i}", corpus_id="k") for i in range(20)]
    assert mix_corpora([a], seed=1) != mix_corpora([a], seed=2)


def test_mix_detects_collisions():
    a = [make_record("x", corpus_id="k")]
    b = [make_record("x", corpus_id="k")]
    with pytest.raises(ValueError, match="collision"):
        mix_corpora([a, b], seed=0)


# ---------------------------------------------------------------------------
# Stats
# ---------------------------------------------------------------------------

def test_split_stats_hand_counted():
    records = [
        make_record("c0", language="EN", duration_s=2.0, labels=LabelVector(bl=True)),
        make_record("c1", language="EN", duration_s=3.0,
                    labels=LabelVector(bl=True, wd=True), split="dev"),
        make_record("c2", language="DE", duration_s=5.0),
        make_record("c3", language="ZH", duration_s=1.5, labels=LabelVector(pro=True)),
    ]
    stats = split_stats(records)
    assert stats.n_clips == 4
    assert stats.total_duration_s == pytest.approx(11.5)
    assert stats.language_counts == {"EN": 2, "DE": 1, "ZH": 1}
    assert stats.language_fractions["EN"] == pytest.approx(0.5)
    assert sum(stats.language_fractions.values()) == pytest.approx(1.0)
    assert stats.language_durations_s["EN"] == pytest.approx(5.0)
    assert stats.class_counts == {"bl": 2, "int": 0, "pro": 1, "snd": 0, "wd": 1}
    assert stats.split_counts == {"train": 3, "dev": 1}
    assert stats.fluent_count == 1  # c2 carries no labels


def test_split_stats_empty_is_all_zero():
    stats = split_stats([])
    assert stats.n_clips == 0
    assert stats.total_duration_s == 0.0
    assert stats.language_fractions == {}
    assert stats.class_counts == {name: 0 for name in CLASS_NAMES}


def test_stats_text_and_json_render(tmp_path):
    stats = split_stats([make_record("c0", language="DE")])
    text = stats.to_text()
    assert "n_clips = 1" in text
    assert "language.DE" in text
    payload = stats.to_dict()
    assert payload["language_counts"] == {"DE": 1}
